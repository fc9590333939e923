"""
Equilibrium search and linear stability.

Roots are found by multi-start hybrid Powell iterations in scaled
coordinates, started from the system's seed states and a scrambled Halton
sequence over the start box. Stability comes from the eigenvalues of a
central-difference Jacobian in the same scaled coordinates, which share
their spectrum with the unscaled Jacobian.
"""

from __future__ import annotations

import logging
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import root
from scipy.stats import qmc

from modules.bifurcation.config import (
    NEGATIVE_SLACK,
    VERIFY_HOURS,
    VERIFY_PERTURBATION,
    VERIFY_STABLE_TOL,
    VERIFY_UNSTABLE_DEPARTURE,
)
from modules.bifurcation.models import (
    ClassifyConfig,
    DynamicalSystem,
    Equilibrium,
    SearchConfig,
    Stability,
    VerificationResult,
)
from modules.bifurcation.systems import SystemLike, as_system, simulate_system
from modules.errors import DomainError, StabilityError
from modules.integrator.models import IntegratorConfig
from modules.sepsis_model.models import ParameterSet

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Root search
# ---------------------------------------------------------------------------

def _starts(system: DynamicalSystem, search: SearchConfig) -> List[np.ndarray]:
    starts = [system.project(seed) for seed in system.seeds]
    k = len(system.active_indices)
    if search.n_starts and k:
        sampler = qmc.Halton(d=k, scramble=True, seed=search.seed)
        lo, hi = search.start_box
        starts.extend(lo + (hi - lo) * sampler.random(search.n_starts))
    return starts


def _solve_from(system: DynamicalSystem, z0: np.ndarray, search: SearchConfig) -> Optional[Tuple[np.ndarray, float]]:
    k = len(z0)
    try:
        with np.errstate(all="ignore"):
            sol = root(
                system.scaled_residual,
                z0,
                method="hybr",
                options={"xtol": 1e-13, "maxfev": search.max_iter * (k + 1)},
            )
    except (ValueError, OverflowError, ZeroDivisionError) as exc:
        logger.debug("Root solve from %s failed: %s", z0, exc)
        return None
    z = sol.x
    if not np.all(np.isfinite(z)):
        return None
    if system.nonnegative:
        if np.any(z < -NEGATIVE_SLACK):
            return None
        z = np.maximum(z, 0.0)
    residual = system.scaled_residual(z)
    if not np.all(np.isfinite(residual)):
        return None
    norm = float(np.max(np.abs(residual))) if k else 0.0
    if norm > search.newton_tol:
        return None
    return z, norm


def find_equilibria(
    system: SystemLike,
    params: Optional[ParameterSet] = None,
    search: Optional[SearchConfig] = None,
    param_value: float = float("nan"),
) -> List[Equilibrium]:
    """Deduplicated equilibria sorted by the system's sort component (P for sepsis).

    ``system`` is a subsystem id (with ``params``) or a DynamicalSystem. An
    empty list is a valid outcome.
    """
    system = as_system(system, params)
    search = search or SearchConfig()
    if system.nonnegative and search.start_box[0] < 0:
        raise DomainError(f"start_box {search.start_box} leaves the nonnegative orthant")

    found: List[Tuple[np.ndarray, float]] = []
    for z0 in _starts(system, search):
        result = _solve_from(system, z0, search)
        if result is None:
            continue
        z, norm = result
        for i, (other, other_norm) in enumerate(found):
            if np.max(np.abs(z - other)) <= search.dedup_radius:
                if norm < other_norm:
                    found[i] = (z, norm)
                break
        else:
            found.append((z, norm))

    equilibria = [
        Equilibrium(
            param_value=param_value,
            state=system.embed(z),
            state_names=system.state_names,
            residual_norm=norm,
        )
        for z, norm in found
    ]
    equilibria.sort(key=lambda eq: eq.state[system.sort_index])
    logger.debug("%s: %d equilibria at %s", system.name, len(equilibria), param_value)
    return equilibria


# ---------------------------------------------------------------------------
# Jacobians and stability
# ---------------------------------------------------------------------------

def jacobian(system: DynamicalSystem, state: np.ndarray, fd_eps: float) -> np.ndarray:
    """Central-difference Jacobian in scaled active coordinates."""
    z = system.project(state)
    k = len(z)
    jac = np.empty((k, k))
    for j in range(k):
        step = np.zeros(k)
        step[j] = fd_eps
        jac[:, j] = (system.scaled_residual(z + step) - system.scaled_residual(z - step)) / (2.0 * fd_eps)
    return jac


def richardson_jacobian(system: DynamicalSystem, state: np.ndarray, fd_eps: float) -> np.ndarray:
    """Fourth-order Jacobian: Richardson extrapolation of two central differences."""
    coarse = jacobian(system, state, fd_eps)
    fine = jacobian(system, state, fd_eps / 2.0)
    return (4.0 * fine - coarse) / 3.0


def _label(leading: float, margin: float) -> Stability:
    if leading < -margin:
        return Stability.STABLE
    if leading > margin:
        return Stability.UNSTABLE
    return Stability.MARGINAL


def classify_stability(
    eq: Equilibrium,
    system: SystemLike,
    params: Optional[ParameterSet] = None,
    classify: Optional[ClassifyConfig] = None,
) -> Tuple[Stability, np.ndarray]:
    """Label from the leading real part of the Jacobian spectrum; fills ``eq`` in place."""
    system = as_system(system, params)
    classify = classify or ClassifyConfig()
    jac = jacobian(system, eq.state, classify.fd_eps)
    if not np.all(np.isfinite(jac)):
        raise StabilityError(f"{system.name}: non-finite Jacobian at parameter value {eq.param_value}")
    try:
        eigenvalues = np.linalg.eigvals(jac) if jac.size else np.zeros(0, dtype=complex)
    except np.linalg.LinAlgError as exc:
        raise StabilityError(f"{system.name}: eigenvalue solver failed: {exc}")
    leading = float(np.max(eigenvalues.real)) if eigenvalues.size else float("-inf")
    stability = _label(leading, classify.margin)
    eq.stability = stability
    eq.leading_real_part = leading
    eq.eigenvalues = eigenvalues
    return stability, eigenvalues


def equilibria_with_stability(
    system: DynamicalSystem,
    search: SearchConfig,
    classify: ClassifyConfig,
    param_value: float = float("nan"),
) -> List[Equilibrium]:
    equilibria = find_equilibria(system, search=search, param_value=param_value)
    for eq in equilibria:
        classify_stability(eq, system, classify=classify)
    return equilibria


# ---------------------------------------------------------------------------
# Re-integration check
# ---------------------------------------------------------------------------

def verify_equilibrium(
    eq: Equilibrium,
    system: SystemLike,
    params: Optional[ParameterSet] = None,
    hours: float = VERIFY_HOURS,
    perturbation: float = VERIFY_PERTURBATION,
    integ: Optional[IntegratorConfig] = None,
    seed: int = 0,
) -> VerificationResult:
    """Perturb by ``perturbation`` of scale, integrate and compare with the label.

    Stable points must stay within 1e-3 in scaled max-norm; unstable points
    must depart by more than 1e-2.
    """
    system = as_system(system, params)
    if eq.stability is None:
        classify_stability(eq, system)
    rng = np.random.default_rng(seed)
    idx = system.active_indices
    direction = rng.uniform(0.5, 1.0, size=len(idx))
    if not system.nonnegative:
        direction *= rng.choice([-1.0, 1.0], size=len(idx))
    y0 = eq.state.copy()
    y0[idx] += perturbation * direction * system.scales[idx]

    traj = simulate_system(system, y0, hours, integ)
    deviations = np.max(np.abs(traj.states[:, idx] - eq.state[idx]) / system.scales[idx], axis=1)
    result = VerificationResult.judge(
        eq.stability, deviations, VERIFY_STABLE_TOL, VERIFY_UNSTABLE_DEPARTURE
    )
    if not result.consistent:
        logger.warning(
            "%s equilibrium at %s labelled %s but re-integration deviates by %.3g",
            system.name, eq.param_value, eq.stability.value, result.max_deviation,
        )
    return result
