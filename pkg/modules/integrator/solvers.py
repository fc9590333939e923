"""
Explicit Runge-Kutta steppers.

``solve`` advances ``y' = f(t, y, u)`` across a grid of output times, holding
``u`` constant on each grid interval. Two schemes are available: classic RK4
with a fixed substep, and Dormand-Prince 5(4) with error control. Both share
the negativity handling: small negative excursions are zeroed and counted,
larger ones trigger step halving (clamp mode) or an immediate error (reject
mode).
"""

from __future__ import annotations

import logging
import math
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from modules.errors import (
    MaxStepsExceededError,
    NegativityError,
    NonFiniteDerivativeError,
    StepSizeUnderflowError,
)
from modules.integrator.config import (
    MAX_STEP_FACTOR,
    MIN_STEP_FACTOR,
    MIN_STEP_RELATIVE,
    SAFETY_FACTOR,
)
from modules.integrator.models import ClampReport, IntegrationMethod, IntegratorConfig, NegativityMode

logger = logging.getLogger(__name__)

ControlledRhs = Callable[[float, np.ndarray, Optional[np.ndarray]], np.ndarray]


# ---------------------------------------------------------------------------
# Dormand-Prince tableau
# ---------------------------------------------------------------------------

_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_E = np.array([
    71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40,
])


def _min_step(t: float) -> float:
    return MIN_STEP_RELATIVE * max(1.0, abs(t))


class _Stepper:
    """Carries step-size state, step budget and clamp accounting across intervals."""

    def __init__(
        self,
        f: ControlledRhs,
        config: IntegratorConfig,
        scales: np.ndarray,
        nonnegative: bool,
    ) -> None:
        self.f = f
        self.config = config
        self.scales = scales
        self.nonnegative = nonnegative
        self.neg_tol = config.abs_tol * scales
        self.clamp = ClampReport()
        self.steps = 0
        self.h_next = config.step_h

    # -- bookkeeping --------------------------------------------------------

    def _count(self, t: float) -> None:
        self.steps += 1
        if self.steps > self.config.max_steps:
            raise MaxStepsExceededError(
                f"exceeded {self.config.max_steps} steps at t={t:.6g}", t=t
            )

    def _eval(self, t: float, y: np.ndarray, u: Optional[np.ndarray], strict: bool) -> Optional[np.ndarray]:
        dy = np.asarray(self.f(t, y, u), dtype=float)
        if not np.all(np.isfinite(dy)):
            if strict:
                raise NonFiniteDerivativeError(f"non-finite derivative at t={t:.6g}", t=t)
            return None
        return dy

    def _too_negative(self, y: np.ndarray) -> bool:
        return self.nonnegative and bool(np.any(y < -self.neg_tol))

    def _clamp_small(self, y: np.ndarray) -> np.ndarray:
        if not self.nonnegative:
            return y
        negative = y < 0.0
        if np.any(negative):
            self.clamp.record(-y[negative] / self.scales[negative])
            y = np.where(negative, 0.0, y)
        return y

    def _negativity(self, t: float, h: float) -> None:
        if self.config.negativity_mode is NegativityMode.REJECT:
            raise NegativityError(f"state went negative beyond tolerance at t={t:.6g}", t=t)
        if h * 0.5 < _min_step(t):
            raise NegativityError(
                f"state stays negative beyond tolerance down to the minimum step at t={t:.6g}", t=t
            )

    # -- RK4 ----------------------------------------------------------------

    def _rk4_step(self, t: float, y: np.ndarray, h: float, u: Optional[np.ndarray]) -> np.ndarray:
        self._count(t)
        k1 = self._eval(t, y, u, strict=True)
        k2 = self._eval(t + h / 2, y + h / 2 * k1, u, strict=True)
        k3 = self._eval(t + h / 2, y + h / 2 * k2, u, strict=True)
        k4 = self._eval(t + h, y + h * k3, u, strict=True)
        candidate = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if self._too_negative(candidate):
            self._negativity(t, h)
            half = self._rk4_step(t, y, h / 2, u)
            return self._rk4_step(t + h / 2, half, h / 2, u)
        return self._clamp_small(candidate)

    def _advance_rk4(self, t0: float, t1: float, y: np.ndarray, u: Optional[np.ndarray]) -> np.ndarray:
        span = t1 - t0
        n_sub = max(1, math.ceil(span / self.config.step_h - 1e-9))
        h = span / n_sub
        for i in range(n_sub):
            y = self._rk4_step(t0 + i * h, y, h, u)
        return y

    # -- RK45 ---------------------------------------------------------------

    def _dp_attempt(self, t: float, y: np.ndarray, h: float, u: Optional[np.ndarray]) -> Tuple[np.ndarray, float]:
        k = [self._eval(t, y, u, strict=True)]
        for stage in range(1, 7):
            y_stage = y + h * sum(a * kj for a, kj in zip(_DP_A[stage], k))
            ks = self._eval(t + _DP_C[stage] * h, y_stage, u, strict=False)
            if ks is None:
                return y, math.inf
            k.append(ks)
        y_new = y + h * sum(a * kj for a, kj in zip(_DP_A[6], k))
        err_vec = h * np.tensordot(_DP_E, np.array(k), axes=1)
        tol = self.config.abs_tol * self.scales + self.config.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.max(np.abs(err_vec) / tol))
        return y_new, err

    def _advance_rk45(self, t0: float, t1: float, y: np.ndarray, u: Optional[np.ndarray]) -> np.ndarray:
        t = t0
        h = self.h_next
        while t1 - t > _min_step(t):
            h_try = min(h, t1 - t)
            if h_try < _min_step(t):
                raise StepSizeUnderflowError(f"step size underflow at t={t:.6g}", t=t)
            self._count(t)
            y_new, err = self._dp_attempt(t, y, h_try, u)
            if err <= 1.0:
                if self._too_negative(y_new):
                    self._negativity(t, h_try)
                    h = h_try * 0.5
                    continue
                y = self._clamp_small(y_new)
                t = t1 if h_try == t1 - t else t + h_try
                factor = MAX_STEP_FACTOR if err == 0.0 else SAFETY_FACTOR * err ** -0.2
                h = h_try * min(MAX_STEP_FACTOR, max(MIN_STEP_FACTOR, factor))
            else:
                factor = 0.0 if math.isinf(err) else SAFETY_FACTOR * err ** -0.2
                h = h_try * max(MIN_STEP_FACTOR, factor)
                logger.debug("Rejected step h=%.3g at t=%.6g (err=%.3g)", h_try, t, err)
        self.h_next = h
        return y

    def advance(self, t0: float, t1: float, y: np.ndarray, u: Optional[np.ndarray]) -> np.ndarray:
        if self.config.method is IntegrationMethod.RK4:
            return self._advance_rk4(t0, t1, y, u)
        return self._advance_rk45(t0, t1, y, u)


# ---------------------------------------------------------------------------
# Public entry points
# ---------------------------------------------------------------------------

def make_grid(t_start: float, t_end: float, step: float) -> np.ndarray:
    """Uniform grid from t_start to t_end; the last point is exactly t_end."""
    if t_end < t_start:
        raise ValueError(f"t_end {t_end} precedes t_start {t_start}")
    if t_end == t_start:
        return np.array([float(t_start)])
    count = max(1, int(round((t_end - t_start) / step)))
    grid = t_start + step * np.arange(count + 1, dtype=float)
    grid[-1] = t_end
    return grid


def solve(
    f: ControlledRhs,
    y0: Sequence[float],
    times: Sequence[float],
    config: IntegratorConfig,
    controls: Optional[np.ndarray] = None,
    scales: Optional[np.ndarray] = None,
    nonnegative: bool = True,
) -> Tuple[np.ndarray, ClampReport, int]:
    """Integrate across ``times``; returns (states on the grid, clamp report, steps taken)."""
    y = np.array(y0, dtype=float)
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0):
        raise ValueError("output times must be strictly increasing")
    if controls is not None and len(controls) != len(times) - 1:
        raise ValueError("controls must provide one row per grid interval")
    scales = np.ones_like(y) if scales is None else np.asarray(scales, dtype=float)
    stepper = _Stepper(f, config, scales, nonnegative)

    states = np.empty((len(times), y.size))
    states[0] = y
    for k in range(len(times) - 1):
        u = None if controls is None else controls[k]
        y = stepper.advance(times[k], times[k + 1], y, u)
        states[k + 1] = y
    return states, stepper.clamp, stepper.steps
