"""
Box minimization over [0, 1]^d.

The improved loop seeds the surrogate with random evaluations, then alternates
GP fits with bandit-plus-random-search candidate proposals scored by LCB, and
finishes with a coordinate-wise local search from the incumbent.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from modules.bo_optimizer.bandit import ArmBandit
from modules.bo_optimizer.config import LS_MIN_RADIUS
from modules.bo_optimizer.gp import GpSurrogate, fit_gp, lcb
from modules.bo_optimizer.models import BoConfig, BoResult, CandidateSet, LocalSearchConfig
from modules.errors import DomainError

logger = logging.getLogger(__name__)

BoxObjective = Callable[[np.ndarray], float]


def _finite_or_inf(value: float) -> float:
    value = float(value)
    return value if math.isfinite(value) else math.inf


def evaluate_batch(objective: BoxObjective, points: Sequence[np.ndarray], parallel_eval: int = 1) -> List[float]:
    """Objective values in the order of ``points``; non-finite values become +inf."""
    if parallel_eval <= 1 or len(points) <= 1:
        return [_finite_or_inf(objective(x)) for x in points]
    with ThreadPoolExecutor(max_workers=parallel_eval) as pool:
        return [_finite_or_inf(v) for v in pool.map(objective, points)]


def fit_targets(y: np.ndarray) -> Optional[np.ndarray]:
    """Training outputs with +inf replaced by (max finite + range); None if nothing is finite."""
    y = np.asarray(y, dtype=float)
    finite = np.isfinite(y)
    if not finite.any():
        return None
    if finite.all():
        return y
    hi, lo = float(np.max(y[finite])), float(np.min(y[finite]))
    penalty = hi + (hi - lo) if hi > lo else hi + max(1.0, abs(hi))
    return np.where(finite, y, penalty)


# ---------------------------------------------------------------------------
# Candidate proposal
# ---------------------------------------------------------------------------

def propose_candidates(
    surrogate: GpSurrogate,
    cfg: BoConfig,
    rng: np.random.Generator,
    bandit: Optional[ArmBandit] = None,
) -> CandidateSet:
    """``arm_batch`` bandit points followed by ``rs_batch`` uniform points.

    The chosen point minimizes the LCB over the set; np.argmin keeps the
    lowest index on ties.
    """
    d = surrogate.dim
    bandit = bandit or ArmBandit(cfg.n_arms, d, cfg.ucb_exploration)

    arm_points = np.empty((cfg.arm_batch, d))
    arms = np.empty(cfg.arm_batch + cfg.rs_batch, dtype=int)
    for i in range(cfg.arm_batch):
        arm = bandit.select_arm()
        x = bandit.sample(arm, rng)
        reward = -float(lcb(surrogate, x, cfg.kappa, standardized=True)[0])
        bandit.update(arm, reward)
        arm_points[i] = x
        arms[i] = arm

    random_points = rng.random((cfg.rs_batch, d))
    arms[cfg.arm_batch:] = -1
    points = np.vstack([arm_points, random_points])
    acquisition = lcb(surrogate, points, cfg.kappa)
    chosen = int(np.argmin(acquisition))
    return CandidateSet(points=points, acquisition=acquisition, arms=arms, chosen=chosen)


# ---------------------------------------------------------------------------
# Local search
# ---------------------------------------------------------------------------

def local_search(
    objective: BoxObjective,
    x0: np.ndarray,
    cfg: LocalSearchConfig,
    rng: np.random.Generator,
    f0: Optional[float] = None,
) -> Tuple[np.ndarray, float, List[Tuple[np.ndarray, float]]]:
    """Coordinate-wise stochastic descent inside [0, 1]^d.

    Returns the best point, its value and every (point, value) evaluated.
    ``cfg.steps`` bounds the number of objective calls; an ``f0`` that is not
    supplied costs one of them.
    """
    x = np.clip(np.asarray(x0, dtype=float), 0.0, 1.0).copy()
    evaluated: List[Tuple[np.ndarray, float]] = []
    budget = cfg.steps
    if f0 is None:
        if budget == 0:
            return x, math.nan, evaluated
        f0 = _finite_or_inf(objective(x))
        evaluated.append((x.copy(), f0))
    f = float(f0)

    d = len(x)
    radius = cfg.radius
    coord = 0
    streak = 0
    while len(evaluated) < budget and radius >= LS_MIN_RADIUS:
        first = 1.0 if rng.random() < 0.5 else -1.0
        accepted = False
        for sign in (first, -first):
            if len(evaluated) >= budget:
                break
            cand = x.copy()
            cand[coord] = min(1.0, max(0.0, x[coord] + sign * radius))
            if cand[coord] == x[coord]:
                continue
            fc = _finite_or_inf(objective(cand))
            evaluated.append((cand.copy(), fc))
            if fc < f:
                x, f = cand, fc
                accepted = True
                break
        streak = 0 if accepted else streak + 1
        if streak >= d:
            radius *= cfg.shrink
            streak = 0
            logger.debug("Local search radius shrunk to %.3g", radius)
        coord = (coord + 1) % d
    return x, f, evaluated


# ---------------------------------------------------------------------------
# Drivers
# ---------------------------------------------------------------------------

def _running_min(y: Sequence[float]) -> List[float]:
    return list(np.minimum.accumulate(np.asarray(y, dtype=float))) if len(y) else []


def minimize_box(
    objective: BoxObjective,
    d: int,
    cfg: BoConfig,
    rng: np.random.Generator,
) -> BoResult:
    """Improved BO over [0, 1]^d; every true evaluation is recorded in order."""
    X: List[np.ndarray] = list(rng.random((cfg.n_init, d)))
    y: List[float] = evaluate_batch(objective, X, cfg.parallel_eval)

    bandit = ArmBandit(cfg.n_arms, d, cfg.ucb_exploration)
    for it in range(cfg.n_iter):
        targets = fit_targets(np.asarray(y))
        if targets is None:
            logger.warning("No finite objective after %d evaluations; sampling at random", len(y))
            x_next = rng.random(d)
        else:
            surrogate = fit_gp(np.asarray(X), targets, cfg.hyper_policy)
            x_next = propose_candidates(surrogate, cfg, rng, bandit).x_star
        X.append(np.asarray(x_next, dtype=float))
        y.append(evaluate_batch(objective, [X[-1]])[0])
        logger.debug("BO round %d: f=%.6g best=%.6g", it + 1, y[-1], min(y))

    n_local = 0
    best = int(np.argmin(y))
    if cfg.local_search.enabled and cfg.local_search.steps > 0 and math.isfinite(y[best]):
        _, _, evaluated = local_search(objective, X[best], cfg.local_search, rng, f0=y[best])
        for xp, fp in evaluated:
            X.append(xp)
            y.append(fp)
        n_local = len(evaluated)
        best = int(np.argmin(y))

    return BoResult(
        x_best=np.asarray(X[best]).copy(),
        f_best=float(y[best]),
        X=np.asarray(X),
        y=np.asarray(y, dtype=float),
        incumbent=_running_min(y),
        n_init=cfg.n_init,
        n_iter=cfg.n_iter,
        n_local=n_local,
    )


def random_search_box(
    objective: BoxObjective,
    d: int,
    n_evals: int,
    rng: np.random.Generator,
    parallel_eval: int = 1,
) -> BoResult:
    """Uniform random search baseline with the same bookkeeping as minimize_box."""
    if n_evals < 1:
        raise DomainError(f"random search needs at least one evaluation, got {n_evals}")
    X = rng.random((n_evals, d))
    y = evaluate_batch(objective, list(X), parallel_eval)
    best = int(np.argmin(y))
    return BoResult(
        x_best=X[best].copy(),
        f_best=float(y[best]),
        X=X,
        y=np.asarray(y, dtype=float),
        incumbent=_running_min(y),
        n_init=n_evals,
        n_iter=0,
        n_local=0,
    )
