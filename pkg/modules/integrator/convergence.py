"""
Closed-form reference problems and order-of-accuracy measurement.
"""

from __future__ import annotations

import logging
import math
from typing import Optional

import numpy as np

from modules.integrator.config import SATURATION_ERROR
from modules.integrator.models import (
    ConvergenceReport,
    IntegrationMethod,
    IntegratorConfig,
    ReferenceProblem,
)
from modules.integrator.simulation import integrate_reference

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Reference problems
# ---------------------------------------------------------------------------

def exponential_decay(rate: float = 1.0, x0: float = 1.0, t_end: float = 1.0) -> ReferenceProblem:
    """x' = -rate * x."""
    return ReferenceProblem(
        name="exponential_decay",
        rhs=lambda t, y: -rate * y,
        y0=np.array([x0]),
        span=(0.0, t_end),
        exact=lambda t: np.array([x0 * math.exp(-rate * t)]),
        grid_step=t_end,
    )


def logistic_growth(r: float = 0.5, capacity: float = 10.0, x0: float = 1.0, t_end: float = 10.0) -> ReferenceProblem:
    """x' = r x (1 - x / K)."""
    def exact(t: float) -> np.ndarray:
        return np.array([capacity / (1.0 + (capacity / x0 - 1.0) * math.exp(-r * t))])

    return ReferenceProblem(
        name="logistic_growth",
        rhs=lambda t, y: r * y * (1.0 - y / capacity),
        y0=np.array([x0]),
        span=(0.0, t_end),
        exact=exact,
        grid_step=1.0,
    )


def constant_rate(c: float = 2.0, x0: float = 1.0, t_end: float = 1.0) -> ReferenceProblem:
    """x' = c, integrated exactly by any consistent scheme."""
    return ReferenceProblem(
        name="constant_rate",
        rhs=lambda t, y: np.full_like(y, c),
        y0=np.array([x0]),
        span=(0.0, t_end),
        exact=lambda t: np.array([x0 + c * t]),
        grid_step=t_end,
    )


# ---------------------------------------------------------------------------
# Measurements
# ---------------------------------------------------------------------------

def grid_errors(problem: ReferenceProblem, config: IntegratorConfig) -> np.ndarray:
    """Absolute error against the closed form at every grid point."""
    traj = integrate_reference(problem, config)
    exact = np.array([problem.exact(t) for t in traj.times])
    return np.max(np.abs(traj.states - exact), axis=1)


def convergence_order(
    problem: ReferenceProblem,
    config: Optional[IntegratorConfig] = None,
    step_h: Optional[float] = None,
) -> ConvergenceReport:
    """Observed RK4 order from the final-time error at steps h and h/2."""
    config = config or IntegratorConfig()
    h = step_h or config.step_h
    steps = [h, h / 2]
    errors = []
    for step in steps:
        fixed = config.model_copy(update={"method": IntegrationMethod.RK4, "step_h": step})
        errors.append(float(grid_errors(problem, fixed)[-1]))

    reference = max(1.0, float(np.max(np.abs(problem.exact(problem.span[1])))))
    if errors[1] <= SATURATION_ERROR * reference:
        logger.info("%s is integrated to roundoff; order saturated", problem.name)
        return ConvergenceReport(order=math.inf, saturated=True, steps=steps, errors=errors)
    order = math.log2(errors[0] / errors[1])
    logger.info("%s: observed order %.3f", problem.name, order)
    return ConvergenceReport(order=order, saturated=False, steps=steps, errors=errors)
