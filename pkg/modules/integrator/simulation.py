"""
Sepsis-model integration on a control grid.
"""

from __future__ import annotations

import logging
from typing import Optional, Tuple

import numpy as np

from modules.control_objectives.models import ControlSignal
from modules.errors import DomainError
from modules.integrator.models import IntegratorConfig, Trajectory
from modules.integrator.solvers import make_grid, solve
from modules.sepsis_model.config import STATE_NAMES
from modules.sepsis_model.dynamics import state_scales, subsystem_rhs
from modules.sepsis_model.models import ParameterSet, StateVector, SubsystemId

logger = logging.getLogger(__name__)

_GRID_TOL = 1e-9


def _control_rows(control: ControlSignal, span: Tuple[float, float]) -> Tuple[np.ndarray, np.ndarray]:
    """Grid times inside ``span`` and the control rows held on each interval."""
    t_1, t_f = span
    first = (t_1 - control.t_start) / control.step
    last = (t_f - control.t_start) / control.step
    i0, i1 = int(round(first)), int(round(last))
    if abs(first - i0) > _GRID_TOL or abs(last - i1) > _GRID_TOL:
        raise DomainError(f"span {span} does not align with the control grid (step {control.step})")
    if i0 < 0 or i1 > control.n_intervals:
        raise DomainError(
            f"control grid [{control.t_start}, {control.t_end}] does not cover span {span}"
        )
    times = control.t_start + control.step * np.arange(i0, i1 + 1, dtype=float)
    times[0], times[-1] = t_1, t_f
    return times, control.as_array()[i0:i1]


def _check_control_bounds(rows: np.ndarray, params: ParameterSet) -> None:
    if rows.size == 0:
        return
    lo = np.array([params.u_pL, params.u_TL])
    hi = np.array([params.u_pU, params.u_TU])
    if np.any(rows < lo - 1e-12) or np.any(rows > hi + 1e-12):
        raise DomainError("control values fall outside the parameter-set bounds")


def integrate(
    subsystem: SubsystemId,
    x0: StateVector,
    params: ParameterSet,
    control: Optional[ControlSignal],
    span: Tuple[float, float],
    config: Optional[IntegratorConfig] = None,
) -> Trajectory:
    """Integrate a subsystem from ``x0`` over ``span``.

    Samples on the control grid when a control signal is given, otherwise on
    a uniform grid of ``config.grid_step``. Components outside the subsystem
    stay at zero.
    """
    config = config or IntegratorConfig()
    subsystem = SubsystemId(subsystem)
    t_1, t_f = float(span[0]), float(span[1])
    if t_f < t_1:
        raise DomainError(f"span end {t_f} precedes start {t_1}")

    if control is not None:
        times, rows = _control_rows(control, (t_1, t_f))
        _check_control_bounds(rows, params)
    else:
        times = make_grid(t_1, t_f, config.grid_step)
        rows = np.zeros((len(times) - 1, 2))

    kernel = subsystem_rhs(subsystem)
    mask = subsystem.mask
    y0 = np.where(mask, x0.to_array(), 0.0)

    def f(t: float, y: np.ndarray, u: Optional[np.ndarray]) -> np.ndarray:
        return kernel(y, params, float(u[0]), float(u[1]))

    states, clamp, steps = solve(
        f, y0, times, config, controls=rows, scales=state_scales(params), nonnegative=True
    )
    if clamp.count:
        logger.warning(
            "Clamped %d negative excursions (worst %.3g, total %.3g of scale)",
            clamp.count, clamp.worst, clamp.total_mass,
        )
    logger.debug("Integrated %s over [%g, %g] in %d steps", subsystem.value, t_1, t_f, steps)
    return Trajectory(
        times=times,
        states=states,
        controls=rows,
        subsystem=subsystem,
        state_names=STATE_NAMES,
        clamp=clamp,
    )


def integrate_reference(problem, config: IntegratorConfig, grid_step: Optional[float] = None) -> Trajectory:
    """Integrate a ReferenceProblem (or any object with rhs, y0, span)."""
    times = make_grid(problem.span[0], problem.span[1], grid_step or problem.grid_step)
    y0 = np.atleast_1d(np.asarray(problem.y0, dtype=float))
    states, clamp, _ = solve(
        lambda t, y, u: problem.rhs(t, y), y0, times, config, nonnegative=False
    )
    names = tuple(f"x{i}" for i in range(y0.size))
    return Trajectory(
        times=times,
        states=states,
        controls=np.zeros((len(times) - 1, 2)),
        subsystem=None,
        state_names=names,
        clamp=clamp,
    )
