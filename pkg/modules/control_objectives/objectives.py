"""
Scenario objectives and control projection.

Pathogen scenario: w1 * M1/M2 + w2 * CD8/CD4.
TNF scenario: TNF-alpha / IL-10.
"""

from __future__ import annotations

from typing import Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from modules.control_objectives.models import Aggregation, ControlSignal, ObjectiveConfig, Scenario
from modules.sepsis_model.config import STATE_INDEX
from modules.sepsis_model.models import ParameterSet, StateVector

_M1, _M2 = STATE_INDEX["M1"], STATE_INDEX["M2"]
_T4, _T8 = STATE_INDEX["T_CD4"], STATE_INDEX["T_CD8"]
_T, _CA = STATE_INDEX["T"], STATE_INDEX["C_A"]


def objective_values(states: np.ndarray, cfg: ObjectiveConfig) -> np.ndarray:
    """Instantaneous objective for each row of an (n, 20) state array."""
    states = np.atleast_2d(states)
    eps = cfg.epsilon_floor
    if cfg.scenario is Scenario.PATHOGEN:
        return (
            cfg.w1 * states[:, _M1] / np.maximum(states[:, _M2], eps)
            + cfg.w2 * states[:, _T8] / np.maximum(states[:, _T4], eps)
        )
    return states[:, _T] / np.maximum(states[:, _CA], eps)


def instantaneous_objective(state: StateVector, cfg: ObjectiveConfig) -> float:
    """Objective of a single state; nonnegative for any valid state."""
    return float(objective_values(state.to_array()[None, :], cfg)[0])


def aggregate(times: np.ndarray, values: np.ndarray, aggregation: Aggregation) -> Tuple[float, np.ndarray]:
    """(J, running trapezoidal integral) of an objective series."""
    if len(times) < 2:
        accumulated = np.zeros(len(times))
    else:
        accumulated = cumulative_trapezoid(values, times, initial=0.0)
    if aggregation is Aggregation.TERMINAL:
        return float(values[-1]), accumulated
    return float(accumulated[-1]), accumulated


def clamp_to_bounds(control: ControlSignal, params: ParameterSet) -> ControlSignal:
    """Project every value onto the parameter-set bounds of its channel."""
    rows = control.as_array()
    lo = np.array([params.u_pL, params.u_TL])
    hi = np.array([params.u_pU, params.u_TU])
    clipped = np.clip(rows, lo, hi) if rows.size else rows
    return ControlSignal.from_array(
        clipped,
        t_start=control.t_start,
        step=control.step,
        channel=control.channel,
        p_bounds=(params.u_pL, params.u_pU),
        T_bounds=(params.u_TL, params.u_TU),
    )
