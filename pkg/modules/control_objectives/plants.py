"""
Controlled plants.

A plant owns the dynamics, the instantaneous objective and the control
bounds of one scenario, so the optimizer, the dataset generator and the
recurrent surrogate run unchanged on the sepsis model and on the toy plant.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from typing import Optional, Tuple

import numpy as np

from modules.control_objectives.config import (
    TOY_A,
    TOY_B,
    TOY_GAIN,
    TOY_GAIN_OFFSET,
    TOY_STATE_NAMES,
    TOY_U_CENTER,
)
from modules.control_objectives.models import (
    Aggregation,
    ControlChannel,
    ObjectiveConfig,
    ObjectiveResult,
    PlantKind,
    ScenarioSetting,
)
from modules.control_objectives.objectives import aggregate, objective_values
from modules.errors import DomainError
from modules.integrator.models import IntegratorConfig, Trajectory
from modules.integrator.solvers import solve
from modules.sepsis_model.config import STATE_NAMES
from modules.sepsis_model.dynamics import full_rhs, state_scales
from modules.sepsis_model.models import ParameterSet, SubsystemId
from modules.sepsis_model.parameters import with_overrides

logger = logging.getLogger(__name__)


class Plant(ABC):
    """Dynamics plus objective of one control problem."""

    kind: PlantKind
    state_names: Tuple[str, ...]
    nonnegative: bool = True

    def __init__(self, channel: ControlChannel) -> None:
        self.channel = ControlChannel(channel)

    @property
    def state_dim(self) -> int:
        return len(self.state_names)

    @property
    def channels(self) -> Tuple[int, ...]:
        return self.channel.columns

    @abstractmethod
    def rhs(self, t: float, y: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Time derivative under control row ``u`` = (u_p, u_T)."""

    @abstractmethod
    def objective_values(self, states: np.ndarray) -> np.ndarray:
        """Instantaneous objective per state row."""

    @abstractmethod
    def bounds(self) -> np.ndarray:
        """2x2 array of (lower, upper) rows over the (u_p, u_T) columns."""

    @abstractmethod
    def scales(self) -> np.ndarray:
        """Per-component magnitude for tolerances and feature normalization."""

    # -- controls -------------------------------------------------------------

    def idle_row(self) -> np.ndarray:
        """Control row with every channel at its lower bound."""
        return self.bounds()[0].copy()

    def rows_from_unit(self, unit: np.ndarray) -> np.ndarray:
        """Map (d, n_channels) values in [0, 1] to (d, 2) control rows."""
        unit = np.asarray(unit, dtype=float).reshape(-1, len(self.channels))
        lo, hi = self.bounds()
        rows = np.tile(self.idle_row(), (len(unit), 1))
        for j, col in enumerate(self.channels):
            rows[:, col] = lo[col] + unit[:, j] * (hi[col] - lo[col])
        return rows

    def unit_from_rows(self, rows: np.ndarray) -> np.ndarray:
        """Inverse of rows_from_unit for the controlled channels."""
        rows = np.asarray(rows, dtype=float).reshape(-1, 2)
        lo, hi = self.bounds()
        out = np.zeros((len(rows), len(self.channels)))
        for j, col in enumerate(self.channels):
            width = hi[col] - lo[col]
            out[:, j] = 0.0 if width == 0 else (rows[:, col] - lo[col]) / width
        return out

    def _check_rows(self, rows: np.ndarray) -> None:
        lo, hi = self.bounds()
        if rows.size and (np.any(rows < lo - 1e-12) or np.any(rows > hi + 1e-12)):
            raise DomainError("control rows fall outside the plant bounds")

    # -- simulation -----------------------------------------------------------

    def simulate(
        self,
        x0: np.ndarray,
        rows: np.ndarray,
        t_start: float,
        step: float,
        integ: Optional[IntegratorConfig] = None,
    ) -> Trajectory:
        rows = np.asarray(rows, dtype=float).reshape(-1, 2)
        self._check_rows(rows)
        times = t_start + step * np.arange(len(rows) + 1, dtype=float)
        states, clamp, _ = solve(
            self.rhs,
            np.asarray(x0, dtype=float),
            times,
            integ or IntegratorConfig(),
            controls=rows,
            scales=self.scales(),
            nonnegative=self.nonnegative,
        )
        return Trajectory(
            times=times,
            states=states,
            controls=rows,
            subsystem=SubsystemId.FULL if self.kind is PlantKind.SEPSIS else None,
            state_names=self.state_names,
            clamp=clamp,
        )

    def evaluate(
        self,
        x0: np.ndarray,
        rows: np.ndarray,
        t_start: float,
        step: float,
        aggregation: Aggregation = Aggregation.INTEGRAL,
        integ: Optional[IntegratorConfig] = None,
    ) -> ObjectiveResult:
        traj = self.simulate(x0, rows, t_start, step, integ)
        values = self.objective_values(traj.states)
        value, accumulated = aggregate(traj.times, values, aggregation)
        return ObjectiveResult(
            value=value,
            times=traj.times,
            instantaneous=values,
            accumulated=accumulated,
            trajectory=traj,
        )


class SepsisPlant(Plant):
    """Full sepsis model under antibiotic and anti-TNF control."""

    kind = PlantKind.SEPSIS
    state_names = STATE_NAMES

    def __init__(self, params: ParameterSet, objective: ObjectiveConfig,
                 channel: Optional[ControlChannel] = None) -> None:
        super().__init__(channel or objective.scenario.channel)
        self.params = params
        self.objective = objective
        self._scales = state_scales(params)

    def rhs(self, t: float, y: np.ndarray, u: np.ndarray) -> np.ndarray:
        return full_rhs(y, self.params, float(u[0]), float(u[1]))

    def objective_values(self, states: np.ndarray) -> np.ndarray:
        return objective_values(states, self.objective)

    def bounds(self) -> np.ndarray:
        p = self.params
        return np.array([[p.u_pL, p.u_TL], [p.u_pU, p.u_TU]])

    def scales(self) -> np.ndarray:
        return self._scales


class ToyLinearPlant(Plant):
    """Three-state linear plant with a known saturated feedback law.

    x' = A x + B (u - 0.5), cost x.x; the feedback law
    u = clip(0.5 - 0.3 x1 - 0.2 x2 - 0.1 x3, 0, 1) is the reference policy.
    """

    kind = PlantKind.TOY_LINEAR
    state_names = TOY_STATE_NAMES
    nonnegative = False

    def __init__(self) -> None:
        super().__init__(ControlChannel.U_P)

    def rhs(self, t: float, y: np.ndarray, u: np.ndarray) -> np.ndarray:
        return TOY_A @ y + TOY_B * (float(u[0]) - TOY_U_CENTER)

    def objective_values(self, states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(states)
        return np.sum(states * states, axis=1)

    def bounds(self) -> np.ndarray:
        return np.array([[0.0, 0.0], [1.0, 0.0]])

    def scales(self) -> np.ndarray:
        return np.ones(len(TOY_STATE_NAMES))

    @staticmethod
    def feedback_law(x: np.ndarray) -> float:
        return float(np.clip(TOY_GAIN_OFFSET + TOY_GAIN @ np.asarray(x, dtype=float), 0.0, 1.0))

    def feedback_rollout(
        self,
        x0: np.ndarray,
        n_intervals: int,
        step: float = 1.0,
        integ: Optional[IntegratorConfig] = None,
    ) -> Tuple[np.ndarray, Trajectory]:
        """Apply the feedback law at every grid time; returns (rows, trajectory)."""
        x = np.asarray(x0, dtype=float)
        rows = np.zeros((n_intervals, 2))
        for k in range(n_intervals):
            rows[k, 0] = self.feedback_law(x)
            x = self.simulate(x, rows[k:k + 1], k * step, step, integ).final_state
        return rows, self.simulate(x0, rows, 0.0, step, integ)


def make_plant(
    setting: ScenarioSetting,
    base_params: Optional[ParameterSet] = None,
    objective: Optional[ObjectiveConfig] = None,
) -> Plant:
    """Plant for a scenario setting, with its parameter overrides applied."""
    if setting.plant is PlantKind.TOY_LINEAR:
        return ToyLinearPlant()
    params = with_overrides(base_params or ParameterSet(), setting.overrides)
    objective = objective or ObjectiveConfig(scenario=setting.scenario)
    if objective.scenario is not setting.scenario:
        objective = objective.model_copy(update={"scenario": setting.scenario})
    return SepsisPlant(params, objective, setting.control_channel)
