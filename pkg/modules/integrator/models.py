"""
Pydantic models and result records for the integrator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from modules.integrator.config import (
    CSV_CONTROL_COLUMNS,
    DEFAULT_ABS_TOL,
    DEFAULT_GRID_STEP,
    DEFAULT_MAX_STEPS,
    DEFAULT_REL_TOL,
    DEFAULT_STEP_H,
)
from modules.sepsis_model.config import STATE_NAMES
from modules.sepsis_model.models import StateVector, SubsystemId


# ---------------------------------------------------------------------------
# Enums
# ---------------------------------------------------------------------------

class IntegrationMethod(str, Enum):
    """Available Runge-Kutta schemes."""

    RK4 = "rk4"
    RK45 = "rk45"


class NegativityMode(str, Enum):
    """What to do when a step drives a component below zero."""

    CLAMP = "clamp"
    REJECT = "reject"


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

class IntegratorConfig(BaseModel):
    """Scheme, step size and tolerances of one integration."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    method: IntegrationMethod = IntegrationMethod.RK45
    step_h: float = Field(DEFAULT_STEP_H, gt=0, description="RK4 substep / RK45 first trial step (h)")
    rel_tol: float = Field(DEFAULT_REL_TOL, gt=0)
    abs_tol: float = Field(DEFAULT_ABS_TOL, gt=0, description="Absolute tolerance in units of state scale")
    max_steps: int = Field(DEFAULT_MAX_STEPS, gt=0)
    negativity_mode: NegativityMode = NegativityMode.CLAMP
    grid_step: float = Field(DEFAULT_GRID_STEP, gt=0, description="Export grid step without a control signal (h)")


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------

@dataclass
class ClampReport:
    """Accounting of components set to zero after small negative excursions."""

    count: int = 0
    worst: float = 0.0          # largest clamped magnitude, in units of state scale
    total_mass: float = 0.0     # sum of clamped magnitudes, in units of state scale

    def record(self, magnitudes: np.ndarray) -> None:
        if magnitudes.size == 0:
            return
        self.count += int(magnitudes.size)
        self.worst = max(self.worst, float(magnitudes.max()))
        self.total_mass += float(magnitudes.sum())

    def merge(self, other: "ClampReport") -> None:
        self.count += other.count
        self.worst = max(self.worst, other.worst)
        self.total_mass += other.total_mass


@dataclass
class Trajectory:
    """States sampled on the control/export grid.

    ``controls[k]`` is the (u_p, u_T) pair held on [times[k], times[k+1]).
    """

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    subsystem: Optional[SubsystemId]
    state_names: Sequence[str]
    clamp: ClampReport = field(default_factory=ClampReport)
    failure: Optional[str] = None

    def __post_init__(self) -> None:
        if len(self.times) != len(self.states):
            raise ValueError("times and states must have equal length")
        if len(self.controls) != max(len(self.times) - 1, 0):
            raise ValueError("controls must hold one row per interval")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def failed(self) -> bool:
        return self.failure is not None

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.states[:, list(self.state_names).index(name)]
        except ValueError:
            raise KeyError(f"Unknown state variable: {name}")

    def state_at(self, index: int) -> StateVector:
        if tuple(self.state_names) != STATE_NAMES:
            raise TypeError("state_at is only defined for sepsis-model trajectories")
        return StateVector.from_array(self.states[index])

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.states, columns=list(self.state_names))
        frame.insert(0, "time", self.times)
        if len(self.controls):
            held = np.vstack([self.controls, self.controls[-1:]])
        else:
            held = np.zeros((len(self.times), 2))
        for j, name in enumerate(CSV_CONTROL_COLUMNS):
            frame[name] = held[:, j]
        return frame

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path


@dataclass(frozen=True)
class ReferenceProblem:
    """Test problem with a closed-form solution."""

    name: str
    rhs: Callable[[float, np.ndarray], np.ndarray]
    y0: np.ndarray
    span: tuple
    exact: Callable[[float], np.ndarray]
    grid_step: float


@dataclass
class ConvergenceReport:
    """Measured order of accuracy under step halving."""

    order: float
    saturated: bool
    steps: List[float]
    errors: List[float]
