"""
Pydantic models and enums for control signals, objectives and scenarios.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from modules.control_objectives.config import (
    CHANNEL_COLUMNS,
    DEFAULT_AGGREGATION,
    DEFAULT_CONTROL_STEP,
    DEFAULT_HORIZON,
    DEFAULT_W1,
    DEFAULT_W2,
    EPSILON_FLOOR,
    SCENARIO_CHANNEL,
    TOY_STATE_NAMES,
)
from modules.errors import ConfigError, DomainError
from modules.sepsis_model.config import PARAMETER_NAMES, STATE_DIM


# ---------------------------------------------------------------------------
# Enums
# ---------------------------------------------------------------------------

class ControlChannel(str, Enum):
    """Which treatment controls a signal drives."""

    U_P = "u_p"
    U_T = "u_T"
    BOTH = "both"

    @property
    def columns(self) -> Tuple[int, ...]:
        if self is ControlChannel.BOTH:
            return (0, 1)
        return (CHANNEL_COLUMNS[self.value],)


class Scenario(str, Enum):
    """The two inflammatory situations under control."""

    PATHOGEN = "pathogen"
    TNF = "tnf"

    @property
    def channel(self) -> ControlChannel:
        return ControlChannel(SCENARIO_CHANNEL[self.value])


class Aggregation(str, Enum):
    """How the instantaneous objective is reduced over a horizon."""

    TERMINAL = "terminal"
    INTEGRAL = "integral"


class PlantKind(str, Enum):
    """Dynamics a scenario runs on."""

    SEPSIS = "sepsis"
    TOY_LINEAR = "toy_linear"

    @property
    def state_dim(self) -> int:
        return STATE_DIM if self is PlantKind.SEPSIS else len(TOY_STATE_NAMES)


# ---------------------------------------------------------------------------
# Control signal
# ---------------------------------------------------------------------------

Bounds = Tuple[float, float]


class ControlSignal(BaseModel):
    """Piecewise-constant controls on a uniform grid.

    ``u_p[k]`` and ``u_T[k]`` are held on [t_start + k*step, t_start + (k+1)*step).
    A channel not driven by the signal holds its lower bound.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    t_start: float = Field(0.0, description="First grid time (h)")
    step: float = Field(DEFAULT_CONTROL_STEP, gt=0, description="Grid spacing (h)")
    u_p: List[float] = Field(default_factory=list, description="Antibiotic control per interval")
    u_T: List[float] = Field(default_factory=list, description="Anti-TNF control per interval")
    channel: ControlChannel = ControlChannel.BOTH
    p_bounds: Bounds = (0.0, 1.0)
    T_bounds: Bounds = (0.0, 1.0)

    @model_validator(mode="after")
    def _check_values(self) -> "ControlSignal":
        if len(self.u_p) != len(self.u_T):
            raise DomainError("u_p and u_T must have the same number of intervals")
        for name, values, (lo, hi) in (("u_p", self.u_p, self.p_bounds), ("u_T", self.u_T, self.T_bounds)):
            if not 0.0 <= lo <= hi <= 1.0:
                raise DomainError(f"{name} bounds must satisfy 0 <= lower <= upper <= 1")
            bad = [v for v in values if not lo <= v <= hi]
            if bad:
                raise DomainError(f"{len(bad)} {name} values outside [{lo}, {hi}], e.g. {bad[0]}")
        return self

    # -- construction -------------------------------------------------------

    @classmethod
    def from_array(
        cls,
        rows: Any,
        t_start: float = 0.0,
        step: float = DEFAULT_CONTROL_STEP,
        channel: ControlChannel = ControlChannel.BOTH,
        p_bounds: Bounds = (0.0, 1.0),
        T_bounds: Bounds = (0.0, 1.0),
        validate: bool = True,
    ) -> "ControlSignal":
        """Build from an (n_intervals, 2) array; ``validate=False`` skips the bound check."""
        arr = np.asarray(rows, dtype=float).reshape(-1, 2)
        data = dict(
            t_start=float(t_start),
            step=float(step),
            u_p=[float(v) for v in arr[:, 0]],
            u_T=[float(v) for v in arr[:, 1]],
            channel=ControlChannel(channel),
            p_bounds=tuple(p_bounds),
            T_bounds=tuple(T_bounds),
        )
        return cls(**data) if validate else cls.model_construct(**data)

    @classmethod
    def constant(
        cls,
        n_intervals: int,
        u_p: float = 0.0,
        u_T: float = 0.0,
        **kwargs: Any,
    ) -> "ControlSignal":
        rows = np.tile([u_p, u_T], (n_intervals, 1))
        return cls.from_array(rows, **kwargs)

    # -- views --------------------------------------------------------------

    @property
    def n_intervals(self) -> int:
        return len(self.u_p)

    @property
    def t_end(self) -> float:
        return self.t_start + self.step * self.n_intervals

    def grid(self) -> np.ndarray:
        return self.t_start + self.step * np.arange(self.n_intervals + 1, dtype=float)

    def as_array(self) -> np.ndarray:
        return np.column_stack([np.asarray(self.u_p, dtype=float), np.asarray(self.u_T, dtype=float)]).reshape(-1, 2)

    def bounds_array(self) -> np.ndarray:
        """2x2 array: row 0 lower bounds, row 1 upper bounds, columns (u_p, u_T)."""
        return np.array([[self.p_bounds[0], self.T_bounds[0]], [self.p_bounds[1], self.T_bounds[1]]])

    def to_frame(self) -> pd.DataFrame:
        rows = self.as_array()
        held = np.vstack([rows, rows[-1:]]) if len(rows) else np.zeros((1, 2))
        return pd.DataFrame({"time": self.grid(), "u_p": held[:, 0], "u_T": held[:, 1]})

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path

    @classmethod
    def from_csv(cls, path: Union[str, Path], **kwargs: Any) -> "ControlSignal":
        """Read a (time, u_p, u_T) CSV; the last row only closes the grid."""
        path = Path(path)
        try:
            frame = pd.read_csv(path)
        except FileNotFoundError:
            raise ConfigError(f"Control file not found: {path}")
        missing = {"time", "u_p", "u_T"} - set(frame.columns)
        if missing:
            raise ConfigError(f"Control file {path} lacks columns: {sorted(missing)}")
        times = frame["time"].to_numpy(dtype=float)
        if len(times) < 2:
            raise ConfigError(f"Control file {path} needs at least two grid times")
        steps = np.diff(times)
        if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
            raise ConfigError(f"Control file {path} must have a uniform increasing time grid")
        rows = frame[["u_p", "u_T"]].to_numpy(dtype=float)[:-1]
        return cls.from_array(rows, t_start=times[0], step=float(steps[0]), **kwargs)


# ---------------------------------------------------------------------------
# Objective and scenario
# ---------------------------------------------------------------------------

class ObjectiveConfig(BaseModel):
    """Scenario objective and its aggregation over the horizon."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    scenario: Scenario = Scenario.PATHOGEN
    w1: float = Field(DEFAULT_W1, ge=0, description="Weight of M1/M2 (pathogen scenario)")
    w2: float = Field(DEFAULT_W2, ge=0, description="Weight of CD8/CD4 (pathogen scenario)")
    epsilon_floor: float = Field(EPSILON_FLOOR, gt=0, description="Denominator guard")
    aggregation: Aggregation = Aggregation(DEFAULT_AGGREGATION)
    horizon: Tuple[float, float] = DEFAULT_HORIZON

    @model_validator(mode="after")
    def _check(self) -> "ObjectiveConfig":
        if self.scenario is Scenario.PATHOGEN and self.w1 == 0 and self.w2 == 0:
            raise DomainError("w1 and w2 cannot both be zero")
        if self.horizon[1] < self.horizon[0]:
            raise DomainError(f"horizon end precedes start: {self.horizon}")
        return self


class ScenarioSetting(BaseModel):
    """A system value setting: initial state plus parameter overrides."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    setting_id: str = "setting-0"
    plant: PlantKind = PlantKind.SEPSIS
    initial: List[float] = Field(..., description="Initial state in plant order")
    overrides: Dict[str, float] = Field(default_factory=dict, description="Parameter overrides")
    scenario: Scenario = Scenario.PATHOGEN
    channel: Optional[ControlChannel] = Field(None, description="Controlled channel; scenario default if unset")
    t_start: float = 0.0
    t_f: int = Field(..., ge=0, description="Number of control intervals in the horizon")
    d: int = Field(..., ge=1, description="Window length in intervals")
    step: float = Field(DEFAULT_CONTROL_STEP, gt=0)

    @field_validator("initial")
    @classmethod
    def _nonnegative_finite(cls, v: List[float]) -> List[float]:
        if not all(np.isfinite(x) for x in v):
            raise DomainError("initial state must be finite")
        return [float(x) for x in v]

    @model_validator(mode="after")
    def _check(self) -> "ScenarioSetting":
        if len(self.initial) != self.plant.state_dim:
            raise DomainError(
                f"{self.plant.value} plant needs {self.plant.state_dim} initial values, got {len(self.initial)}"
            )
        if self.plant is PlantKind.SEPSIS:
            if any(x < 0 for x in self.initial):
                raise DomainError("sepsis initial state must be nonnegative")
            unknown = sorted(set(self.overrides) - set(PARAMETER_NAMES))
            if unknown:
                raise DomainError(f"unknown parameter overrides: {unknown}")
        if self.d > self.t_f and self.t_f > 0:
            raise DomainError(f"window length d={self.d} exceeds horizon t_f={self.t_f}")
        return self

    @property
    def control_channel(self) -> ControlChannel:
        return self.channel or self.scenario.channel

    @property
    def t_end(self) -> float:
        return self.t_start + self.step * self.t_f

    @property
    def n_windows(self) -> int:
        return self.t_f - self.d + 1

    def initial_array(self) -> np.ndarray:
        return np.asarray(self.initial, dtype=float)


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------

@dataclass
class ObjectiveResult:
    """Objective of one controlled run."""

    value: float
    times: np.ndarray
    instantaneous: np.ndarray
    accumulated: np.ndarray
    trajectory: Any = None

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "time": self.times,
            "objective": self.instantaneous,
            "accumulated": self.accumulated,
        })
