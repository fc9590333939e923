"""
Pydantic models and dataclasses for equilibria, bifurcation diagrams and
oscillation reports.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from modules.bifurcation.config import (
    DEDUP_RADIUS,
    DEFAULT_SEED,
    FD_EPS,
    MAX_ITER,
    N_STARTS,
    NEWTON_TOL,
    OSCILLATION_FLOOR,
    REFINE_FRACTION,
    STABILITY_MARGIN,
    START_BOX,
    SUSTAIN_THRESHOLD,
)
from modules.errors import DomainError
from modules.sepsis_model.config import STATE_NAMES
from modules.sepsis_model.models import StateVector


class Stability(str, Enum):
    """Linear stability of an equilibrium."""

    STABLE = "stable"
    UNSTABLE = "unstable"
    MARGINAL = "marginal"


# ---------------------------------------------------------------------------
# Search settings
# ---------------------------------------------------------------------------

class SearchConfig(BaseModel):
    """Multi-start root search over a box of scaled coordinates."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_starts: int = Field(N_STARTS, ge=0, description="Low-discrepancy starting points")
    start_box: Tuple[float, float] = Field(START_BOX, description="(low, high) in units of the component scales")
    newton_tol: float = Field(NEWTON_TOL, gt=0, description="Max scaled residual of an accepted root")
    max_iter: int = Field(MAX_ITER, ge=1)
    dedup_radius: float = Field(DEDUP_RADIUS, gt=0, description="Scaled distance below which roots merge")
    seed: int = DEFAULT_SEED

    @model_validator(mode="after")
    def _check_box(self) -> "SearchConfig":
        if not self.start_box[0] < self.start_box[1]:
            raise DomainError(f"start_box must satisfy low < high, got {self.start_box}")
        return self


class ClassifyConfig(BaseModel):
    """Jacobian step and stability margin."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    fd_eps: float = Field(FD_EPS, gt=0, description="Central-difference step in scaled units")
    margin: float = Field(STABILITY_MARGIN, ge=0, description="Dead band around zero for the leading real part")
    refine_fraction: float = Field(REFINE_FRACTION, gt=0, lt=1, description="Bisection stop width / swept width")


class OscillationConfig(BaseModel):
    """Thresholds of the limit-cycle verdict."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    floor: float = Field(OSCILLATION_FLOOR, ge=0, description="Amplitude floor as a fraction of the scale")
    sustain_threshold: float = Field(SUSTAIN_THRESHOLD, gt=0, description="Min last/previous cycle amplitude")


# ---------------------------------------------------------------------------
# Systems
# ---------------------------------------------------------------------------

@dataclass
class DynamicalSystem:
    """Autonomous system y' = rhs(y) as seen by the numerical analysis layer.

    ``active`` selects the coordinates the root search and the Jacobian act
    on; inactive coordinates keep their template values. ``seeds`` are
    full-length states tried before the low-discrepancy starts.
    """

    name: str
    state_names: Tuple[str, ...]
    rhs: Callable[[np.ndarray], np.ndarray]
    scales: np.ndarray
    active: np.ndarray
    template: np.ndarray
    seeds: List[np.ndarray] = field(default_factory=list)
    nonnegative: bool = True
    sort_index: int = 0

    def __post_init__(self) -> None:
        n = len(self.state_names)
        self.scales = np.asarray(self.scales, dtype=float)
        self.active = np.asarray(self.active, dtype=bool)
        self.template = np.asarray(self.template, dtype=float)
        if self.scales.shape != (n,) or self.active.shape != (n,) or self.template.shape != (n,):
            raise ValueError(f"{self.name}: scales, active and template need {n} entries")

    @property
    def dim(self) -> int:
        return len(self.state_names)

    @property
    def active_indices(self) -> np.ndarray:
        return np.flatnonzero(self.active)

    def index(self, name: str) -> int:
        try:
            return self.state_names.index(name)
        except ValueError:
            raise DomainError(f"Unknown state variable for {self.name}: {name}")

    def embed(self, z: np.ndarray) -> np.ndarray:
        """Full state from scaled active coordinates."""
        y = self.template.copy()
        idx = self.active_indices
        y[idx] = np.asarray(z, dtype=float) * self.scales[idx]
        return y

    def project(self, y: np.ndarray) -> np.ndarray:
        """Scaled active coordinates of a full state."""
        idx = self.active_indices
        return np.asarray(y, dtype=float)[idx] / self.scales[idx]

    def scaled_residual(self, z: np.ndarray) -> np.ndarray:
        idx = self.active_indices
        return self.rhs(self.embed(z))[idx] / self.scales[idx]


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------

@dataclass
class Equilibrium:
    """A fixed point at one parameter value."""

    param_value: float
    state: np.ndarray
    state_names: Tuple[str, ...]
    residual_norm: float
    stability: Optional[Stability] = None
    leading_real_part: Optional[float] = None
    eigenvalues: Optional[np.ndarray] = None

    def component(self, name: str) -> float:
        return float(self.state[list(self.state_names).index(name)])

    def as_state_vector(self) -> StateVector:
        if tuple(self.state_names) != STATE_NAMES:
            raise TypeError("only sepsis-model equilibria convert to StateVector")
        return StateVector.from_array(np.maximum(self.state, 0.0))


@dataclass
class BifurcationBracket:
    """Adjacent parameter values whose equilibrium structure differs."""

    low: float
    high: float
    estimate: float
    before: Tuple[str, ...]
    after: Tuple[str, ...]


@dataclass
class BifurcationDiagram:
    """Equilibria of one subsystem across a parameter grid."""

    subsystem: str
    param_name: str
    grid: np.ndarray
    equilibria: List[List[Equilibrium]]
    detected_bifurcations: List[float] = field(default_factory=list)
    brackets: List[BifurcationBracket] = field(default_factory=list)

    def branch_counts(self) -> List[int]:
        return [len(point) for point in self.equilibria]

    def stabilities(self) -> set:
        return {eq.stability for point in self.equilibria for eq in point}

    def distance_to(self, locus: float) -> Optional[float]:
        """Distance from the closest detected bifurcation to a reference value."""
        if not self.detected_bifurcations:
            return None
        return float(min(abs(b - locus) for b in self.detected_bifurcations))

    def to_frame(self) -> pd.DataFrame:
        rows: List[Dict[str, Any]] = []
        for point in self.equilibria:
            for branch_id, eq in enumerate(point):
                row: Dict[str, Any] = {"param_value": eq.param_value, "branch_id": branch_id}
                row.update({name: float(v) for name, v in zip(eq.state_names, eq.state)})
                row["stability"] = eq.stability.value if eq.stability else ""
                row["leading_real_part"] = eq.leading_real_part
                row["residual_norm"] = eq.residual_norm
                rows.append(row)
        return pd.DataFrame(rows)

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path

    def to_dict(self) -> Dict[str, Any]:
        return {
            "subsystem": self.subsystem,
            "param_name": self.param_name,
            "grid": [float(v) for v in self.grid],
            "branch_counts": self.branch_counts(),
            "detected_bifurcations": [float(v) for v in self.detected_bifurcations],
            "brackets": [
                {"low": b.low, "high": b.high, "estimate": b.estimate,
                 "before": list(b.before), "after": list(b.after)}
                for b in self.brackets
            ],
            "points": [
                {
                    "param_value": float(value),
                    "branches": [
                        {
                            "state": {n: float(v) for n, v in zip(eq.state_names, eq.state)},
                            "stability": eq.stability.value if eq.stability else None,
                            "leading_real_part": eq.leading_real_part,
                            "residual_norm": eq.residual_norm,
                        }
                        for eq in point
                    ],
                }
                for value, point in zip(self.grid, self.equilibria)
            ],
        }

    def to_json(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2))
        return path


@dataclass
class VariableOscillation:
    """Peak-to-peak analysis of one component."""

    name: str
    oscillating: bool
    amplitude: float
    decay_ratio: Optional[float]
    period: Optional[float]
    n_peaks: int


@dataclass
class LimitCycleReport:
    """Sustained-oscillation verdict over the trailing half of a trajectory."""

    oscillating: bool
    amplitudes: Dict[str, float]
    period: Optional[float]
    amplitude_decay_ratio: Optional[float]
    variables: Dict[str, VariableOscillation]
    low_confidence: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "oscillating": self.oscillating,
            "period": self.period,
            "amplitude_decay_ratio": self.amplitude_decay_ratio,
            "low_confidence": self.low_confidence,
            "variables": {
                name: {
                    "oscillating": v.oscillating,
                    "amplitude": v.amplitude,
                    "decay_ratio": v.decay_ratio,
                    "period": v.period,
                    "n_peaks": v.n_peaks,
                }
                for name, v in self.variables.items()
            },
        }


@dataclass
class VerificationResult:
    """Outcome of re-integrating a perturbed equilibrium."""

    stability: Stability
    max_deviation: float
    final_deviation: float
    consistent: bool

    @classmethod
    def judge(cls, stability: Stability, deviations: Sequence[float],
              stable_tol: float, departure: float) -> "VerificationResult":
        deviations = np.asarray(deviations, dtype=float)
        max_dev = float(np.max(deviations))
        if stability is Stability.STABLE:
            consistent = max_dev <= stable_tol
        elif stability is Stability.UNSTABLE:
            consistent = max_dev > departure
        else:
            consistent = True
        return cls(stability, max_dev, float(deviations[-1]), consistent)
