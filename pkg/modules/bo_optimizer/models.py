"""
Pydantic models and dataclasses for the optimizer, window solutions and
control datasets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from modules.bo_optimizer.config import (
    ARM_BATCH,
    DATASET_FORMAT_VERSION,
    DEFAULT_SEED,
    DEFAULT_WINDOW,
    KAPPA,
    LS_RADIUS,
    LS_SHRINK,
    LS_STEPS,
    N_ARMS,
    N_INIT,
    N_ITER,
    PARALLEL_EVAL,
    RS_BATCH,
    UCB_EXPLORATION,
)


class HyperPolicy(str, Enum):
    """How GP hyperparameters are chosen at each fit."""

    GRID = "grid"
    FIXED = "fixed"


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

class LocalSearchConfig(BaseModel):
    """Coordinate-wise stochastic descent after the BO rounds."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    enabled: bool = True
    radius: float = Field(LS_RADIUS, gt=0, le=1, description="Initial unit-box perturbation")
    steps: int = Field(LS_STEPS, ge=0, description="Objective evaluations")
    shrink: float = Field(LS_SHRINK, gt=0, lt=1, description="Radius factor after a fully rejected sweep")


class BoConfig(BaseModel):
    """Budget and proposal settings of the improved BO loop."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    d: int = Field(DEFAULT_WINDOW, ge=1, description="Window length in control intervals")
    n_init: int = Field(N_INIT, ge=2, description="Seeded random evaluations")
    n_iter: int = Field(N_ITER, ge=0, description="BO rounds")
    kappa: float = Field(KAPPA, ge=0, description="LCB exploration weight")
    n_arms: int = Field(N_ARMS, ge=1, description="Cells of the bandit partition")
    arm_batch: int = Field(ARM_BATCH, ge=1, description="Candidates drawn through the bandit")
    rs_batch: int = Field(RS_BATCH, ge=1, description="Uniform random candidates")
    ucb_exploration: float = Field(UCB_EXPLORATION, ge=0)
    local_search: LocalSearchConfig = Field(default_factory=LocalSearchConfig)
    hyper_policy: HyperPolicy = HyperPolicy.GRID
    seed: int = DEFAULT_SEED
    parallel_eval: int = Field(PARALLEL_EVAL, ge=1, description="Concurrent objective evaluations")

    @classmethod
    def standard(cls, **kwargs: Any) -> "BoConfig":
        """Plain BO: a single bandit cell and no local search."""
        kwargs.setdefault("n_arms", 1)
        kwargs.setdefault("local_search", LocalSearchConfig(enabled=False))
        return cls(**kwargs)

    @property
    def budget(self) -> int:
        """Evaluations including the local-search allowance."""
        extra = self.local_search.steps if self.local_search.enabled else 0
        return self.n_init + self.n_iter + extra


# ---------------------------------------------------------------------------
# Optimizer results
# ---------------------------------------------------------------------------

@dataclass
class GpHyper:
    length_scale: float
    signal_variance: float
    noise_variance: float


@dataclass
class CandidateSet:
    """Proposed points, their acquisition values and the chosen minimizer."""

    points: np.ndarray
    acquisition: np.ndarray
    arms: np.ndarray
    chosen: int

    @property
    def x_star(self) -> np.ndarray:
        return self.points[self.chosen]

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class BoResult:
    """Evaluation history of one box minimization."""

    x_best: np.ndarray
    f_best: float
    X: np.ndarray
    y: np.ndarray
    incumbent: List[float]
    n_init: int
    n_iter: int
    n_local: int

    @property
    def n_evals(self) -> int:
        return len(self.y)


@dataclass
class WindowSolution:
    """Best control window found from one start state."""

    window_start: int
    control_window: np.ndarray          # (d, 2) rows of (u_p, u_T)
    objective: float
    eval_count: int
    start_state: np.ndarray
    history: List[float] = field(default_factory=list)
    incumbent: List[float] = field(default_factory=list)

    @property
    def first_row(self) -> np.ndarray:
        return self.control_window[0]


@dataclass
class RecedingHorizonResult:
    """Full-horizon control stitched from sliding windows."""

    setting_id: str
    windows: List[WindowSolution]
    control_rows: np.ndarray            # (t_f, 2)
    objective: Optional[float] = None
    trajectory: Any = None
    wall_time: float = 0.0

    @property
    def eval_count(self) -> int:
        return sum(w.eval_count for w in self.windows)


# ---------------------------------------------------------------------------
# Dataset
# ---------------------------------------------------------------------------

class DatasetRecord(BaseModel):
    """One (state at window start -> control window) pair."""

    model_config = ConfigDict(extra="forbid")

    setting_id: str
    window_start: int = Field(..., ge=0)
    state: List[float]
    param_overrides: Dict[str, float] = Field(default_factory=dict)
    control: List[List[float]]
    objective: float
    seed: int


class DatasetHeader(BaseModel):
    """First line of a dataset file."""

    model_config = ConfigDict(extra="forbid")

    format_version: int = DATASET_FORMAT_VERSION
    config_hash: str
    seed: int
    plant: str
    scenario: str
    channel: str
    aggregation: str
    t_start: float
    step: float
    t_f: int
    d: int
    n_settings: int
    objective: Dict[str, Any] = Field(default_factory=dict)
    integrator: Dict[str, Any] = Field(default_factory=dict)
    base_params: Dict[str, float] = Field(default_factory=dict, description="Parameters the overrides apply to")
    partial: Dict[str, int] = Field(default_factory=dict, description="setting_id -> windows completed before failure")

    @property
    def expected_records(self) -> int:
        return self.n_settings * (self.t_f - self.d + 1)


@dataclass
class ControlDataset:
    header: DatasetHeader
    records: List[DatasetRecord]

    @property
    def complete(self) -> bool:
        return not self.header.partial and len(self.records) == self.header.expected_records

    def __len__(self) -> int:
        return len(self.records)
