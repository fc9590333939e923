"""
Pydantic models and dataclasses for the recurrent control predictor.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from modules.rnn_surrogate.config import (
    BATCH_SIZE,
    CLIP_NORM,
    DEFAULT_HIDDEN,
    DEFAULT_SEED,
    EPOCHS,
    LEARNING_RATE,
    MOMENTUM,
    PARAM_NAMES,
    PATIENCE,
    TRAIN_SPLIT,
)


class OptimizerKind(str, Enum):
    SGD_MOMENTUM = "sgd_momentum"
    ADAM = "adam"


class RolloutMode(str, Enum):
    """CLOSED re-predicts at every interval; OPEN applies whole windows."""

    CLOSED = "closed"
    OPEN = "open"


class TrainConfig(BaseModel):
    """Optimizer, budget and split of one training run."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    hidden: int = Field(DEFAULT_HIDDEN, ge=1, description="Hidden units of the recurrent cell")
    epochs: int = Field(EPOCHS, ge=1)
    learning_rate: float = Field(LEARNING_RATE, gt=0)
    batch_size: int = Field(BATCH_SIZE, ge=1)
    optimizer: OptimizerKind = OptimizerKind.ADAM
    momentum: float = Field(MOMENTUM, ge=0, lt=1)
    train_split: float = Field(TRAIN_SPLIT, gt=0, lt=1, description="Fraction of pairs used for training")
    seed: int = DEFAULT_SEED
    patience: int = Field(PATIENCE, ge=1, description="Epochs without validation improvement before stopping")
    clip_norm: Optional[float] = Field(CLIP_NORM, gt=0, description="Global gradient-norm cap; None disables")


@dataclass
class TrainReport:
    """Per-epoch losses; index 0 holds the losses of the initial weights."""

    train_loss: List[float]
    val_loss: List[float]
    epoch_seconds: List[float]
    best_epoch: int
    stopped_early: bool = False
    n_train: int = 0
    n_val: int = 0

    @property
    def final_val_mse(self) -> float:
        return self.val_loss[self.best_epoch]

    @property
    def epochs_run(self) -> int:
        return len(self.train_loss) - 1

    def to_dict(self) -> Dict[str, Any]:
        return {
            "train_loss": self.train_loss,
            "val_loss": self.val_loss,
            "epoch_seconds": self.epoch_seconds,
            "best_epoch": self.best_epoch,
            "final_val_mse": self.final_val_mse,
            "stopped_early": self.stopped_early,
            "n_train": self.n_train,
            "n_val": self.n_val,
        }


def param_shapes(in_dim: int, hidden: int, out_dim: int) -> Dict[str, Tuple[int, ...]]:
    return {
        "W_x": (hidden, in_dim),
        "b_x": (hidden,),
        "W_h": (hidden, hidden),
        "b_h": (hidden,),
        "W_y": (out_dim, hidden),
        "b_y": (out_dim,),
    }


def param_count(in_dim: int, hidden: int, out_dim: int) -> int:
    """(in + 1) h + (h + 1) h + (h + 1) out"""
    return (in_dim + 1) * hidden + (hidden + 1) * hidden + (hidden + 1) * out_dim


@dataclass
class RnnModel:
    """Elman network mapping a system value setting to a control window.

    Inputs are the plant state divided by its scales followed by the
    parameter overrides in ``override_keys`` order, standardized with the
    training statistics. Each of the ``d`` steps emits one logistic output
    per controlled channel, rescaled to the channel bounds.
    """

    in_dim: int
    hidden: int
    out_dim: int
    d: int
    weights: Dict[str, np.ndarray]
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    bounds: np.ndarray                  # 2x2, rows (lower, upper), columns (u_p, u_T)
    channels: Tuple[int, ...]
    plant: str
    scenario: str
    channel: str
    step: float = 1.0
    override_keys: List[str] = field(default_factory=list)
    override_defaults: Dict[str, float] = field(default_factory=dict)
    base_params: Dict[str, float] = field(default_factory=dict)
    objective: Dict[str, Any] = field(default_factory=dict)
    integrator: Dict[str, Any] = field(default_factory=dict)

    @property
    def n_params(self) -> int:
        return param_count(self.in_dim, self.hidden, self.out_dim)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.weights[name].ravel() for name in PARAM_NAMES])

    def set_flat(self, theta: np.ndarray) -> None:
        shapes = param_shapes(self.in_dim, self.hidden, self.out_dim)
        offset = 0
        for name in PARAM_NAMES:
            size = int(np.prod(shapes[name]))
            self.weights[name] = np.asarray(theta[offset:offset + size], dtype=float).reshape(shapes[name]).copy()
            offset += size

    def copy(self) -> "RnnModel":
        clone = RnnModel(**{k: getattr(self, k) for k in self.__dataclass_fields__})
        clone.weights = {k: v.copy() for k, v in self.weights.items()}
        return clone


@dataclass
class RolloutResult:
    """Controls and trajectory produced by the predictor over a horizon."""

    control: Optional[Any]              # ControlSignal over the completed intervals
    trajectory: Any
    objective: Optional[float]
    wall_time: float
    mode: RolloutMode = RolloutMode.CLOSED
    predictions: int = 0
    failure: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.failure is not None
