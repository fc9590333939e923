"""
Pydantic models for pipeline configs, scenario presets and run manifests.
"""

from __future__ import annotations

import json
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from modules.bifurcation.models import ClassifyConfig, OscillationConfig, SearchConfig
from modules.bo_optimizer.models import BoConfig
from modules.control_objectives.models import ControlChannel, ObjectiveConfig, PlantKind, Scenario
from modules.errors import DomainError
from modules.integrator.models import IntegratorConfig
from modules.pipeline.config import (
    COMPARE_SEEDS,
    DATASET_SETTINGS,
    DATASET_SPREAD,
    DEFAULT_D,
    DEFAULT_OSCILLATION_HOURS,
    DEFAULT_SIM_HOURS,
    DEFAULT_STEP,
    DEFAULT_SWEEP_POINTS,
    DEFAULT_T_F,
    MANIFEST_VERSION,
    PREDICT_SETTINGS,
    PRESETS,
)
from modules.rnn_surrogate.models import RolloutMode, TrainConfig
from modules.sepsis_model.models import SubsystemId


class Command(str, Enum):
    SIMULATE = "simulate"
    BIFURCATE = "bifurcate"
    OPTIMIZE = "optimize"
    GENERATE_DATA = "generate-data"
    TRAIN = "train"
    PREDICT = "predict"
    COMPARE = "compare"


class Method(str, Enum):
    """Window optimizers compared by ``optimize`` and ``compare``."""

    IMPROVED_BO = "improved_bo"
    STANDARD_BO = "standard_bo"
    RANDOM_SEARCH = "random_search"


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

class ScenarioPreset(BaseModel):
    """A documented, frozen patient scenario."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str
    description: str = ""
    initial: List[float] = Field(..., description="Initial state in model order")
    overrides: Dict[str, float] = Field(default_factory=dict)
    objective: ObjectiveConfig
    t_f: int = Field(DEFAULT_T_F, ge=1)
    d: int = Field(DEFAULT_D, ge=1)
    step: float = Field(DEFAULT_STEP, gt=0)
    preset_hash: str = ""


# ---------------------------------------------------------------------------
# Config sections
# ---------------------------------------------------------------------------

class SettingSection(BaseModel):
    """Scenario fields; unset fields come from the preset or the defaults."""

    model_config = ConfigDict(extra="forbid")

    plant: PlantKind = PlantKind.SEPSIS
    initial: Optional[List[float]] = None
    initial_updates: Dict[str, float] = Field(default_factory=dict, description="Named components set after presets")
    overrides: Dict[str, float] = Field(default_factory=dict, description="Setting-level parameter overrides")
    scenario: Optional[Scenario] = None
    channel: Optional[ControlChannel] = None
    t_start: float = 0.0
    t_f: Optional[int] = Field(None, ge=1)
    d: Optional[int] = Field(None, ge=1)
    step: Optional[float] = Field(None, gt=0)


class SimulateSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    subsystem: SubsystemId = SubsystemId.FULL
    hours: float = Field(DEFAULT_SIM_HOURS, gt=0)
    control_file: Optional[str] = Field(None, description="(time, u_p, u_T) CSV held on its own grid")


class OscillationSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    enabled: bool = False
    param_value: Optional[float] = Field(None, description="Swept-parameter value of the long run")
    hours: float = Field(DEFAULT_OSCILLATION_HOURS, gt=0)
    grid_step: float = Field(0.5, gt=0)
    variables: List[str] = Field(default_factory=lambda: ["P", "N_b"])
    phase_planes: Optional[List[List[str]]] = None
    thresholds: OscillationConfig = Field(default_factory=OscillationConfig)


class BifurcateSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    subsystem: SubsystemId = SubsystemId.NEUTROPHIL
    param: str = "k_pg"
    range: Tuple[float, float] = (0.11, 0.35)
    n_points: int = Field(DEFAULT_SWEEP_POINTS, ge=2)
    search: SearchConfig = Field(default_factory=SearchConfig)
    classify: ClassifyConfig = Field(default_factory=ClassifyConfig)
    oscillation: OscillationSection = Field(default_factory=OscillationSection)
    selftest: bool = Field(False, description="Pitchfork diagram and Van der Pol cycle instead of the model")


class OptimizeSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    methods: List[Method] = Field(default_factory=lambda: list(Method))

    @field_validator("methods")
    @classmethod
    def _nonempty(cls, v: List[Method]) -> List[Method]:
        if not v:
            raise DomainError("at least one optimization method is required")
        return v


class CompareSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_seeds: int = Field(COMPARE_SEEDS, ge=1)


class DatasetSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_settings: int = Field(DATASET_SETTINGS, ge=1)
    spread: float = Field(DATASET_SPREAD, ge=0, lt=1, description="Relative jitter of the initial state")
    vary: Dict[str, Tuple[float, float]] = Field(default_factory=dict, description="Parameter -> sampled range")
    toy_feedback: bool = Field(False, description="Toy-plant feedback-law dataset instead of BO windows")


class ArtifactRef(BaseModel):
    """Input file with an optional pinned content hash."""

    model_config = ConfigDict(extra="forbid")

    path: str
    sha256: Optional[str] = None


class TrainSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dataset: Optional[ArtifactRef] = None
    config: TrainConfig = Field(default_factory=TrainConfig)


class PredictSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    model: Optional[ArtifactRef] = None
    n_settings: int = Field(PREDICT_SETTINGS, ge=1, description="Held-out settings sampled around the scenario")
    mode: RolloutMode = RolloutMode.CLOSED
    compare_bo: bool = Field(False, description="Also solve each held-out setting with improved BO")


class PipelineConfig(BaseModel):
    """Resolved configuration of one pipeline run."""

    model_config = ConfigDict(extra="forbid")

    seed: int = Field(0, ge=0)
    preset: Optional[str] = None
    params: Dict[str, float] = Field(default_factory=dict, description="Base parameter overrides")
    enforce_table_ranges: bool = True
    setting: SettingSection = Field(default_factory=SettingSection)
    objective: Optional[ObjectiveConfig] = None
    integrator: IntegratorConfig = Field(default_factory=IntegratorConfig)
    bo: BoConfig = Field(default_factory=lambda: BoConfig(d=DEFAULT_D))
    simulate: SimulateSection = Field(default_factory=SimulateSection)
    bifurcate: BifurcateSection = Field(default_factory=BifurcateSection)
    optimize: OptimizeSection = Field(default_factory=OptimizeSection)
    compare: CompareSection = Field(default_factory=CompareSection)
    dataset: DatasetSection = Field(default_factory=DatasetSection)
    train: TrainSection = Field(default_factory=TrainSection)
    predict: PredictSection = Field(default_factory=PredictSection)

    @field_validator("preset")
    @classmethod
    def _known_preset(cls, v: Optional[str]) -> Optional[str]:
        if v is not None and v not in PRESETS:
            raise DomainError(f"unknown preset {v!r}; choose from {sorted(PRESETS)}")
        return v

    @model_validator(mode="after")
    def _seed_everywhere(self) -> "PipelineConfig":
        # One top-level seed drives every random stream.
        if self.bo.seed != self.seed:
            self.bo = self.bo.model_copy(update={"seed": self.seed})
        if self.train.config.seed != self.seed:
            self.train.config = self.train.config.model_copy(update={"seed": self.seed})
        return self


# ---------------------------------------------------------------------------
# Manifests
# ---------------------------------------------------------------------------

class RunManifest(BaseModel):
    """Everything needed to reproduce and verify one command run."""

    model_config = ConfigDict(extra="forbid")

    manifest_version: int = MANIFEST_VERSION
    command: Command
    config: Dict[str, Any]
    seed: int
    inputs: Dict[str, str] = Field(default_factory=dict, description="Input path -> sha256")
    outputs: Dict[str, str] = Field(default_factory=dict, description="Output file name -> sha256")
    metrics: Dict[str, Any] = Field(default_factory=dict, description="Wall clock and run summaries")

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True, default=str))
        return path
