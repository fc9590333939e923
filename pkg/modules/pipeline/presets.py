"""
Scenario presets and the resolution of a pipeline config into concrete
parameter sets and scenario settings.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from modules.bo_optimizer.dataset import config_hash
from modules.bo_optimizer.models import BoConfig
from modules.control_objectives.models import ObjectiveConfig, PlantKind, Scenario, ScenarioSetting
from modules.errors import ConfigError, DomainError
from modules.integrator.models import Trajectory
from modules.pipeline.config import (
    DEFAULT_D,
    DEFAULT_STEP,
    DEFAULT_T_F,
    PATHOGEN_CLEARED_RATIO,
    PATHOGEN_HIGH_RATIO,
    PRESET_REFERENCE_SCALES,
    PRESETS,
    TNF_COLLAPSE_RATIO,
    TNF_PERSIST_FACTOR,
    TRAILING_FRACTION,
)
from modules.pipeline.models import PipelineConfig, ScenarioPreset
from modules.sepsis_model.config import STATE_INDEX
from modules.sepsis_model.dynamics import boundary_equilibrium
from modules.sepsis_model.models import ParameterSet, SubsystemId
from modules.sepsis_model.parameters import with_overrides

logger = logging.getLogger(__name__)

RESTING_POOLS = ("M_kf", "N_R", "M_R")


def get_preset_spec(name: str) -> Dict:
    if name not in PRESETS:
        raise ConfigError(f"Unknown preset: {name}; choose from {sorted(PRESETS)}")
    return PRESETS[name]


def preset_params(name: str, base: Optional[ParameterSet] = None) -> ParameterSet:
    spec = get_preset_spec(name)
    return with_overrides(base or ParameterSet(), {**PRESET_REFERENCE_SCALES, **spec["overrides"]})


def build_preset(name: str, base: Optional[ParameterSet] = None) -> ScenarioPreset:
    """Frozen preset: initial state derived from the parameter set, pinned by hash."""
    spec = get_preset_spec(name)
    params = preset_params(name, base)
    y0 = boundary_equilibrium(SubsystemId.FULL, params)
    y0[STATE_INDEX["P"]] = spec["pathogen_fraction"] * params.P_inf
    for pool in RESTING_POOLS:
        y0[STATE_INDEX[pool]] *= spec["pool_factor"]
    for component, value in spec["initial_updates"].items():
        y0[STATE_INDEX[component]] = value

    fields = dict(
        name=name,
        description=spec["description"],
        initial=[float(v) for v in y0],
        overrides={**PRESET_REFERENCE_SCALES, **spec["overrides"]},
        objective=ObjectiveConfig(scenario=Scenario(spec["scenario"])),
        t_f=DEFAULT_T_F,
        d=DEFAULT_D,
        step=DEFAULT_STEP,
    )
    payload = {k: (v.model_dump(mode="json") if isinstance(v, ObjectiveConfig) else v) for k, v in fields.items()}
    return ScenarioPreset(**fields, preset_hash=config_hash(payload))


# ---------------------------------------------------------------------------
# Config resolution
# ---------------------------------------------------------------------------

def resolve_params(cfg: PipelineConfig) -> ParameterSet:
    """Base parameters: defaults, then the preset's overrides, then ``cfg.params``."""
    params = preset_params(cfg.preset) if cfg.preset else ParameterSet()
    return with_overrides(params, cfg.params, enforce_table_ranges=cfg.enforce_table_ranges)


def resolve_objective(cfg: PipelineConfig, preset: Optional[ScenarioPreset] = None) -> ObjectiveConfig:
    if cfg.objective is not None:
        objective = cfg.objective
    elif preset is not None:
        objective = preset.objective
    else:
        objective = ObjectiveConfig()
    if cfg.setting.scenario is not None and cfg.setting.scenario is not objective.scenario:
        objective = objective.model_copy(update={"scenario": cfg.setting.scenario})
    return objective


def resolve_setting(cfg: PipelineConfig, params: Optional[ParameterSet] = None) -> ScenarioSetting:
    """The scenario setting a run operates on."""
    section = cfg.setting
    preset = build_preset(cfg.preset) if cfg.preset else None
    if section.plant is PlantKind.TOY_LINEAR and preset is not None:
        raise ConfigError("presets describe the sepsis model; drop the preset for the toy plant")

    if section.initial is not None:
        initial = np.asarray(section.initial, dtype=float)
    elif preset is not None:
        initial = np.asarray(preset.initial, dtype=float)
    elif section.plant is PlantKind.SEPSIS:
        initial = boundary_equilibrium(SubsystemId.FULL, params or resolve_params(cfg))
    else:
        raise ConfigError("the toy plant needs setting.initial")
    if section.initial_updates:
        if section.plant is not PlantKind.SEPSIS:
            raise ConfigError("initial_updates names sepsis state components")
        unknown = sorted(set(section.initial_updates) - set(STATE_INDEX))
        if unknown:
            raise ConfigError(f"Unknown state components in initial_updates: {unknown}")
        for name, value in section.initial_updates.items():
            initial[STATE_INDEX[name]] = value

    objective = resolve_objective(cfg, preset)
    return ScenarioSetting(
        setting_id=cfg.preset or "setting-0",
        plant=section.plant,
        initial=[float(v) for v in initial],
        overrides=dict(section.overrides),
        scenario=objective.scenario,
        channel=section.channel,
        t_start=section.t_start,
        t_f=section.t_f or (preset.t_f if preset else DEFAULT_T_F),
        d=section.d or (preset.d if preset else DEFAULT_D),
        step=section.step or (preset.step if preset else DEFAULT_STEP),
    )


def bo_for(cfg: PipelineConfig, setting: ScenarioSetting, seed: Optional[int] = None) -> BoConfig:
    """The configured optimizer, sized to the setting's window."""
    update = {"d": setting.d}
    if seed is not None:
        update["seed"] = seed
    return cfg.bo.model_copy(update=update)


def sample_settings(
    setting: ScenarioSetting,
    n: int,
    spread: float,
    vary: Mapping[str, Tuple[float, float]],
    rng: np.random.Generator,
    prefix: str = "setting",
) -> List[ScenarioSetting]:
    """``n`` settings around ``setting``: every initial component scaled by a
    factor in [1 - spread, 1 + spread] and each varied parameter drawn
    uniformly from its range."""
    for name, (lo, hi) in vary.items():
        if not lo <= hi:
            raise DomainError(f"range of {name} must satisfy low <= high, got ({lo}, {hi})")
    x0 = setting.initial_array()
    out: List[ScenarioSetting] = []
    for i in range(n):
        factors = rng.uniform(1.0 - spread, 1.0 + spread, len(x0))
        overrides = dict(setting.overrides)
        for name in sorted(vary):
            lo, hi = vary[name]
            overrides[name] = float(rng.uniform(lo, hi))
        out.append(setting.model_copy(update={
            "setting_id": f"{prefix}-{i}",
            "initial": [float(v) for v in x0 * factors],
            "overrides": overrides,
        }))
    return out


# ---------------------------------------------------------------------------
# Phenotypes
# ---------------------------------------------------------------------------

def _trailing_mean(x: np.ndarray) -> float:
    tail = max(1, int(round(len(x) * TRAILING_FRACTION)))
    return float(np.mean(x[-tail:]))


def phenotype_check(preset: Optional[str], traj: Trajectory) -> Dict[str, object]:
    """Qualitative comparison of an uncontrolled run with its preset's description."""
    if preset is None or "P" not in traj.state_names or "T" not in traj.state_names:
        return {}
    P, T = traj.column("P"), traj.column("T")
    p_ratio = float(P[-1] / P[0]) if P[0] > 0 else float("inf")
    t_trailing = _trailing_mean(T)
    summary: Dict[str, object] = {
        "preset": preset,
        "P_final_over_initial": p_ratio,
        "T_initial": float(T[0]),
        "T_peak": float(np.max(T)),
        "T_trailing_mean": t_trailing,
    }
    if preset == "pathogen-high":
        collapsed = t_trailing <= TNF_COLLAPSE_RATIO * max(float(np.max(T)), 1e-300)
        summary["reproduced"] = bool(p_ratio >= PATHOGEN_HIGH_RATIO and collapsed)
    elif preset == "tnf-persistent":
        persistent = T[0] > 0 and t_trailing > TNF_PERSIST_FACTOR * T[0]
        summary["reproduced"] = bool(p_ratio <= PATHOGEN_CLEARED_RATIO and persistent)
    if not summary.get("reproduced", True):
        logger.warning("Preset %s did not show its phenotype: %s", preset, summary)
    return summary



# ---------------------------------------------------------------------------
# Resolved run
# ---------------------------------------------------------------------------

@dataclass
class ResolvedRun:
    params: ParameterSet
    setting: ScenarioSetting
    objective: ObjectiveConfig
    preset: Optional[ScenarioPreset] = None


def resolve(cfg: PipelineConfig) -> ResolvedRun:
    """Parameters, scenario setting and objective of a config."""
    params = resolve_params(cfg)
    preset = build_preset(cfg.preset) if cfg.preset else None
    setting = resolve_setting(cfg, params)
    return ResolvedRun(params=params, setting=setting, objective=resolve_objective(cfg, preset), preset=preset)
