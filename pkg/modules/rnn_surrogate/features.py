"""
Input features and target windows for the control predictor.

A system value setting becomes the plant state divided by the plant scales,
followed by the parameter overrides in sorted key order. Targets are the
stored control windows mapped to [0, 1] by the channel bounds.
"""

from __future__ import annotations

from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from modules.bo_optimizer.models import ControlDataset
from modules.control_objectives.models import ObjectiveConfig, ScenarioSetting
from modules.control_objectives.plants import Plant, make_plant
from modules.errors import DatasetError, DomainError
from modules.sepsis_model.parameters import load_parameter_set


class PlantCache:
    """Plants keyed by their parameter overrides."""

    def __init__(
        self,
        plant: str,
        scenario: str,
        channel: str,
        d: int,
        step: float,
        base_params: Optional[Mapping[str, float]] = None,
        objective: Optional[Mapping[str, Any]] = None,
    ) -> None:
        self.plant = plant
        self.scenario = scenario
        self.channel = channel
        self.d = d
        self.step = step
        self.base = load_parameter_set(dict(base_params), enforce_table_ranges=False)[0] if base_params else None
        self.objective = ObjectiveConfig.model_validate(dict(objective)) if objective else None
        self._plants: Dict[Tuple[Tuple[str, float], ...], Plant] = {}

    def setting(self, state: Sequence[float], overrides: Mapping[str, float]) -> ScenarioSetting:
        return ScenarioSetting(
            plant=self.plant,
            initial=[float(v) for v in state],
            overrides=dict(overrides),
            scenario=self.scenario,
            channel=self.channel,
            t_f=self.d,
            d=self.d,
            step=self.step,
        )

    def get(self, state: Sequence[float], overrides: Mapping[str, float]) -> Plant:
        key = tuple(sorted((k, float(v)) for k, v in overrides.items()))
        if key not in self._plants:
            self._plants[key] = make_plant(self.setting(state, overrides), self.base, self.objective)
        return self._plants[key]


def raw_features(
    state: np.ndarray,
    overrides: Mapping[str, float],
    scales: np.ndarray,
    override_keys: Sequence[str],
    override_defaults: Mapping[str, float],
) -> np.ndarray:
    state = np.asarray(state, dtype=float)
    if len(state) != len(scales):
        raise DomainError(f"state has {len(state)} components, plant has {len(scales)}")
    extra = []
    for key in override_keys:
        if key in overrides:
            extra.append(float(overrides[key]))
        elif key in override_defaults:
            extra.append(float(override_defaults[key]))
        else:
            raise DomainError(f"no value for parameter {key}")
    unknown = sorted(set(overrides) - set(override_keys))
    if unknown:
        raise DomainError(f"the model was not trained on overrides {unknown}")
    return np.concatenate([state / scales, np.asarray(extra, dtype=float)])


def dataset_arrays(dataset: ControlDataset) -> Tuple[np.ndarray, np.ndarray, Dict[str, Any]]:
    """Raw features (N, in), normalized targets (N, d, channels) and metadata."""
    header = dataset.header
    if not dataset.records:
        raise DatasetError("dataset holds no records")
    cache = PlantCache(header.plant, header.scenario, header.channel, header.d, header.step,
                       header.base_params, header.objective)
    override_keys: List[str] = sorted({k for r in dataset.records for k in r.param_overrides})
    override_defaults = {k: float(header.base_params[k]) for k in override_keys if k in header.base_params}

    features, targets = [], []
    for record in dataset.records:
        if len(record.control) != header.d:
            raise DatasetError(f"record {record.setting_id}@{record.window_start} has {len(record.control)} rows")
        plant = cache.get(record.state, record.param_overrides)
        features.append(raw_features(record.state, record.param_overrides, plant.scales(),
                                     override_keys, override_defaults))
        targets.append(plant.unit_from_rows(np.asarray(record.control, dtype=float)))
    first = cache.get(dataset.records[0].state, {})
    meta = {
        "override_keys": override_keys,
        "override_defaults": override_defaults,
        "channels": tuple(first.channels),
        "bounds": first.bounds(),
        "cache": cache,
    }
    return np.asarray(features), np.clip(np.asarray(targets), 0.0, 1.0), meta


def standardization(features: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Per-feature mean and scale; constant features get scale 1."""
    mean = features.mean(axis=0)
    scale = features.std(axis=0)
    scale[~(scale > 0)] = 1.0
    return mean, scale
