"""
Control datasets: (state at window start -> control window) pairs produced
by the sliding-window optimizer over many settings, persisted as JSONL.

The first line of a dataset file is the header; every further line is one
record.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError

from modules.bo_optimizer.config import DATASET_FORMAT_VERSION, REPLAY_ATOL, REPLAY_RTOL
from modules.bo_optimizer.models import BoConfig, ControlDataset, DatasetHeader, DatasetRecord
from modules.bo_optimizer.window import iter_windows
from modules.control_objectives.models import ObjectiveConfig, PlantKind, ScenarioSetting
from modules.control_objectives.plants import ToyLinearPlant, make_plant
from modules.errors import DatasetError, DomainError, IntegrationError
from modules.integrator.models import IntegratorConfig
from modules.sepsis_model.models import ParameterSet
from modules.sepsis_model.parameters import dump_parameter_set, load_parameter_set

logger = logging.getLogger(__name__)


def config_hash(payload: Dict[str, Any]) -> str:
    """sha256 of the canonical JSON form of ``payload``."""
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return "sha256:" + hashlib.sha256(text.encode("utf-8")).hexdigest()


def _shared(settings: Sequence[ScenarioSetting], attr: str) -> Any:
    values = {getattr(s, attr) for s in settings}
    if len(values) != 1:
        raise DomainError(f"settings disagree on {attr}: {sorted(map(str, values))}")
    return values.pop()


def _setting_records(
    index: int,
    setting: ScenarioSetting,
    cfg: BoConfig,
    obj_cfg: ObjectiveConfig,
    integ: IntegratorConfig,
    base_params: ParameterSet,
) -> Tuple[List[DatasetRecord], Optional[str]]:
    """Records of one setting and, if a window failed, the failure message."""
    records: List[DatasetRecord] = []
    plant = make_plant(setting, base_params, obj_cfg)
    try:
        for sol in iter_windows(setting, cfg, obj_cfg, integ, plant, setting_index=index):
            records.append(DatasetRecord(
                setting_id=setting.setting_id,
                window_start=sol.window_start,
                state=[float(v) for v in sol.start_state],
                param_overrides=dict(setting.overrides),
                control=sol.control_window.tolist(),
                objective=float(sol.objective),
                seed=cfg.seed,
            ))
    except IntegrationError as exc:
        return records, str(exc)
    logger.info("Setting %s: %d windows solved", setting.setting_id, len(records))
    return records, None


def generate_dataset(
    settings: Sequence[ScenarioSetting],
    cfg: BoConfig,
    obj_cfg: ObjectiveConfig,
    integ: Optional[IntegratorConfig] = None,
    base_params: Optional[ParameterSet] = None,
    workers: int = 1,
) -> ControlDataset:
    """Sliding-window optimal controls for every setting.

    Settings run concurrently up to ``workers``; records keep setting order.
    A failed window ends its setting only and is noted in ``header.partial``.
    """
    if not settings:
        raise DomainError("at least one setting is required")
    t_f = _shared(settings, "t_f")
    d = _shared(settings, "d")
    plant_kind = _shared(settings, "plant")
    scenario = _shared(settings, "scenario")
    channel = _shared(settings, "control_channel")
    step = _shared(settings, "step")
    t_start = _shared(settings, "t_start")
    integ = integ or IntegratorConfig()
    base_params = base_params or ParameterSet()

    payload = {
        "bo": cfg.model_dump(mode="json"),
        "objective": obj_cfg.model_dump(mode="json"),
        "integrator": integ.model_dump(mode="json"),
        "base_params": dump_parameter_set(base_params),
        "settings": [s.model_dump(mode="json") for s in settings],
    }

    def run(item):
        index, setting = item
        return _setting_records(index, setting, cfg, obj_cfg, integ, base_params)

    items = list(enumerate(settings))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run, items))
    else:
        outcomes = [run(item) for item in items]

    records: List[DatasetRecord] = []
    partial: Dict[str, int] = {}
    for setting, (setting_records, failure) in zip(settings, outcomes):
        records.extend(setting_records)
        if failure is not None:
            partial[setting.setting_id] = len(setting_records)
            logger.warning(
                "Setting %s stopped after %d windows: %s", setting.setting_id, len(setting_records), failure
            )

    header = DatasetHeader(
        config_hash=config_hash(payload),
        seed=cfg.seed,
        plant=plant_kind.value,
        scenario=scenario.value,
        channel=channel.value,
        aggregation=obj_cfg.aggregation.value,
        t_start=t_start,
        step=step,
        t_f=t_f,
        d=d,
        n_settings=len(settings),
        objective=payload["objective"],
        integrator=payload["integrator"],
        base_params=payload["base_params"],
        partial=partial,
    )
    logger.info("Dataset: %d of %d records", len(records), header.expected_records)
    return ControlDataset(header=header, records=records)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def write_dataset(dataset: ControlDataset, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        fh.write(dataset.header.model_dump_json() + "\n")
        for record in dataset.records:
            fh.write(record.model_dump_json() + "\n")
    return path


def read_dataset(path: Union[str, Path]) -> ControlDataset:
    """Parse a dataset file; any malformed line raises DatasetError."""
    path = Path(path)
    try:
        lines = [line for line in path.read_text().splitlines() if line.strip()]
    except FileNotFoundError:
        raise DatasetError(f"Dataset file not found: {path}")
    if not lines:
        raise DatasetError(f"Dataset file {path} is empty")
    try:
        header = DatasetHeader.model_validate_json(lines[0])
    except ValidationError as exc:
        raise DatasetError(f"{path}: invalid header line: {exc}")
    if header.format_version != DATASET_FORMAT_VERSION:
        raise DatasetError(f"{path}: unsupported format version {header.format_version}")

    records: List[DatasetRecord] = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            record = DatasetRecord.model_validate_json(line)
        except ValidationError as exc:
            raise DatasetError(f"{path}:{lineno}: invalid record: {exc}")
        if len(record.control) != header.d:
            raise DatasetError(f"{path}:{lineno}: control window has {len(record.control)} rows, expected {header.d}")
        records.append(record)
    return ControlDataset(header=header, records=records)


# ---------------------------------------------------------------------------
# Replay
# ---------------------------------------------------------------------------

def record_setting(header: DatasetHeader, record: DatasetRecord) -> ScenarioSetting:
    """Single-window setting that starts at a record's state."""
    return ScenarioSetting(
        setting_id=f"{record.setting_id}@{record.window_start}",
        plant=header.plant,
        initial=record.state,
        overrides=record.param_overrides,
        scenario=header.scenario,
        channel=header.channel,
        t_start=header.t_start + record.window_start * header.step,
        t_f=header.d,
        d=header.d,
        step=header.step,
    )


def replay_dataset(dataset: ControlDataset, integ: Optional[IntegratorConfig] = None) -> np.ndarray:
    """Re-evaluate every stored control window from its stored state."""
    header = dataset.header
    obj_cfg = ObjectiveConfig.model_validate(header.objective) if header.objective else ObjectiveConfig()
    if integ is None:
        integ = IntegratorConfig.model_validate(header.integrator) if header.integrator else IntegratorConfig()
    base_params = (
        load_parameter_set(header.base_params, enforce_table_ranges=False)[0] if header.base_params else None
    )
    replayed = np.empty(len(dataset.records))
    for i, record in enumerate(dataset.records):
        setting = record_setting(header, record)
        plant = make_plant(setting, base_params, obj_cfg)
        replayed[i] = plant.evaluate(
            setting.initial_array(), np.asarray(record.control), setting.t_start, setting.step,
            obj_cfg.aggregation, integ,
        ).value
    return replayed


def replay_matches(dataset: ControlDataset, replayed: np.ndarray) -> bool:
    stored = np.array([r.objective for r in dataset.records])
    return bool(np.allclose(replayed, stored, rtol=REPLAY_RTOL, atol=REPLAY_ATOL))


# ---------------------------------------------------------------------------
# Synthetic data
# ---------------------------------------------------------------------------

def feedback_dataset(
    n: int,
    d: int,
    seed: int = 0,
    state_range: float = 1.0,
    obj_cfg: Optional[ObjectiveConfig] = None,
    integ: Optional[IntegratorConfig] = None,
) -> ControlDataset:
    """Toy-plant dataset whose windows follow the known saturated feedback law.

    Each record starts from a uniform random state in [-state_range, state_range]^3
    and stores the d rows the feedback law applies along its own trajectory.
    """
    if n < 1 or d < 1:
        raise DomainError(f"need n >= 1 and d >= 1, got {n}, {d}")
    obj_cfg = obj_cfg or ObjectiveConfig()
    integ = integ or IntegratorConfig()
    plant = ToyLinearPlant()
    rng = np.random.default_rng(seed)
    records: List[DatasetRecord] = []
    for i in range(n):
        x0 = rng.uniform(-state_range, state_range, plant.state_dim)
        rows, _ = plant.feedback_rollout(x0, d, 1.0, integ)
        value = plant.evaluate(x0, rows, 0.0, 1.0, obj_cfg.aggregation, integ).value
        records.append(DatasetRecord(
            setting_id=f"feedback-{i}",
            window_start=0,
            state=[float(v) for v in x0],
            control=rows.tolist(),
            objective=float(value),
            seed=seed,
        ))
    header = DatasetHeader(
        config_hash=config_hash({"feedback": True, "n": n, "d": d, "seed": seed, "state_range": state_range}),
        seed=seed,
        plant=PlantKind.TOY_LINEAR.value,
        scenario=obj_cfg.scenario.value,
        channel=plant.channel.value,
        aggregation=obj_cfg.aggregation.value,
        t_start=0.0,
        step=1.0,
        t_f=d,
        d=d,
        n_settings=n,
        objective=obj_cfg.model_dump(mode="json"),
        integrator=integ.model_dump(mode="json"),
    )
    return ControlDataset(header=header, records=records)
