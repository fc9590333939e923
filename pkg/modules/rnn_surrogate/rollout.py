"""
Prediction with a trained control predictor.

``predict_window`` maps one system value setting to a control window;
``rollout`` replays the sliding-window loop of dataset generation with the
network in place of the optimizer.
"""

from __future__ import annotations

import logging
import time
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from modules.control_objectives.models import Aggregation, ControlSignal, ObjectiveConfig, PlantKind, ScenarioSetting
from modules.control_objectives.plants import Plant
from modules.errors import DomainError, IntegrationError
from modules.integrator.models import IntegratorConfig, Trajectory
from modules.rnn_surrogate.features import PlantCache, raw_features
from modules.rnn_surrogate.models import RnnModel, RolloutMode, RolloutResult
from modules.rnn_surrogate.network import forward

logger = logging.getLogger(__name__)


def model_plants(model: RnnModel) -> PlantCache:
    return PlantCache(model.plant, model.scenario, model.channel, model.d, model.step,
                      model.base_params, model.objective)


def model_integrator(model: RnnModel) -> IntegratorConfig:
    return IntegratorConfig.model_validate(model.integrator) if model.integrator else IntegratorConfig()


def model_aggregation(model: RnnModel) -> Aggregation:
    objective = ObjectiveConfig.model_validate(model.objective) if model.objective else ObjectiveConfig()
    return objective.aggregation


def predict_window(
    model: RnnModel,
    state: Union[ScenarioSetting, Sequence[float], np.ndarray],
    overrides: Optional[Mapping[str, float]] = None,
    plant: Optional[Plant] = None,
) -> np.ndarray:
    """(d, 2) control rows for a setting; every row lies within the plant bounds."""
    if isinstance(state, ScenarioSetting):
        overrides = state.overrides if overrides is None else overrides
        state = state.initial
    overrides = dict(overrides or {})
    state = np.asarray(state, dtype=float)
    expected = PlantKind(model.plant).state_dim
    if state.shape != (expected,):
        raise DomainError(f"{model.plant} state needs {expected} components, got shape {state.shape}")
    plant = plant or model_plants(model).get(state, overrides)

    features = raw_features(state, overrides, plant.scales(), model.override_keys, model.override_defaults)
    if len(features) != model.in_dim:
        raise DomainError(f"setting has {len(features)} features, model expects {model.in_dim}")
    x = (features - model.feature_mean) / model.feature_scale
    unit = forward(model.weights, x[None, :], model.d)[0][0]
    return plant.rows_from_unit(unit)


def _stub_trajectory(plant: Plant, x0: np.ndarray, t0: float, failure: str) -> Trajectory:
    return Trajectory(
        times=np.array([t0]),
        states=np.asarray(x0, dtype=float)[None, :],
        controls=np.zeros((0, 2)),
        subsystem=None,
        state_names=plant.state_names,
        failure=failure,
    )


def rollout(
    model: RnnModel,
    setting: ScenarioSetting,
    integ: Optional[IntegratorConfig] = None,
    mode: RolloutMode = RolloutMode.CLOSED,
) -> RolloutResult:
    """t_f control rows predicted along the setting's own trajectory.

    CLOSED applies the first row of a fresh prediction at every interval;
    OPEN applies each predicted window whole and predicts again after d
    intervals. An integration failure ends the rollout with the completed
    intervals kept and the failure recorded.
    """
    if setting.plant.value != model.plant:
        raise DomainError(f"model was trained on the {model.plant} plant, setting uses {setting.plant.value}")
    mode = RolloutMode(mode)
    integ = integ or model_integrator(model)
    started = time.perf_counter()
    plant = model_plants(model).get(setting.initial, setting.overrides)

    x = setting.initial_array()
    rows = []
    failure: Optional[str] = None
    predictions = 0
    window = np.empty((0, 2))
    for k in range(setting.t_f):
        if mode is RolloutMode.CLOSED or k % model.d == 0:
            window = predict_window(model, x, setting.overrides, plant)
            predictions += 1
        row = window[0] if mode is RolloutMode.CLOSED else window[k % model.d]
        t_k = setting.t_start + k * setting.step
        try:
            x = plant.simulate(x, row[None, :], t_k, setting.step, integ).final_state
        except IntegrationError as exc:
            failure = f"interval {k}: {exc}"
            logger.warning("Rollout of %s stopped at interval %d: %s", setting.setting_id, k, exc)
            break
        rows.append(row)

    objective = None
    control = None
    if rows:
        control_rows = np.asarray(rows)
        lo, hi = plant.bounds()
        control = ControlSignal.from_array(
            control_rows, setting.t_start, setting.step, plant.channel,
            p_bounds=(lo[0], hi[0]), T_bounds=(lo[1], hi[1]),
        )
        try:
            result = plant.evaluate(setting.initial_array(), control_rows, setting.t_start, setting.step,
                                    model_aggregation(model), integ)
            trajectory = result.trajectory
            objective = result.value if failure is None else None
        except IntegrationError as exc:
            failure = failure or str(exc)
            trajectory = _stub_trajectory(plant, setting.initial_array(), setting.t_start, failure)
        trajectory.failure = failure
    else:
        trajectory = _stub_trajectory(plant, setting.initial_array(), setting.t_start, failure or "")
        trajectory.failure = failure

    wall = time.perf_counter() - started
    logger.info("Rollout of %s (%s): %d intervals, %d predictions in %.3fs",
                setting.setting_id, mode.value, len(rows), predictions, wall)
    return RolloutResult(
        control=control,
        trajectory=trajectory,
        objective=objective,
        wall_time=wall,
        mode=mode,
        predictions=predictions,
        failure=failure,
    )
