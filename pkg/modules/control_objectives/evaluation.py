"""
Objective evaluation of a control signal over a scenario horizon.
"""

from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from modules.control_objectives.models import ControlSignal, ObjectiveConfig, ObjectiveResult, ScenarioSetting
from modules.control_objectives.plants import make_plant
from modules.errors import DomainError
from modules.integrator.models import IntegratorConfig
from modules.sepsis_model.models import ParameterSet

logger = logging.getLogger(__name__)


def evaluate_objective(
    setting: ScenarioSetting,
    control: Optional[ControlSignal],
    cfg: ObjectiveConfig,
    integ: Optional[IntegratorConfig] = None,
    base_params: Optional[ParameterSet] = None,
) -> ObjectiveResult:
    """Integrate the controlled plant over the setting horizon and score it.

    ``control=None`` runs the uncontrolled system (every channel at its lower
    bound). The control grid must start at the setting's start time, use the
    same step and hold exactly ``t_f`` intervals.
    """
    plant = make_plant(setting, base_params, cfg)
    if control is None:
        rows = np.tile(plant.idle_row(), (setting.t_f, 1))
    else:
        if (
            control.n_intervals != setting.t_f
            or abs(control.step - setting.step) > 1e-12
            or abs(control.t_start - setting.t_start) > 1e-12
        ):
            raise DomainError(
                f"control grid ({control.n_intervals} x {control.step} from {control.t_start}) "
                f"does not match the setting horizon ({setting.t_f} x {setting.step} from {setting.t_start})"
            )
        rows = control.as_array()
    result = plant.evaluate(
        setting.initial_array(), rows, setting.t_start, setting.step, cfg.aggregation, integ
    )
    logger.debug("Objective of %s: %.6g", setting.setting_id, result.value)
    return result
