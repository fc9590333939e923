"""
Sliding-window control: one BO problem per d-interval window, advanced one
interval at a time.
"""

from __future__ import annotations

import logging
import math
import time
from typing import Iterator, Optional

import numpy as np

from modules.bo_optimizer.models import BoConfig, RecedingHorizonResult, WindowSolution
from modules.bo_optimizer.search import minimize_box, random_search_box
from modules.control_objectives.models import ObjectiveConfig, ScenarioSetting
from modules.control_objectives.plants import Plant, make_plant
from modules.errors import DomainError, IntegrationError
from modules.integrator.models import IntegratorConfig
from modules.sepsis_model.models import ParameterSet

logger = logging.getLogger(__name__)


def window_rng(seed: int, setting_index: int, window_start: int) -> np.random.Generator:
    """Generator for one window; independent of how other windows ran."""
    return np.random.default_rng([seed, setting_index, window_start])


def _check_window(setting: ScenarioSetting, window_start: int, cfg: BoConfig) -> None:
    if cfg.d != setting.d:
        raise DomainError(f"optimizer window d={cfg.d} differs from the setting's d={setting.d}")
    if window_start < 0 or window_start + setting.d > setting.t_f:
        raise DomainError(
            f"window [{window_start}, {window_start + setting.d}) does not fit in a horizon of {setting.t_f} intervals"
        )


def solve_window(
    setting: ScenarioSetting,
    window_start: int,
    x_start: np.ndarray,
    cfg: BoConfig,
    obj_cfg: ObjectiveConfig,
    integ: Optional[IntegratorConfig] = None,
    plant: Optional[Plant] = None,
    setting_index: int = 0,
    base_params: Optional[ParameterSet] = None,
    random_search: bool = False,
) -> WindowSolution:
    """Best d-interval control from ``x_start`` at grid index ``window_start`` (0-based).

    The window objective is the plant objective aggregated over the window
    only. Candidates whose integration fails score +inf. ``random_search``
    spends the same evaluation budget on uniform samples instead of BO.
    """
    _check_window(setting, window_start, cfg)
    plant = plant or make_plant(setting, base_params, obj_cfg)
    integ = integ or IntegratorConfig()
    x_start = np.asarray(x_start, dtype=float)
    t_window = setting.t_start + window_start * setting.step
    n_channels = len(plant.channels)

    def objective(unit: np.ndarray) -> float:
        rows = plant.rows_from_unit(np.asarray(unit).reshape(setting.d, n_channels))
        try:
            return plant.evaluate(x_start, rows, t_window, setting.step, obj_cfg.aggregation, integ).value
        except IntegrationError as exc:
            logger.warning("Window %d of %s: candidate failed to integrate (%s)", window_start, setting.setting_id, exc)
            return math.inf

    dim = setting.d * n_channels
    rng = window_rng(cfg.seed, setting_index, window_start)
    if random_search:
        result = random_search_box(objective, dim, cfg.budget, rng, cfg.parallel_eval)
    else:
        result = minimize_box(objective, dim, cfg, rng)
    if not math.isfinite(result.f_best):
        raise IntegrationError(
            f"window {window_start} of {setting.setting_id}: no candidate integrated in {result.n_evals} evaluations"
        )
    logger.debug(
        "Window %d of %s: objective %.6g after %d evaluations",
        window_start, setting.setting_id, result.f_best, result.n_evals,
    )
    return WindowSolution(
        window_start=window_start,
        control_window=plant.rows_from_unit(result.x_best.reshape(setting.d, n_channels)),
        objective=result.f_best,
        eval_count=result.n_evals,
        start_state=x_start.copy(),
        history=[float(v) for v in result.y],
        incumbent=[float(v) for v in result.incumbent],
    )


def iter_windows(
    setting: ScenarioSetting,
    cfg: BoConfig,
    obj_cfg: ObjectiveConfig,
    integ: Optional[IntegratorConfig] = None,
    plant: Optional[Plant] = None,
    setting_index: int = 0,
    base_params: Optional[ParameterSet] = None,
    random_search: bool = False,
) -> Iterator[WindowSolution]:
    """Solve windows 0 .. t_f - d in order, starting each from the state
    reached under the first row of the previous window."""
    plant = plant or make_plant(setting, base_params, obj_cfg)
    integ = integ or IntegratorConfig()
    x = setting.initial_array()
    for k in range(setting.n_windows):
        sol = solve_window(setting, k, x, cfg, obj_cfg, integ, plant, setting_index, random_search=random_search)
        yield sol
        if k < setting.n_windows - 1:
            t_k = setting.t_start + k * setting.step
            x = plant.simulate(x, sol.control_window[:1], t_k, setting.step, integ).final_state


def solve_receding_horizon(
    setting: ScenarioSetting,
    cfg: BoConfig,
    obj_cfg: ObjectiveConfig,
    integ: Optional[IntegratorConfig] = None,
    plant: Optional[Plant] = None,
    setting_index: int = 0,
    base_params: Optional[ParameterSet] = None,
    random_search: bool = False,
) -> RecedingHorizonResult:
    """Full-horizon control: the first row of every window, then the rest of the last one."""
    if setting.n_windows < 1:
        raise DomainError(f"{setting.setting_id}: horizon of {setting.t_f} intervals holds no window of {setting.d}")
    started = time.perf_counter()
    plant = plant or make_plant(setting, base_params, obj_cfg)
    integ = integ or IntegratorConfig()

    windows = list(iter_windows(setting, cfg, obj_cfg, integ, plant, setting_index, random_search=random_search))
    rows = [w.first_row for w in windows[:-1]] + list(windows[-1].control_window)
    control_rows = np.asarray(rows, dtype=float).reshape(-1, 2)

    final = plant.evaluate(
        setting.initial_array(), control_rows, setting.t_start, setting.step, obj_cfg.aggregation, integ
    )
    wall = time.perf_counter() - started
    logger.info(
        "Receding horizon for %s: %d windows, objective %.6g, %d evaluations in %.1fs",
        setting.setting_id, len(windows), final.value, sum(w.eval_count for w in windows), wall,
    )
    return RecedingHorizonResult(
        setting_id=setting.setting_id,
        windows=windows,
        control_rows=control_rows,
        objective=final.value,
        trajectory=final.trajectory,
        wall_time=wall,
    )
