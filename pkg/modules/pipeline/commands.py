"""
Pipeline commands.

Each command takes a resolved PipelineConfig and an output directory,
writes its CSV/JSON artifacts there and returns the RunManifest it wrote.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Sequence, Tuple, TypeVar, Union

import numpy as np
import pandas as pd

from modules.bifurcation.config import DEFAULT_PHASE_PLANES, get_reference_locus
from modules.bifurcation.models import BifurcationDiagram, SearchConfig
from modules.bifurcation.oscillation import detect_limit_cycle, phase_export
from modules.bifurcation.sweep import sweep, sweep_family
from modules.bifurcation.systems import pitchfork, sepsis_system, simulate_system, van_der_pol
from modules.bo_optimizer.dataset import feedback_dataset, generate_dataset, read_dataset, write_dataset
from modules.bo_optimizer.models import BoConfig, RecedingHorizonResult
from modules.bo_optimizer.window import solve_receding_horizon
from modules.control_objectives.evaluation import evaluate_objective
from modules.control_objectives.models import ControlSignal, ObjectiveConfig, PlantKind, Scenario, ScenarioSetting
from modules.control_objectives.objectives import aggregate
from modules.control_objectives.plants import Plant, make_plant
from modules.integrator.models import Trajectory
from modules.integrator.simulation import integrate
from modules.pipeline.config import (
    DEFAULT_D,
    SELFTEST_POINTS,
    SELFTEST_RANGE,
    SELFTEST_START_BOX,
    SELFTEST_STARTS,
    SELFTEST_VDP_HOURS,
    SELFTEST_VDP_MU,
    SELFTEST_VDP_PERIOD,
    SELFTEST_VDP_START,
    TNF_PEAK_REDUCTION,
)
from modules.pipeline.manifest import RunRecorder
from modules.pipeline.models import ArtifactRef, Command, Method, PipelineConfig, RunManifest
from modules.pipeline.presets import ResolvedRun, bo_for, phenotype_check, resolve, sample_settings
from modules.rnn_surrogate.models import RolloutMode
from modules.rnn_surrogate.rollout import model_plants, rollout
from modules.rnn_surrogate.storage import load_model, save_model
from modules.rnn_surrogate.training import train
from modules.sepsis_model.models import StateVector, SubsystemId
from modules.sepsis_model.parameters import with_overrides

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

OutDir = Union[str, Path]


def pool_map(fn: Callable[[T], R], items: Sequence[T], workers: int) -> List[R]:
    """Ordered map over ``items``, concurrent when ``workers`` > 1."""
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _signal(rows: np.ndarray, setting: ScenarioSetting, plant: Plant) -> ControlSignal:
    lo, hi = plant.bounds()
    return ControlSignal.from_array(
        rows, setting.t_start, setting.step, plant.channel,
        p_bounds=(lo[0], hi[0]), T_bounds=(lo[1], hi[1]),
    )


def _accumulated(plant: Plant, traj: Trajectory, obj: ObjectiveConfig) -> np.ndarray:
    return aggregate(traj.times, plant.objective_values(traj.states), obj.aggregation)[1]


def method_config(method: Method, cfg: BoConfig) -> Tuple[BoConfig, bool]:
    """(optimizer config, random_search flag) of a method at the budget of ``cfg``."""
    if method is Method.STANDARD_BO:
        fields = cfg.model_dump(exclude={"n_arms", "local_search"})
        fields["n_iter"] = cfg.budget - cfg.n_init
        standard = BoConfig.standard(**fields)
        return standard, False
    return cfg, method is Method.RANDOM_SEARCH


def _run_method(run: ResolvedRun, cfg: PipelineConfig, setting: ScenarioSetting, method: Method,
                bo: BoConfig) -> RecedingHorizonResult:
    method_cfg, random_search = method_config(method, bo)
    return solve_receding_horizon(
        setting, method_cfg, run.objective, cfg.integrator,
        base_params=run.params, random_search=random_search,
    )


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(cfg: PipelineConfig, out_dir: OutDir, workers: int = 1) -> RunManifest:
    """Free or fixed-control run of a subsystem, exported on its grid."""
    rec = RunRecorder(Command.SIMULATE, cfg, out_dir)
    run = resolve(cfg)
    setting = run.setting
    section = cfg.simulate
    plant = make_plant(setting, run.params, run.objective)

    control = None
    if section.control_file:
        path = rec.input(ArtifactRef(path=section.control_file), "control file")
        lo, hi = plant.bounds()
        control = ControlSignal.from_csv(path, channel=plant.channel, p_bounds=(lo[0], hi[0]), T_bounds=(lo[1], hi[1]))

    if setting.plant is PlantKind.SEPSIS:
        params = with_overrides(run.params, setting.overrides, enforce_table_ranges=cfg.enforce_table_ranges)
        t_end = control.t_end if control is not None else setting.t_start + section.hours
        start = control.t_start if control is not None else setting.t_start
        traj = integrate(section.subsystem, StateVector.from_array(setting.initial), params, control,
                         (start, t_end), cfg.integrator)
    else:
        if control is not None:
            rows, start, step = control.as_array(), control.t_start, control.step
        else:
            n = int(round(section.hours / setting.step))
            rows, start, step = np.tile(plant.idle_row(), (n, 1)), setting.t_start, setting.step
        traj = plant.simulate(setting.initial_array(), rows, start, step, cfg.integrator)

    traj.to_csv(rec.path("trajectory.csv"))
    rec.record("trajectory.csv")
    summary: Dict[str, Any] = {
        "setting_id": setting.setting_id,
        "subsystem": section.subsystem.value if setting.plant is PlantKind.SEPSIS else setting.plant.value,
        "t_start": float(traj.times[0]),
        "t_end": float(traj.times[-1]),
        "clamped_excursions": traj.clamp.count,
    }
    if setting.plant is PlantKind.TOY_LINEAR or section.subsystem is SubsystemId.FULL:
        value, accumulated = aggregate(traj.times, plant.objective_values(traj.states), run.objective.aggregation)
        rec.csv("objective.csv", pd.DataFrame({"time": traj.times, "accumulated": accumulated}))
        summary["objective"] = value
    if control is None:
        summary["phenotype"] = phenotype_check(cfg.preset, traj)
    rec.json("summary.json", summary)
    return rec.finish(summary=summary)


# ---------------------------------------------------------------------------
# bifurcate
# ---------------------------------------------------------------------------

def _selftest(cfg: PipelineConfig, rec: RunRecorder, workers: int) -> Dict[str, Any]:
    search = SearchConfig(start_box=SELFTEST_START_BOX, n_starts=SELFTEST_STARTS, seed=cfg.seed)
    diagram = sweep_family(pitchfork, "pitchfork", "mu", SELFTEST_RANGE, SELFTEST_POINTS,
                           search, cfg.bifurcate.classify, workers)
    system = van_der_pol(SELFTEST_VDP_MU)
    traj = simulate_system(system, np.array(SELFTEST_VDP_START), SELFTEST_VDP_HOURS, cfg.integrator,
                           cfg.bifurcate.oscillation.grid_step)
    report = detect_limit_cycle(traj, ["x", "v"], cfg.bifurcate.oscillation.thresholds)
    rec.json("limit_cycle.json", report.to_dict())
    rec.csv("phase_x_v.csv", phase_export(traj, ["x", "v"]))
    period_error = (
        abs(report.period - SELFTEST_VDP_PERIOD) / SELFTEST_VDP_PERIOD if report.period else None
    )
    return {
        "diagram": diagram,
        "reference_locus": 0.0,
        "oscillating": report.oscillating,
        "period": report.period,
        "reference_period": SELFTEST_VDP_PERIOD,
        "period_relative_error": period_error,
    }


def _model_sweep(cfg: PipelineConfig, rec: RunRecorder, workers: int) -> Dict[str, Any]:
    section = cfg.bifurcate
    run = resolve(cfg)
    search = section.search.model_copy(update={"seed": cfg.seed})
    diagram = sweep(section.subsystem, run.params, section.param, section.range, section.n_points,
                    search, section.classify, workers, enforce_table_ranges=cfg.enforce_table_ranges)
    try:
        locus = get_reference_locus(section.param)
    except KeyError:
        locus = None
    out: Dict[str, Any] = {"diagram": diagram, "reference_locus": locus}

    osc = section.oscillation
    if osc.enabled:
        value = osc.param_value if osc.param_value is not None else 0.5 * (section.range[0] + section.range[1])
        params = with_overrides(run.params, {section.param: value}, enforce_table_ranges=cfg.enforce_table_ranges)
        system = sepsis_system(section.subsystem, params)
        y0 = np.where(section.subsystem.mask, run.setting.initial_array(), 0.0)
        traj = simulate_system(system, y0, osc.hours, cfg.integrator, osc.grid_step)
        scales = {name: float(system.scales[system.index(name)]) for name in osc.variables}
        report = detect_limit_cycle(traj, osc.variables, osc.thresholds, scales)
        traj.to_csv(rec.path("oscillation_trajectory.csv"))
        rec.record("oscillation_trajectory.csv")
        rec.json("limit_cycle.json", {section.param: value, **report.to_dict()})
        active = set(section.subsystem.state_names)
        planes = osc.phase_planes or [list(p) for p in DEFAULT_PHASE_PLANES]
        for plane in planes:
            if set(plane) <= active:
                rec.csv("phase_" + "_".join(plane) + ".csv", phase_export(traj, plane))
        out.update(oscillating=report.oscillating, period=report.period, oscillation_param_value=value)
    return out


def cmd_bifurcate(cfg: PipelineConfig, out_dir: OutDir, workers: int = 1) -> RunManifest:
    """Bifurcation diagram, optional long run with limit-cycle check and phase exports."""
    rec = RunRecorder(Command.BIFURCATE, cfg, out_dir)
    result = _selftest(cfg, rec, workers) if cfg.bifurcate.selftest else _model_sweep(cfg, rec, workers)
    diagram: BifurcationDiagram = result.pop("diagram")
    diagram.to_csv(rec.path("diagram.csv"))
    rec.record("diagram.csv")
    diagram.to_json(rec.path("diagram.json"))
    rec.record("diagram.json")

    locus = result["reference_locus"]
    lo, hi = float(diagram.grid[0]), float(diagram.grid[-1])
    summary = {
        "subsystem": diagram.subsystem,
        "param": diagram.param_name,
        "range": [lo, hi],
        "branch_counts": diagram.branch_counts(),
        "detected_bifurcations": list(diagram.detected_bifurcations),
        "detected_in_range": any(lo <= b <= hi for b in diagram.detected_bifurcations),
        "distance_to_reference": diagram.distance_to(locus) if locus is not None else None,
        **result,
    }
    rec.json("summary.json", summary)
    return rec.finish(summary=summary)


# ---------------------------------------------------------------------------
# optimize / compare
# ---------------------------------------------------------------------------

def cmd_optimize(cfg: PipelineConfig, out_dir: OutDir, workers: int = 1) -> RunManifest:
    """Improved BO and its baselines on one scenario, plus the uncontrolled run."""
    rec = RunRecorder(Command.OPTIMIZE, cfg, out_dir)
    run = resolve(cfg)
    setting = run.setting
    bo = bo_for(cfg, setting)
    plant = make_plant(setting, run.params, run.objective)

    uncontrolled = evaluate_objective(setting, None, run.objective, cfg.integrator, run.params)
    methods = list(dict.fromkeys(cfg.optimize.methods))
    results = pool_map(lambda m: _run_method(run, cfg, setting, m, bo), methods, workers)

    curves = pd.DataFrame({"time": uncontrolled.times, "uncontrolled": uncontrolled.accumulated})
    budget_rows = []
    objectives = {"uncontrolled": uncontrolled.value}
    peaks = {"uncontrolled": float(np.max(uncontrolled.instantaneous))}
    for method, res in zip(methods, results):
        name = method.value
        curves[name] = _accumulated(plant, res.trajectory, run.objective)
        objectives[name] = res.objective
        peaks[name] = float(np.max(plant.objective_values(res.trajectory.states)))
        rec.csv(f"control_{name}.csv", _signal(res.control_rows, setting, plant).to_frame())
        rec.csv(f"trajectory_{name}.csv", res.trajectory.to_frame())
        rec.csv(f"windows_{name}.csv", pd.DataFrame({
            "window_start": [w.window_start for w in res.windows],
            "objective": [w.objective for w in res.windows],
            "evaluations": [w.eval_count for w in res.windows],
        }))
        method_cfg, _ = method_config(method, bo)
        budget_rows.append({
            "method": name,
            "windows": len(res.windows),
            "evaluations": res.eval_count,
            "window_budget": method_cfg.budget,
            "budget": method_cfg.budget * len(res.windows),
        })
    rec.csv("comparison.csv", curves)
    rec.csv("budget.csv", pd.DataFrame(budget_rows))
    rec.csv("trajectory_uncontrolled.csv", uncontrolled.trajectory.to_frame())

    summary: Dict[str, Any] = {
        "setting_id": setting.setting_id,
        "t_f": setting.t_f,
        "d": setting.d,
        "objectives": objectives,
        "below_uncontrolled": {m.value: objectives[m.value] < uncontrolled.value for m in methods},
        "peak_objective": peaks,
    }
    if setting.plant is PlantKind.SEPSIS and run.objective.scenario is Scenario.TNF:
        best = min(peaks[m.value] for m in methods)
        factor = peaks["uncontrolled"] / best if best > 0 else float("inf")
        summary["tnf_il10_peak_reduction"] = factor
        summary["tnf_il10_peak_reduction_met"] = factor >= TNF_PEAK_REDUCTION
    rec.json("summary.json", summary)
    wall = {m.value: r.wall_time for m, r in zip(methods, results)}
    return rec.finish(summary=summary, wall_seconds_per_method=wall)


def cmd_compare(cfg: PipelineConfig, out_dir: OutDir, workers: int = 1) -> RunManifest:
    """Improved BO against equal-budget random search over consecutive seeds."""
    rec = RunRecorder(Command.COMPARE, cfg, out_dir)
    run = resolve(cfg)
    setting = run.setting
    seeds = [cfg.seed + i for i in range(cfg.compare.n_seeds)]

    def one(seed: int) -> Dict[str, Any]:
        bo = bo_for(cfg, setting, seed=seed)
        improved = _run_method(run, cfg, setting, Method.IMPROVED_BO, bo)
        baseline = _run_method(run, cfg, setting, Method.RANDOM_SEARCH, bo)
        return {
            "seed": seed,
            "improved_bo": improved.objective,
            "random_search": baseline.objective,
        }

    rows = pool_map(one, seeds, workers)
    frame = pd.DataFrame(rows)
    # A seed wins when improved BO reaches the random-search median over all seeds.
    frame["improved_wins"] = frame["improved_bo"] <= frame["random_search"].median()
    rec.csv("compare.csv", frame)
    summary = {
        "setting_id": setting.setting_id,
        "n_seeds": len(seeds),
        "improved_wins": int(frame["improved_wins"].sum()),
        "median_improved_bo": float(frame["improved_bo"].median()),
        "median_random_search": float(frame["random_search"].median()),
    }
    rec.json("summary.json", summary)
    return rec.finish(summary=summary)


# ---------------------------------------------------------------------------
# generate-data / train / predict
# ---------------------------------------------------------------------------

def cmd_generate_data(cfg: PipelineConfig, out_dir: OutDir, workers: int = 1) -> RunManifest:
    """Control dataset from sampled settings (or the toy feedback law)."""
    rec = RunRecorder(Command.GENERATE_DATA, cfg, out_dir)
    section = cfg.dataset
    if section.toy_feedback:
        dataset = feedback_dataset(section.n_settings, cfg.setting.d or DEFAULT_D, seed=cfg.seed,
                                   obj_cfg=cfg.objective, integ=cfg.integrator)
    else:
        run = resolve(cfg)
        setting = run.setting
        rng = np.random.default_rng([cfg.seed, 0])
        settings = sample_settings(setting, section.n_settings, section.spread, section.vary, rng)
        dataset = generate_dataset(settings, bo_for(cfg, setting), run.objective, cfg.integrator,
                                   run.params, workers)
    write_dataset(dataset, rec.path("dataset.jsonl"))
    rec.record("dataset.jsonl")
    summary = {
        "records": len(dataset),
        "expected_records": dataset.header.expected_records,
        "complete": dataset.complete,
        "partial": dict(dataset.header.partial),
        "config_hash": dataset.header.config_hash,
    }
    rec.json("summary.json", summary)
    return rec.finish(summary=summary)


def cmd_train(cfg: PipelineConfig, out_dir: OutDir, workers: int = 1) -> RunManifest:
    """Train the control predictor on a dataset file."""
    rec = RunRecorder(Command.TRAIN, cfg, out_dir)
    dataset = read_dataset(rec.input(cfg.train.dataset, "dataset"))
    model, report = train(dataset, cfg.train.config)
    save_model(model, rec.path("model.json"))
    rec.record("model.json")
    rec.csv("train_report.csv", pd.DataFrame({
        "epoch": np.arange(len(report.train_loss)),
        "train_loss": report.train_loss,
        "val_loss": report.val_loss,
    }))
    summary = {
        "n_params": model.n_params,
        "n_train": report.n_train,
        "n_val": report.n_val,
        "best_epoch": report.best_epoch,
        "epochs_run": report.epochs_run,
        "stopped_early": report.stopped_early,
        "final_val_mse": report.final_val_mse,
    }
    rec.json("summary.json", summary)
    return rec.finish(summary=summary, epoch_seconds=report.epoch_seconds)


def cmd_predict(cfg: PipelineConfig, out_dir: OutDir, workers: int = 1) -> RunManifest:
    """Roll the predictor out on held-out settings and score it."""
    rec = RunRecorder(Command.PREDICT, cfg, out_dir)
    section = cfg.predict
    model = load_model(rec.input(section.model, "model file"))
    run = resolve(cfg)
    objective = ObjectiveConfig.model_validate(model.objective) if model.objective else run.objective
    rng = np.random.default_rng([cfg.seed, 1])
    settings = sample_settings(run.setting, section.n_settings, cfg.dataset.spread, cfg.dataset.vary, rng,
                               prefix="heldout")
    mode = RolloutMode(section.mode)
    # Baselines share the parameter set the rollout plants are built from.
    base_params = model_plants(model).base

    def one(setting: ScenarioSetting) -> Dict[str, Any]:
        result = rollout(model, setting, cfg.integrator, mode)
        uncontrolled = evaluate_objective(setting, None, objective, cfg.integrator, base_params)
        row: Dict[str, Any] = {
            "setting_id": setting.setting_id,
            "rnn_objective": result.objective,
            "uncontrolled_objective": uncontrolled.value,
            "below_uncontrolled": result.objective is not None and result.objective < uncontrolled.value,
            "predictions": result.predictions,
            "failure": result.failure or "",
        }
        if section.compare_bo:
            bo = solve_receding_horizon(setting, bo_for(cfg, setting), objective, cfg.integrator,
                                        base_params=base_params)
            row["bo_objective"] = bo.objective
            row["within_25pct_of_bo"] = (
                result.objective is not None and result.objective <= 1.25 * bo.objective
            )
        return {"row": row, "result": result}

    outcomes = pool_map(one, settings, workers)
    for setting, outcome in zip(settings, outcomes):
        result = outcome["result"]
        if result.control is not None:
            rec.csv(f"control_{setting.setting_id}.csv", result.control.to_frame())
    frame = pd.DataFrame([o["row"] for o in outcomes])
    rec.csv("predictions.csv", frame)
    summary: Dict[str, Any] = {
        "mode": mode.value,
        "n_settings": len(settings),
        "below_uncontrolled": int(frame["below_uncontrolled"].sum()),
        "failures": int((frame["failure"] != "").sum()),
    }
    if section.compare_bo:
        summary["within_25pct_of_bo"] = int(frame["within_25pct_of_bo"].sum())
    rec.json("summary.json", summary)
    wall = {s.setting_id: o["result"].wall_time for s, o in zip(settings, outcomes)}
    return rec.finish(summary=summary, prediction_wall_seconds=wall)


COMMANDS: Dict[Command, Callable[[PipelineConfig, OutDir, int], RunManifest]] = {
    Command.SIMULATE: cmd_simulate,
    Command.BIFURCATE: cmd_bifurcate,
    Command.OPTIMIZE: cmd_optimize,
    Command.COMPARE: cmd_compare,
    Command.GENERATE_DATA: cmd_generate_data,
    Command.TRAIN: cmd_train,
    Command.PREDICT: cmd_predict,
}
