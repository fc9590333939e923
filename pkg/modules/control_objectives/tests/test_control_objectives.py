"""
Tests for control signals, objectives and plants.

Covers: instantaneous objective values, aggregation, control projection,
control-signal validation and CSV files, scenario settings, objective
evaluation on the sepsis plant and the toy linear plant.
"""

from __future__ import annotations

import os
import sys

import numpy as np
import pytest
from pydantic import ValidationError

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "..", ".."))

from modules.control_objectives.evaluation import evaluate_objective
from modules.control_objectives.models import (
    Aggregation,
    ControlChannel,
    ControlSignal,
    ObjectiveConfig,
    PlantKind,
    Scenario,
    ScenarioSetting,
)
from modules.control_objectives.objectives import (
    aggregate,
    clamp_to_bounds,
    instantaneous_objective,
    objective_values,
)
from modules.control_objectives.plants import SepsisPlant, ToyLinearPlant, make_plant
from modules.errors import ConfigError, DomainError
from modules.integrator.models import IntegratorConfig
from modules.sepsis_model.config import STATE_INDEX
from modules.sepsis_model.dynamics import boundary_equilibrium
from modules.sepsis_model.models import ParameterSet, StateVector, SubsystemId
from modules.sepsis_model.parameters import with_overrides

REFS = {"T_ref": 1e8, "H_ref": 1e5}


@pytest.fixture
def params():
    return with_overrides(ParameterSet(), REFS)


@pytest.fixture
def integ():
    return IntegratorConfig(rel_tol=1e-6, abs_tol=1e-9)


def _infected_state(params) -> list:
    y = boundary_equilibrium(SubsystemId.FULL, params)
    y[STATE_INDEX["P"]] = 1e5
    y[STATE_INDEX["M1"]] = 10.0
    y[STATE_INDEX["M2"]] = 10.0
    return [float(v) for v in y]


@pytest.fixture
def setting(params):
    return ScenarioSetting(
        setting_id="infected",
        initial=_infected_state(params),
        overrides=REFS,
        scenario=Scenario.PATHOGEN,
        t_f=3,
        d=1,
    )


# ---------------------------------------------------------------------------
# Instantaneous objective
# ---------------------------------------------------------------------------

class TestInstantaneousObjective:
    """Pointwise scenario objectives."""

    def test_equal_ratios_give_weight_sum(self):
        state = StateVector(M1=3.0, M2=3.0, T_CD4=7.0, T_CD8=7.0)
        assert instantaneous_objective(state, ObjectiveConfig()) == pytest.approx(2.0)

    def test_weights_scale_terms(self):
        state = StateVector(M1=4.0, M2=2.0, T_CD4=1.0, T_CD8=3.0)
        cfg = ObjectiveConfig(w1=0.5, w2=2.0)
        assert instantaneous_objective(state, cfg) == pytest.approx(0.5 * 2.0 + 2.0 * 3.0)

    def test_tnf_scenario_zero_tnf(self):
        cfg = ObjectiveConfig(scenario=Scenario.TNF)
        assert instantaneous_objective(StateVector(T=0.0, C_A=5.0), cfg) == 0.0

    def test_tnf_scenario_ratio(self):
        cfg = ObjectiveConfig(scenario=Scenario.TNF)
        assert instantaneous_objective(StateVector(T=4.0, C_A=1e-4), cfg) == pytest.approx(40000.0)

    def test_zero_denominator_is_floored(self):
        cfg = ObjectiveConfig(scenario=Scenario.TNF)
        value = instantaneous_objective(StateVector(T=1.0, C_A=0.0), cfg)
        assert value == pytest.approx(1.0 / cfg.epsilon_floor)
        assert np.isfinite(value)

    def test_vectorized_matches_pointwise(self):
        rng = np.random.default_rng(3)
        states = rng.uniform(0.0, 10.0, size=(50, 20))
        cfg = ObjectiveConfig()
        values = objective_values(states, cfg)
        for row, value in zip(states, values):
            assert value == pytest.approx(instantaneous_objective(StateVector.from_array(row), cfg))

    def test_both_weights_zero_rejected(self):
        with pytest.raises(ValidationError):
            ObjectiveConfig(w1=0.0, w2=0.0)


# ---------------------------------------------------------------------------
# Aggregation and projection
# ---------------------------------------------------------------------------

class TestAggregation:
    """Reduction of an objective series over a horizon."""

    def test_integral_of_constant(self):
        times = np.linspace(0.0, 4.0, 5)
        value, acc = aggregate(times, np.full(5, 2.0), Aggregation.INTEGRAL)
        assert value == pytest.approx(8.0)
        assert list(acc) == pytest.approx([0.0, 2.0, 4.0, 6.0, 8.0])

    def test_terminal_takes_last_value(self):
        value, _ = aggregate(np.array([0.0, 1.0]), np.array([5.0, 7.0]), Aggregation.TERMINAL)
        assert value == 7.0

    def test_single_time(self):
        value, acc = aggregate(np.array([0.0]), np.array([3.0]), Aggregation.INTEGRAL)
        assert value == 0.0
        assert list(acc) == [0.0]


class TestClampToBounds:
    """Projection of controls onto parameter-set bounds."""

    def test_inside_is_unchanged(self, params):
        control = ControlSignal.constant(3, u_p=0.4, u_T=0.6)
        assert clamp_to_bounds(control, params).as_array() == pytest.approx(control.as_array())

    def test_idempotent(self, params):
        narrow = with_overrides(params, {"u_pL": 0.2, "u_pU": 0.7})
        control = ControlSignal.constant(4, u_p=0.9)
        once = clamp_to_bounds(control, narrow)
        assert clamp_to_bounds(once, narrow).as_array() == pytest.approx(once.as_array())

    def test_clips_out_of_range_values(self, params):
        narrow = with_overrides(params, {"u_pL": 0.2})
        rows = np.array([[1.5, 0.0], [-0.2, 0.5]])
        raw = ControlSignal.from_array(rows, validate=False)
        clipped = clamp_to_bounds(raw, narrow).as_array()
        assert clipped[0, 0] == 1.0
        assert clipped[1, 0] == 0.2
        assert clipped[1, 1] == 0.5


# ---------------------------------------------------------------------------
# Control signals
# ---------------------------------------------------------------------------

class TestControlSignal:
    """Validation, grid views and CSV files."""

    def test_out_of_bounds_rejected(self):
        with pytest.raises(ValidationError):
            ControlSignal(u_p=[0.5, 1.2], u_T=[0.0, 0.0])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            ControlSignal(u_p=[0.5], u_T=[0.0, 0.0])

    def test_custom_bounds(self):
        with pytest.raises(ValidationError):
            ControlSignal.constant(2, u_p=0.5, p_bounds=(0.0, 0.3))

    def test_grid(self):
        control = ControlSignal.constant(4, t_start=2.0, step=0.5)
        assert list(control.grid()) == [2.0, 2.5, 3.0, 3.5, 4.0]
        assert control.t_end == 4.0

    def test_csv_roundtrip(self, tmp_path):
        control = ControlSignal.from_array([[0.1, 0.9], [0.3, 0.7], [0.25, 0.0]], t_start=1.0, step=2.0)
        path = control.to_csv(tmp_path / "control.csv")
        loaded = ControlSignal.from_csv(path)
        assert loaded.t_start == 1.0
        assert loaded.step == 2.0
        assert loaded.as_array() == pytest.approx(control.as_array())

    def test_csv_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            ControlSignal.from_csv(tmp_path / "nope.csv")

    def test_csv_missing_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time,u_p\n0,0.1\n1,0.1\n")
        with pytest.raises(ConfigError):
            ControlSignal.from_csv(path)

    def test_csv_nonuniform_grid(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time,u_p,u_T\n0,0.1,0\n1,0.1,0\n3,0.1,0\n")
        with pytest.raises(ConfigError):
            ControlSignal.from_csv(path)


# ---------------------------------------------------------------------------
# Scenario settings and plants
# ---------------------------------------------------------------------------

class TestScenarioSetting:
    """Setting validation and derived quantities."""

    def test_wrong_initial_length(self):
        with pytest.raises(ValidationError):
            ScenarioSetting(initial=[1.0, 2.0], t_f=4, d=2)

    def test_negative_sepsis_state(self, params):
        initial = _infected_state(params)
        initial[0] = -1.0
        with pytest.raises(ValidationError):
            ScenarioSetting(initial=initial, t_f=4, d=2)

    def test_unknown_override(self, params):
        with pytest.raises(ValidationError):
            ScenarioSetting(initial=_infected_state(params), overrides={"bogus": 1.0}, t_f=4, d=2)

    def test_window_longer_than_horizon(self):
        with pytest.raises(ValidationError):
            ScenarioSetting(plant=PlantKind.TOY_LINEAR, initial=[0.0, 0.0, 0.0], t_f=3, d=4)

    def test_toy_plant_allows_negative_state(self):
        setting = ScenarioSetting(plant=PlantKind.TOY_LINEAR, initial=[-1.0, 0.5, 2.0], t_f=5, d=2)
        assert setting.n_windows == 4
        assert setting.control_channel is ControlChannel.U_P

    def test_channel_follows_scenario(self, params):
        setting = ScenarioSetting(initial=_infected_state(params), scenario=Scenario.TNF, t_f=2, d=1)
        plant = make_plant(setting)
        assert isinstance(plant, SepsisPlant)
        assert plant.channels == (1,)
        assert plant.objective.scenario is Scenario.TNF

    def test_overrides_reach_plant(self, setting):
        plant = make_plant(setting)
        assert plant.params.T_ref == 1e8


class TestPlantControls:
    """Unit-box mapping of controlled channels."""

    def test_rows_from_unit_fills_idle_channel(self, params):
        narrow = with_overrides(params, {"u_TL": 0.1, "u_pL": 0.2, "u_pU": 0.6})
        plant = SepsisPlant(narrow, ObjectiveConfig())
        rows = plant.rows_from_unit(np.array([[0.0], [0.5], [1.0]]))
        assert rows[:, 0] == pytest.approx([0.2, 0.4, 0.6])
        assert rows[:, 1] == pytest.approx([0.1, 0.1, 0.1])
        assert plant.unit_from_rows(rows)[:, 0] == pytest.approx([0.0, 0.5, 1.0])

    def test_rows_outside_bounds_rejected(self):
        plant = ToyLinearPlant()
        with pytest.raises(DomainError):
            plant.simulate(np.zeros(3), np.array([[0.5, 0.3]]), 0.0, 1.0)


# ---------------------------------------------------------------------------
# Objective evaluation
# ---------------------------------------------------------------------------

class TestEvaluateObjective:
    """Controlled runs scored over the setting horizon."""

    def test_zero_horizon_terminal_is_initial_objective(self, params):
        setting = ScenarioSetting(initial=_infected_state(params), overrides=REFS, t_f=0, d=1)
        cfg = ObjectiveConfig(aggregation=Aggregation.TERMINAL)
        result = evaluate_objective(setting, None, cfg)
        expected = instantaneous_objective(StateVector.from_array(setting.initial_array()), cfg)
        assert result.value == pytest.approx(expected)
        assert len(result.times) == 1

    def test_zero_control_matches_uncontrolled(self, setting, integ):
        cfg = ObjectiveConfig()
        idle = evaluate_objective(setting, None, cfg, integ)
        zero = evaluate_objective(setting, ControlSignal.constant(setting.t_f), cfg, integ)
        assert zero.value == idle.value
        assert np.array_equal(zero.trajectory.states, idle.trajectory.states)

    def test_accumulated_is_monotone(self, setting, integ):
        result = evaluate_objective(setting, None, ObjectiveConfig(), integ)
        assert np.all(np.diff(result.accumulated) >= 0.0)
        assert result.value == pytest.approx(result.accumulated[-1])

    def test_antibiotics_lower_pathogen(self, setting, integ):
        cfg = ObjectiveConfig()
        idle = evaluate_objective(setting, None, cfg, integ)
        treated = evaluate_objective(setting, ControlSignal.constant(setting.t_f, u_p=1.0), cfg, integ)
        p = STATE_INDEX["P"]
        assert treated.trajectory.states[-1, p] < idle.trajectory.states[-1, p]

    def test_control_grid_must_match(self, setting):
        with pytest.raises(DomainError):
            evaluate_objective(setting, ControlSignal.constant(setting.t_f + 1), ObjectiveConfig())

    def test_result_frame(self, setting, integ):
        frame = evaluate_objective(setting, None, ObjectiveConfig(), integ).to_frame()
        assert list(frame.columns) == ["time", "objective", "accumulated"]
        assert len(frame) == setting.t_f + 1


class TestToyPlant:
    """The linear plant and its reference feedback law."""

    def test_feedback_law_at_origin(self):
        assert ToyLinearPlant.feedback_law(np.zeros(3)) == pytest.approx(0.5)

    def test_feedback_law_saturates(self):
        assert ToyLinearPlant.feedback_law(np.array([-10.0, 0.0, 0.0])) == 1.0
        assert ToyLinearPlant.feedback_law(np.array([10.0, 0.0, 0.0])) == 0.0

    def test_origin_is_equilibrium_at_center(self):
        plant = ToyLinearPlant()
        assert plant.rhs(0.0, np.zeros(3), np.array([0.5, 0.0])) == pytest.approx(np.zeros(3))

    def test_feedback_rollout(self):
        plant = ToyLinearPlant()
        rows, traj = plant.feedback_rollout(np.array([1.0, -0.5, 0.3]), 6)
        assert rows.shape == (6, 2)
        assert np.all((rows[:, 0] >= 0.0) & (rows[:, 0] <= 1.0))
        assert np.all(rows[:, 1] == 0.0)
        assert len(traj) == 7

    def test_feedback_beats_idle_control(self):
        plant = ToyLinearPlant()
        x0 = np.array([1.0, -0.5, 0.3])
        rows, _ = plant.feedback_rollout(x0, 10)
        feedback = plant.evaluate(x0, rows, 0.0, 1.0).value
        idle = plant.evaluate(x0, np.zeros((10, 2)), 0.0, 1.0).value
        assert feedback < idle
