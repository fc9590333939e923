"""
Tests for the recurrent control predictor: BPTT gradients, training on the
toy plant's feedback-law dataset, model files and closed/open rollouts.
"""

from __future__ import annotations

import json
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "..", ".."))

from modules.bo_optimizer.dataset import feedback_dataset, replay_dataset, replay_matches
from modules.bo_optimizer.models import ControlDataset
from modules.control_objectives.models import PlantKind, ScenarioSetting
from modules.control_objectives.plants import ToyLinearPlant
from modules.errors import DatasetError, DomainError, IntegrationError, ModelFileError, TrainingDivergedError
from modules.integrator.models import IntegratorConfig
from modules.rnn_surrogate import training as training_module
from modules.rnn_surrogate.models import OptimizerKind, RnnModel, RolloutMode, TrainConfig, param_count
from modules.rnn_surrogate.network import forward, init_weights, zero_weights
from modules.rnn_surrogate.rollout import predict_window, rollout
from modules.rnn_surrogate.storage import load_model, model_from_dict, model_to_dict, save_model
from modules.rnn_surrogate.training import gradient_check, split_indices, train


def toy_model(weights=None, hidden=4, d=3) -> RnnModel:
    return RnnModel(
        in_dim=3,
        hidden=hidden,
        out_dim=1,
        d=d,
        weights=weights if weights is not None else zero_weights(3, hidden, 1),
        feature_mean=np.zeros(3),
        feature_scale=np.ones(3),
        bounds=np.array([[0.0, 0.0], [1.0, 0.0]]),
        channels=(0,),
        plant=PlantKind.TOY_LINEAR.value,
        scenario="pathogen",
        channel="u_p",
        step=1.0,
    )


def toy_setting(initial=(0.8, -0.5, 0.3), t_f=10, d=2) -> ScenarioSetting:
    return ScenarioSetting(
        setting_id="toy",
        plant=PlantKind.TOY_LINEAR,
        initial=list(initial),
        t_f=t_f,
        d=d,
        step=1.0,
    )


def constant_dataset(value: float, n: int = 60) -> ControlDataset:
    source = feedback_dataset(n, 2, seed=3)
    records = [
        r.model_copy(update={"control": [[value, 0.0], [value, 0.0]]})
        for r in source.records
    ]
    return ControlDataset(header=source.header, records=records)


@pytest.fixture(scope="module")
def feedback_data():
    return feedback_dataset(200, 2, seed=0)


@pytest.fixture(scope="module")
def trained(feedback_data):
    cfg = TrainConfig(hidden=16, epochs=300, learning_rate=0.01, batch_size=16, patience=100, seed=0)
    return train(feedback_data, cfg)


# ---------------------------------------------------------------------------
# Network
# ---------------------------------------------------------------------------

class TestNetwork:
    def test_param_count(self):
        weights = init_weights(5, 7, 2, np.random.default_rng(0))
        assert sum(w.size for w in weights.values()) == param_count(5, 7, 2)
        assert param_count(5, 7, 2) == 6 * 7 + 8 * 7 + 8 * 2

    def test_outputs_in_unit_interval(self):
        rng = np.random.default_rng(1)
        weights = init_weights(3, 6, 2, rng)
        P, _ = forward(weights, rng.normal(size=(9, 3)), 4)
        assert P.shape == (9, 4, 2)
        assert np.all((P > 0) & (P < 1))

    def test_zero_weights_give_half(self):
        P, _ = forward(zero_weights(3, 4, 1), np.ones((2, 3)), 3)
        np.testing.assert_allclose(P, 0.5)

    def test_gradient_check(self):
        rng = np.random.default_rng(2)
        weights = init_weights(3, 4, 2, rng)
        X = rng.normal(size=(5, 3))
        Y = rng.uniform(size=(5, 3, 2))
        report = gradient_check(weights, X, Y, n_coords=40, rng=rng)
        assert report["coordinates"] == 40
        assert report["max_relative_error"] < 1e-4

    def test_gradient_check_restores_weights(self):
        rng = np.random.default_rng(4)
        weights = init_weights(3, 4, 1, rng)
        before = {k: v.copy() for k, v in weights.items()}
        gradient_check(weights, rng.normal(size=(3, 3)), rng.uniform(size=(3, 2, 1)), rng=rng)
        for k in before:
            np.testing.assert_array_equal(weights[k], before[k])


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

class TestSplit:
    def test_split_sizes(self):
        train_idx, val_idx = split_indices(10, 0.8, np.random.default_rng(0))
        assert len(train_idx) == 8 and len(val_idx) == 2
        assert set(train_idx) | set(val_idx) == set(range(10))

    def test_single_pair_validates_on_itself(self):
        train_idx, val_idx = split_indices(1, 0.8, np.random.default_rng(0))
        assert list(train_idx) == [0] and list(val_idx) == [0]

    def test_two_pairs_keep_one_for_validation(self):
        train_idx, val_idx = split_indices(2, 0.99, np.random.default_rng(0))
        assert len(train_idx) == 1 and len(val_idx) == 1


class TestTraining:
    def test_constant_targets(self):
        model, report = train(constant_dataset(0.7, n=80), TrainConfig(hidden=4, epochs=150, learning_rate=0.02,
                                                                   batch_size=16, patience=150))
        assert report.final_val_mse < 1e-4
        rows = predict_window(model, [0.2, -0.1, 0.4])
        np.testing.assert_allclose(rows[:, 0], 0.7, atol=0.02)
        np.testing.assert_array_equal(rows[:, 1], 0.0)

    def test_feedback_law_is_learned(self, trained):
        _, report = trained
        assert report.final_val_mse < 1e-3
        assert report.n_train == 160 and report.n_val == 40

    def test_report_bookkeeping(self, trained):
        _, report = trained
        assert len(report.train_loss) == report.epochs_run + 1
        assert len(report.val_loss) == len(report.epoch_seconds)
        assert report.final_val_mse == min(report.val_loss)
        assert report.final_val_mse <= report.val_loss[0]
        assert report.to_dict()["best_epoch"] == report.best_epoch

    def test_momentum_sgd_improves(self):
        data = feedback_dataset(40, 2, seed=5)
        cfg = TrainConfig(hidden=8, epochs=30, learning_rate=0.1, batch_size=8,
                          optimizer=OptimizerKind.SGD_MOMENTUM)
        _, report = train(data, cfg)
        assert report.final_val_mse < report.val_loss[0]

    def test_training_is_deterministic(self):
        data = feedback_dataset(30, 2, seed=6)
        cfg = TrainConfig(hidden=6, epochs=20, batch_size=8, seed=11)
        a, _ = train(data, cfg)
        b, _ = train(data, cfg)
        np.testing.assert_array_equal(a.flat(), b.flat())

    def test_small_dataset_uses_one_batch(self):
        model, report = train(feedback_dataset(5, 2, seed=7), TrainConfig(hidden=4, epochs=5, batch_size=32))
        assert report.n_train == 4 and report.n_val == 1
        assert model.d == 2 and model.out_dim == 1

    def test_empty_dataset_rejected(self, feedback_data):
        with pytest.raises(DatasetError):
            train(ControlDataset(header=feedback_data.header, records=[]))

    def test_divergence_reports_diagnostics(self, monkeypatch):
        def nan_loss(weights, X, Y):
            return float("nan"), {k: np.zeros_like(v) for k, v in weights.items()}

        monkeypatch.setattr(training_module, "loss_and_grad", nan_loss)
        with pytest.raises(TrainingDivergedError) as excinfo:
            train(feedback_dataset(10, 2, seed=8), TrainConfig(hidden=4, epochs=3, batch_size=4))
        assert excinfo.value.diagnostics["epoch"] == 1
        assert excinfo.value.diagnostics["batch"] == 0

    def test_model_carries_dataset_context(self, trained, feedback_data):
        model, _ = trained
        assert model.plant == feedback_data.header.plant
        assert model.step == feedback_data.header.step
        assert model.integrator == feedback_data.header.integrator
        assert model.n_params == param_count(3, 16, 1)


class TestFeedbackDataset:
    def test_records_follow_the_feedback_law(self):
        data = feedback_dataset(4, 3, seed=1)
        assert data.complete and len(data) == 4
        for record in data.records:
            assert record.control[0][0] == pytest.approx(ToyLinearPlant.feedback_law(record.state))

    def test_replay_reproduces_objectives(self):
        data = feedback_dataset(3, 2, seed=2)
        assert replay_matches(data, replay_dataset(data))

    def test_rejects_empty_request(self):
        with pytest.raises(DomainError):
            feedback_dataset(0, 2)


# ---------------------------------------------------------------------------
# Prediction and rollout
# ---------------------------------------------------------------------------

class TestPredictWindow:
    def test_zero_weights_toy_mid_bound(self):
        rows = predict_window(toy_model(), [0.1, 0.2, 0.3])
        assert rows.shape == (3, 2)
        np.testing.assert_allclose(rows[:, 0], 0.5)
        np.testing.assert_array_equal(rows[:, 1], 0.0)

    def test_zero_weights_sepsis_mid_bound(self):
        n = PlantKind.SEPSIS.state_dim
        model = RnnModel(
            in_dim=n, hidden=3, out_dim=1, d=2,
            weights=zero_weights(n, 3, 1),
            feature_mean=np.zeros(n), feature_scale=np.ones(n),
            bounds=np.array([[0.0, 0.0], [1.0, 0.0]]), channels=(0,),
            plant=PlantKind.SEPSIS.value, scenario="pathogen", channel="u_p", step=1.0,
        )
        rows = predict_window(model, np.full(n, 0.1))
        np.testing.assert_allclose(rows[:, 0], 0.5)
        np.testing.assert_array_equal(rows[:, 1], 0.0)

    def test_saturated_weights_stay_in_bounds(self):
        weights = {k: 100.0 * v for k, v in init_weights(3, 4, 1, np.random.default_rng(9)).items()}
        weights["b_y"] = np.array([50.0])
        model = toy_model(weights)
        for state in np.random.default_rng(10).uniform(-5, 5, size=(10, 3)):
            rows = predict_window(model, state)
            assert np.all(rows[:, 0] >= 0.0) and np.all(rows[:, 0] <= 1.0)

    def test_accepts_scenario_setting(self):
        model = toy_model(d=2)
        setting = toy_setting()
        np.testing.assert_array_equal(predict_window(model, setting), predict_window(model, setting.initial))

    def test_state_dimension_mismatch(self):
        with pytest.raises(DomainError):
            predict_window(toy_model(), [0.1, 0.2, 0.3, 0.4])

    def test_unknown_override(self):
        with pytest.raises(DomainError):
            predict_window(toy_model(), [0.1, 0.2, 0.3], {"k_pg": 1.0})

    def test_predictions_are_deterministic(self, trained):
        model, _ = trained
        state = [0.3, 0.1, -0.2]
        np.testing.assert_array_equal(predict_window(model, state), predict_window(model, state))


class TestRollout:
    def test_closed_loop_matches_feedback_law(self, trained):
        model, _ = trained
        setting = toy_setting()
        plant = ToyLinearPlant()
        integ = IntegratorConfig.model_validate(model.integrator)
        rows, _ = plant.feedback_rollout(setting.initial_array(), setting.t_f, 1.0, integ)
        reference = plant.evaluate(setting.initial_array(), rows, 0.0, 1.0, integ=integ).value

        result = rollout(model, setting)
        assert not result.failed
        assert result.control.n_intervals == setting.t_f
        assert result.objective == pytest.approx(reference, rel=0.1)

    def test_length_contract(self):
        model = toy_model(d=3)
        setting = toy_setting(t_f=3, d=3)
        closed = rollout(model, setting, mode=RolloutMode.CLOSED)
        opened = rollout(model, setting, mode=RolloutMode.OPEN)
        assert closed.control.n_intervals == 3 and opened.control.n_intervals == 3
        assert closed.predictions == 3
        assert opened.predictions == 1

    def test_open_loop_predicts_every_window(self):
        model = toy_model(d=3)
        result = rollout(model, toy_setting(t_f=7, d=3), mode=RolloutMode.OPEN)
        assert result.predictions == 3
        assert result.control.n_intervals == 7

    def test_trajectory_spans_horizon(self):
        result = rollout(toy_model(d=2), toy_setting(t_f=4, d=2))
        assert len(result.trajectory.times) == 5
        assert result.trajectory.times[-1] == pytest.approx(4.0)

    def test_plant_mismatch(self):
        sepsis = ScenarioSetting(initial=[0.1] * PlantKind.SEPSIS.state_dim, t_f=2, d=2)
        with pytest.raises(DomainError):
            rollout(toy_model(d=2), sepsis)

    def test_failure_keeps_completed_intervals(self, monkeypatch):
        calls = {"n": 0}
        original = ToyLinearPlant.simulate

        def flaky(self, x0, rows, t_start, step, integ=None):
            calls["n"] += 1
            if calls["n"] >= 2:
                raise IntegrationError("step size underflow")
            return original(self, x0, rows, t_start, step, integ)

        monkeypatch.setattr(ToyLinearPlant, "simulate", flaky)
        result = rollout(toy_model(d=2), toy_setting(t_f=4, d=2))
        assert result.failed
        assert result.control.n_intervals == 1
        assert result.objective is None
        assert result.trajectory.failure


# ---------------------------------------------------------------------------
# Model files
# ---------------------------------------------------------------------------

class TestModelFiles:
    def test_save_load_predictions_identical(self, trained, tmp_path):
        model, _ = trained
        path = save_model(model, tmp_path / "model.json")
        loaded = load_model(path)
        for state in np.random.default_rng(12).uniform(-1, 1, size=(10, 3)):
            np.testing.assert_array_equal(predict_window(model, state), predict_window(loaded, state))

    def test_weight_count_matches_architecture(self, trained, tmp_path):
        model, _ = trained
        data = json.loads(save_model(model, tmp_path / "model.json").read_text())
        stored = sum(len(entry["values"]) for entry in data["weights"].values())
        arch = data["architecture"]
        assert stored == param_count(arch["in_dim"], arch["hidden"], arch["out_dim"])
        assert arch["n_params"] == stored

    def test_truncated_file(self, tmp_path):
        path = save_model(toy_model(), tmp_path / "model.json")
        text = path.read_text()
        path.write_text(text[: len(text) // 2])
        with pytest.raises(ModelFileError):
            load_model(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ModelFileError):
            load_model(tmp_path / "absent.json")

    def test_version_mismatch(self):
        data = model_to_dict(toy_model())
        data["version"] = 99
        with pytest.raises(ModelFileError):
            model_from_dict(data)

    def test_wrong_weight_shape(self):
        data = model_to_dict(toy_model())
        data["weights"]["W_h"]["shape"] = [2, 8]
        with pytest.raises(ModelFileError):
            model_from_dict(data)

    def test_missing_section(self):
        data = model_to_dict(toy_model())
        del data["features"]
        with pytest.raises(ModelFileError):
            model_from_dict(data)

    def test_zero_scale_rejected(self):
        data = model_to_dict(toy_model())
        data["features"]["scale"] = [1.0, 0.0, 1.0]
        with pytest.raises(ModelFileError):
            model_from_dict(data)
