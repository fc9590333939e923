"""
Tests for the time integrator.

Covers: closed-form reference problems, RK4 order, determinism, control
grids, trajectory export, negativity handling and failure modes.
"""

from __future__ import annotations

import math
import os
import sys

import numpy as np
import pandas as pd
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "..", ".."))

from modules.control_objectives.models import ControlSignal
from modules.errors import (
    DomainError,
    MaxStepsExceededError,
    NegativityError,
    NonFiniteDerivativeError,
)
from modules.integrator.convergence import (
    constant_rate,
    convergence_order,
    exponential_decay,
    grid_errors,
    logistic_growth,
)
from modules.integrator.models import (
    IntegrationMethod,
    IntegratorConfig,
    NegativityMode,
    Trajectory,
)
from modules.integrator.simulation import integrate, integrate_reference
from modules.integrator.solvers import make_grid, solve
from modules.sepsis_model.config import STATE_DIM, STATE_INDEX, STATE_NAMES
from modules.sepsis_model.dynamics import boundary_equilibrium, state_scales
from modules.sepsis_model.models import ParameterSet, StateVector, SubsystemId
from modules.sepsis_model.parameters import with_overrides


@pytest.fixture
def params():
    return with_overrides(ParameterSet(), {"T_ref": 1e8, "H_ref": 1e5})


@pytest.fixture
def rk4():
    return IntegratorConfig(method=IntegrationMethod.RK4, step_h=0.1)


# ---------------------------------------------------------------------------
# Reference problems
# ---------------------------------------------------------------------------

class TestReferenceProblems:
    """Closed-form accuracy of both schemes."""

    def test_decay_rk45_defaults(self):
        traj = integrate_reference(exponential_decay(), IntegratorConfig())
        assert traj.final_state[0] == pytest.approx(math.exp(-1.0), abs=1e-8)

    def test_logistic_rk45_defaults(self):
        errors = grid_errors(logistic_growth(r=0.5, capacity=10.0, x0=1.0, t_end=10.0), IntegratorConfig())
        assert errors[-1] < 1e-6

    def test_stiffened_logistic_tracks_closed_form(self):
        problem = logistic_growth(r=4.0, capacity=10.0, x0=0.1, t_end=10.0)
        cfg = IntegratorConfig()
        traj = integrate_reference(problem, cfg)
        exact = np.array([problem.exact(t)[0] for t in traj.times])
        assert np.all(np.abs(traj.states[:, 0] - exact) <= 10 * cfg.rel_tol * np.abs(exact))

    def test_rk4_order_on_decay(self, rk4):
        report = convergence_order(exponential_decay(), rk4, step_h=0.1)
        assert not report.saturated
        assert 3.8 <= report.order <= 4.2

    def test_rk4_exact_on_constant_rate(self, rk4):
        report = convergence_order(constant_rate(), rk4)
        assert report.saturated
        assert math.isinf(report.order)

    def test_step_halving_behaves_like_order_four(self):
        problem = logistic_growth(r=0.5, capacity=10.0, x0=1.0, t_end=10.0)
        finals = []
        for h in (0.5, 0.25, 0.125):
            cfg = IntegratorConfig(method=IntegrationMethod.RK4, step_h=h)
            finals.append(integrate_reference(problem, cfg).final_state[0])
        first, second = abs(finals[0] - finals[1]), abs(finals[1] - finals[2])
        assert 12.0 < first / second < 20.0


# ---------------------------------------------------------------------------
# Solver mechanics
# ---------------------------------------------------------------------------

class TestSolver:
    """Grids, determinism and failure modes of the generic solver."""

    def test_make_grid_hits_end(self):
        grid = make_grid(0.0, 10.0, 1.0)
        assert len(grid) == 11
        assert grid[-1] == 10.0

    def test_make_grid_degenerate(self):
        assert list(make_grid(3.0, 3.0, 1.0)) == [3.0]

    def test_deterministic(self):
        problem = logistic_growth()
        a = integrate_reference(problem, IntegratorConfig())
        b = integrate_reference(problem, IntegratorConfig())
        assert np.array_equal(a.states, b.states)

    def test_non_finite_derivative_raises(self):
        def f(t, y, u):
            return np.array([np.nan])
        with pytest.raises(NonFiniteDerivativeError):
            solve(f, [1.0], [0.0, 1.0], IntegratorConfig())

    def test_max_steps_exceeded(self):
        cfg = IntegratorConfig(method=IntegrationMethod.RK4, step_h=0.01, max_steps=10)
        with pytest.raises(MaxStepsExceededError):
            solve(lambda t, y, u: -y, [1.0], [0.0, 1.0], cfg)

    def test_reject_mode_raises_on_negativity(self):
        cfg = IntegratorConfig(method=IntegrationMethod.RK4, step_h=1.0, negativity_mode=NegativityMode.REJECT)
        with pytest.raises(NegativityError):
            solve(lambda t, y, u: np.array([-1.0]), [0.5], [0.0, 1.0], cfg)

    def test_clamp_mode_halves_then_fails_on_persistent_drain(self):
        cfg = IntegratorConfig(method=IntegrationMethod.RK4, step_h=1.0)
        with pytest.raises(NegativityError):
            solve(lambda t, y, u: np.array([-1.0]), [0.5], [0.0, 1.0], cfg)

    def test_clamp_mode_recovers_by_halving(self):
        # x' = -20 x^2 overshoots below zero with h=1 but not with smaller steps.
        cfg = IntegratorConfig(method=IntegrationMethod.RK4, step_h=1.0)
        states, clamp, _ = solve(lambda t, y, u: -20.0 * y * y, [1.0], [0.0, 1.0], cfg)
        assert states[-1, 0] >= 0.0
        assert states[-1, 0] == pytest.approx(1.0 / 21.0, abs=5e-3)

    def test_small_negatives_are_zeroed_and_counted(self):
        cfg = IntegratorConfig(method=IntegrationMethod.RK4, step_h=1.0, abs_tol=1e-3)
        states, clamp, _ = solve(lambda t, y, u: np.array([-1.0005]), [1.0], [0.0, 1.0], cfg)
        assert states[-1, 0] == 0.0
        assert clamp.count == 1
        assert clamp.worst == pytest.approx(5e-4, rel=1e-6)

    def test_controls_held_per_interval(self):
        cfg = IntegratorConfig(method=IntegrationMethod.RK4, step_h=0.5)
        controls = np.array([[1.0, 0.0], [3.0, 0.0]])
        states, _, _ = solve(lambda t, y, u: np.array([u[0]]), [0.0], [0.0, 1.0, 2.0], cfg, controls=controls)
        assert states[:, 0] == pytest.approx([0.0, 1.0, 4.0])


# ---------------------------------------------------------------------------
# Sepsis-model integration
# ---------------------------------------------------------------------------

class TestIntegrate:
    """integrate() on the sepsis subsystems."""

    def test_equilibrium_is_constant(self, params):
        y = boundary_equilibrium(SubsystemId.NEUTROPHIL, params)
        x0 = StateVector.from_array(y)
        traj = integrate(SubsystemId.NEUTROPHIL, x0, params, None, (0.0, 20.0))
        scales = state_scales(params)
        drift = np.max(np.abs(traj.states - y) / scales)
        assert drift <= 1e-9

    def test_trajectory_shape_and_grid(self, params):
        x0 = StateVector(P=1e6, M_kf=1e6, N_R=1e5, r1=1000.0)
        cfg = IntegratorConfig(grid_step=2.0, rel_tol=1e-6, abs_tol=1e-9)
        traj = integrate(SubsystemId.NEUTROPHIL, x0, params, None, (0.0, 10.0), cfg)
        assert len(traj) == 6
        assert traj.controls.shape == (5, 2)
        assert np.all(np.diff(traj.times) > 0)
        assert np.all(traj.states >= 0.0)
        assert np.all(traj.states[:, ~SubsystemId.NEUTROPHIL.mask] == 0.0)

    def test_control_grid_used(self, params):
        x0 = StateVector.from_array(boundary_equilibrium(SubsystemId.FULL, params))
        control = ControlSignal.constant(4, u_p=0.5, step=0.5)
        cfg = IntegratorConfig(rel_tol=1e-6, abs_tol=1e-9)
        traj = integrate(SubsystemId.FULL, x0, params, control, (0.0, 2.0), cfg)
        assert list(traj.times) == [0.0, 0.5, 1.0, 1.5, 2.0]
        assert np.all(traj.controls[:, 0] == 0.5)

    def test_partial_span_of_control_grid(self, params):
        x0 = StateVector()
        control = ControlSignal.constant(10)
        traj = integrate(SubsystemId.NEUTROPHIL, x0, params, control, (2.0, 5.0))
        assert list(traj.times) == [2.0, 3.0, 4.0, 5.0]

    def test_control_must_cover_span(self, params):
        with pytest.raises(DomainError):
            integrate(SubsystemId.FULL, StateVector(), params, ControlSignal.constant(3), (0.0, 5.0))

    def test_control_outside_parameter_bounds(self, params):
        narrow = with_overrides(params, {"u_pU": 0.3})
        control = ControlSignal.constant(3, u_p=0.9)
        with pytest.raises(DomainError):
            integrate(SubsystemId.FULL, StateVector(), narrow, control, (0.0, 3.0))

    def test_zero_length_span(self, params):
        x0 = StateVector(P=5.0)
        traj = integrate(SubsystemId.NEUTROPHIL, x0, params, None, (0.0, 0.0))
        assert len(traj) == 1
        assert traj.controls.shape == (0, 2)


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

class TestTrajectoryExport:
    """CSV layout of trajectories."""

    def test_csv_columns(self, tmp_path, params):
        x0 = StateVector(P=1e6, M_kf=1e6, N_R=1e5, r1=1000.0)
        cfg = IntegratorConfig(rel_tol=1e-6, abs_tol=1e-9)
        traj = integrate(SubsystemId.NEUTROPHIL, x0, params, None, (0.0, 3.0), cfg)
        path = traj.to_csv(tmp_path / "traj.csv")
        frame = pd.read_csv(path)
        assert list(frame.columns) == ["time", *STATE_NAMES, "u_p", "u_T"]
        assert len(frame) == 4

    def test_csv_byte_identical_on_rerun(self, tmp_path, params):
        x0 = StateVector(P=1e6, M_kf=1e6, N_R=1e5, r1=1000.0)
        cfg = IntegratorConfig(rel_tol=1e-6, abs_tol=1e-9)
        a = integrate(SubsystemId.NEUTROPHIL, x0, params, None, (0.0, 3.0), cfg).to_csv(tmp_path / "a.csv")
        b = integrate(SubsystemId.NEUTROPHIL, x0, params, None, (0.0, 3.0), cfg).to_csv(tmp_path / "b.csv")
        assert a.read_bytes() == b.read_bytes()

    def test_last_row_repeats_final_control(self):
        traj = Trajectory(
            times=np.array([0.0, 1.0, 2.0]),
            states=np.zeros((3, 1)),
            controls=np.array([[0.1, 0.2], [0.3, 0.4]]),
            subsystem=None,
            state_names=("x",),
        )
        frame = traj.to_frame()
        assert list(frame["u_p"]) == [0.1, 0.3, 0.3]

    def test_column_lookup(self):
        traj = Trajectory(np.array([0.0]), np.array([[2.0]]), np.zeros((0, 2)), None, ("x",))
        assert traj.column("x")[0] == 2.0
        with pytest.raises(KeyError):
            traj.column("y")
