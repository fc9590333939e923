"""
Tests for equilibrium search, stability, sweeps and oscillation analysis.

Reference systems with analytic equilibria and orbits carry the exact
checks; the sepsis subsystems are checked against the hand-solved
pathogen-free equilibrium.
"""

from __future__ import annotations

import json
import os
import sys

import numpy as np
import pytest
from pydantic import ValidationError

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "..", ".."))

from modules.bifurcation.equilibria import (
    classify_stability,
    find_equilibria,
    jacobian,
    richardson_jacobian,
    verify_equilibrium,
)
from modules.bifurcation.models import (
    ClassifyConfig,
    Equilibrium,
    SearchConfig,
    Stability,
)
from modules.bifurcation.oscillation import detect_limit_cycle, loop_closure, phase_export
from modules.bifurcation.sweep import signature, sweep, sweep_family, sweep_points
from modules.bifurcation.systems import (
    damped_oscillator,
    linear_decay,
    pitchfork,
    sepsis_system,
    simulate_system,
    van_der_pol,
)
from modules.errors import DomainError
from modules.integrator.models import IntegratorConfig, Trajectory
from modules.sepsis_model.config import STATE_INDEX
from modules.sepsis_model.dynamics import boundary_equilibrium, state_scales
from modules.sepsis_model.models import ParameterSet, SubsystemId
from modules.sepsis_model.parameters import with_overrides

WIDE = SearchConfig(start_box=(-2.0, 2.0), n_starts=16)


@pytest.fixture
def params():
    return with_overrides(ParameterSet(), {"T_ref": 1e8, "H_ref": 1e5})


@pytest.fixture
def small_search():
    return SearchConfig(n_starts=4)


@pytest.fixture(scope="module")
def vdp_trajectory():
    integ = IntegratorConfig(grid_step=0.05)
    return simulate_system(van_der_pol(1.0), np.array([2.0, 0.0]), 100.0, integ)


# ---------------------------------------------------------------------------
# Equilibria of reference systems
# ---------------------------------------------------------------------------

class TestReferenceEquilibria:
    """Roots and spectra with closed forms."""

    def test_linear_decay_single_root(self):
        eqs = find_equilibria(linear_decay(), search=WIDE)
        assert len(eqs) == 1
        assert eqs[0].state[0] == pytest.approx(0.0, abs=1e-8)
        stability, eigenvalues = classify_stability(eqs[0], linear_decay())
        assert stability is Stability.STABLE
        assert eigenvalues.real == pytest.approx([-1.0], abs=1e-6)

    def test_pitchfork_three_roots(self):
        system = pitchfork(1.0)
        eqs = find_equilibria(system, search=WIDE)
        assert [eq.state[0] for eq in eqs] == pytest.approx([-1.0, 0.0, 1.0], abs=1e-8)
        for eq in eqs:
            assert eq.residual_norm <= WIDE.newton_tol

    def test_pitchfork_spectrum(self):
        system = pitchfork(1.0)
        eqs = find_equilibria(system, search=WIDE)
        for eq in eqs:
            classify_stability(eq, system)
        assert [eq.stability for eq in eqs] == [Stability.STABLE, Stability.UNSTABLE, Stability.STABLE]
        assert [eq.leading_real_part for eq in eqs] == pytest.approx([-2.0, 1.0, -2.0], abs=1e-5)

    def test_marginal_inside_margin(self):
        eq = Equilibrium(param_value=0.0, state=np.zeros(1), state_names=("x",), residual_norm=0.0)
        stability, _ = classify_stability(eq, linear_decay(rate=0.0))
        assert stability is Stability.MARGINAL

    def test_van_der_pol_origin_unstable(self):
        system = van_der_pol(1.0)
        eqs = find_equilibria(system, search=WIDE)
        assert len(eqs) == 1
        stability, eigenvalues = classify_stability(eqs[0], system)
        assert stability is Stability.UNSTABLE
        assert eqs[0].leading_real_part == pytest.approx(0.5, abs=1e-6)

    def test_search_box_must_be_ordered(self):
        with pytest.raises(ValidationError):
            SearchConfig(start_box=(1.0, 0.0))


# ---------------------------------------------------------------------------
# Sepsis subsystems
# ---------------------------------------------------------------------------

class TestSepsisEquilibria:
    """Root search and spectra on the neutrophil subsystem."""

    @pytest.mark.parametrize("k_pg", [0.11, 0.23, 0.35])
    def test_boundary_equilibrium_found(self, params, small_search, k_pg):
        varied = with_overrides(params, {"k_pg": k_pg})
        expected = boundary_equilibrium(SubsystemId.NEUTROPHIL, varied)
        scales = state_scales(varied)
        eqs = find_equilibria(SubsystemId.NEUTROPHIL, varied, small_search)
        gaps = [np.max(np.abs(eq.state - expected) / scales) for eq in eqs]
        assert min(gaps) < 1e-6

    def test_roots_meet_tolerance_and_are_sorted(self, params, small_search):
        eqs = find_equilibria(SubsystemId.NEUTROPHIL, params, small_search)
        assert all(eq.residual_norm <= small_search.newton_tol for eq in eqs)
        p = [eq.component("P") for eq in eqs]
        assert p == sorted(p)
        assert all(np.all(eq.state >= 0.0) for eq in eqs)

    def test_boundary_is_unstable_at_growth_rate(self, params):
        system = sepsis_system(SubsystemId.NEUTROPHIL, params)
        y = boundary_equilibrium(SubsystemId.NEUTROPHIL, params)
        eq = Equilibrium(param_value=params.k_pg, state=y, state_names=system.state_names, residual_norm=0.0)
        stability, _ = classify_stability(eq, system)
        assert stability is Stability.UNSTABLE
        assert eq.leading_real_part == pytest.approx(params.k_pg, abs=1e-4)

    def test_accumulators_are_inactive(self, params):
        system = sepsis_system(SubsystemId.FULL, params)
        assert not system.active[STATE_INDEX["M1"]]
        assert not system.active[STATE_INDEX["M2"]]
        assert len(system.active_indices) == 18

    def test_negative_start_box_rejected(self, params):
        with pytest.raises(DomainError):
            find_equilibria(SubsystemId.NEUTROPHIL, params, SearchConfig(start_box=(-1.0, 1.0)))

    def test_subsystem_needs_params(self):
        with pytest.raises(DomainError):
            find_equilibria(SubsystemId.NEUTROPHIL)

    def test_jacobian_matches_richardson(self, params):
        system = sepsis_system(SubsystemId.NEUTROPHIL, params)
        rng = np.random.default_rng(11)
        for _ in range(5):
            state = system.embed(rng.uniform(0.05, 1.0, size=len(system.active_indices)))
            fd = jacobian(system, state, 1e-6)
            reference = richardson_jacobian(system, state, 1e-6)
            assert np.linalg.norm(fd - reference) <= 1e-5 * np.linalg.norm(reference)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

class TestSweep:
    """Grid sweeps and bracket refinement."""

    def test_pitchfork_branch_structure(self):
        diagram = sweep_family(pitchfork, "pitchfork", "mu", (-1.0, 0.95), 20, WIDE)
        counts = diagram.branch_counts()
        for value, count in zip(diagram.grid, counts):
            assert count == (1 if value < 0 else 3)
        assert diagram.stabilities() == {Stability.STABLE, Stability.UNSTABLE}

    def test_pitchfork_bifurcation_located(self):
        diagram = sweep_family(pitchfork, "pitchfork", "mu", (-1.0, 0.95), 20, WIDE)
        assert len(diagram.detected_bifurcations) == 1
        assert abs(diagram.detected_bifurcations[0]) < 2e-3
        assert diagram.distance_to(0.0) < 2e-3

    def test_grid_order_does_not_matter(self):
        values = [-0.5, 0.3, 0.8, -0.2]
        classify = ClassifyConfig()
        forward = sweep_points(pitchfork, values, WIDE, classify)
        backward = sweep_points(pitchfork, values[::-1], WIDE, classify)[::-1]
        for a, b in zip(forward, backward):
            assert signature(a) == signature(b)
            assert [eq.state[0] for eq in a] == pytest.approx([eq.state[0] for eq in b])

    def test_workers_give_same_result(self):
        values = np.linspace(-1.0, 1.0, 6)
        classify = ClassifyConfig()
        serial = sweep_points(pitchfork, values, WIDE, classify, workers=1)
        pooled = sweep_points(pitchfork, values, WIDE, classify, workers=3)
        assert [signature(p) for p in serial] == [signature(p) for p in pooled]

    def test_range_checked_against_table(self, params):
        with pytest.raises(DomainError):
            sweep(SubsystemId.NEUTROPHIL, params, "k_pg", (0.1, 5.0), 3)

    def test_unknown_parameter(self, params):
        with pytest.raises(DomainError):
            sweep(SubsystemId.NEUTROPHIL, params, "nope", (0.1, 0.2), 3)

    def test_degenerate_grid(self):
        with pytest.raises(DomainError):
            sweep_family(pitchfork, "pitchfork", "mu", (1.0, 1.0), 5)

    def test_sepsis_sweep_exports(self, params, tmp_path):
        search = SearchConfig(n_starts=2)
        diagram = sweep(SubsystemId.NEUTROPHIL, params, "k_pg", (0.2, 0.3), 2, search)
        assert list(diagram.grid) == pytest.approx([0.2, 0.3])
        for value, point in zip(diagram.grid, diagram.equilibria):
            assert point
            assert all(eq.param_value == value for eq in point)

        frame = diagram.to_frame()
        assert {"param_value", "branch_id", "P", "N_f", "stability"} <= set(frame.columns)
        diagram.to_csv(tmp_path / "diagram.csv")
        data = json.loads(diagram.to_json(tmp_path / "diagram.json").read_text())
        assert data["param_name"] == "k_pg"
        assert "detected_bifurcations" in data
        assert len(data["points"]) == 2


class TestVerifyEquilibrium:
    """Re-integration agrees with the stability label."""

    def test_pitchfork_labels_confirmed(self):
        system = pitchfork(1.0)
        for eq in find_equilibria(system, search=WIDE):
            classify_stability(eq, system)
            result = verify_equilibrium(eq, system)
            assert result.consistent
            if eq.stability is Stability.STABLE:
                assert result.max_deviation <= 1e-3
            else:
                assert result.max_deviation > 1e-2


# ---------------------------------------------------------------------------
# Oscillations and phase exports
# ---------------------------------------------------------------------------

class TestLimitCycle:
    """Sustained versus decaying oscillations."""

    def test_van_der_pol_oscillates(self, vdp_trajectory):
        report = detect_limit_cycle(vdp_trajectory)
        assert report.oscillating
        assert not report.low_confidence
        assert report.period == pytest.approx(6.663, rel=0.05)
        assert set(report.variables) == {"x", "v"}

    def test_verdict_stable_under_longer_run(self, vdp_trajectory):
        longer = simulate_system(van_der_pol(1.0), np.array([2.0, 0.0]), 200.0, IntegratorConfig(grid_step=0.05))
        assert detect_limit_cycle(longer).oscillating == detect_limit_cycle(vdp_trajectory).oscillating

    def test_decay_does_not_oscillate(self):
        traj = simulate_system(linear_decay(), np.array([1.0]), 20.0)
        report = detect_limit_cycle(traj)
        assert not report.oscillating
        assert report.low_confidence

    def test_damped_oscillator_does_not_oscillate(self):
        traj = simulate_system(damped_oscillator(0.5), np.array([1.0, 0.0]), 60.0, IntegratorConfig(grid_step=0.05))
        report = detect_limit_cycle(traj, variables=["x"], scales={"x": 1.0})
        assert not report.oscillating
        assert report.variables["x"].decay_ratio < 0.5

    def test_unknown_variable(self, vdp_trajectory):
        with pytest.raises(KeyError):
            detect_limit_cycle(vdp_trajectory, variables=["nope"])


class TestPhaseExport:
    """Projections onto two or three components."""

    def test_point_count_and_columns(self, vdp_trajectory):
        frame = phase_export(vdp_trajectory, ["x", "v"])
        assert len(frame) == len(vdp_trajectory)
        assert list(frame.columns) == ["time", "x", "v", "d_x", "d_v", "mark"]
        assert frame["mark"].sum() >= 2

    def test_constant_trajectory(self):
        traj = Trajectory(
            times=np.arange(5.0),
            states=np.tile([1.0, 2.0, 3.0], (5, 1)),
            controls=np.zeros((4, 2)),
            subsystem=None,
            state_names=("a", "b", "c"),
        )
        frame = phase_export(traj, ["a", "b", "c"])
        assert (frame[["a", "b", "c"]].nunique() == 1).all()
        assert (frame[["d_a", "d_b", "d_c"]] == 0.0).all().all()

    def test_bad_variables(self, vdp_trajectory):
        with pytest.raises(DomainError):
            phase_export(vdp_trajectory, ["x", "nope"])
        with pytest.raises(DomainError):
            phase_export(vdp_trajectory, ["x"])

    def test_van_der_pol_loop_closes(self, vdp_trajectory):
        report = detect_limit_cycle(vdp_trajectory)
        frame = phase_export(vdp_trajectory, ["x", "v"])
        assert loop_closure(frame, ["x", "v"], report.period) <= 0.02
