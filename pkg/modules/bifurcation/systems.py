"""
Autonomous systems for the analysis layer.

Wraps the sepsis subsystems and a handful of textbook systems with known
equilibria and orbits in the common DynamicalSystem interface.
"""

from __future__ import annotations

from typing import Optional, Union

import numpy as np

from modules.bifurcation.models import DynamicalSystem
from modules.errors import DomainError
from modules.integrator.models import IntegratorConfig, Trajectory
from modules.integrator.solvers import make_grid, solve
from modules.sepsis_model.config import ACCUMULATOR_STATES, STATE_INDEX, STATE_NAMES
from modules.sepsis_model.dynamics import boundary_equilibrium, state_scales, subsystem_rhs
from modules.sepsis_model.models import ParameterSet, SubsystemId

SystemLike = Union[SubsystemId, str, DynamicalSystem]


def sepsis_system(subsystem: SubsystemId, params: ParameterSet) -> DynamicalSystem:
    """One of the nested sepsis subsystems at fixed parameters.

    The cumulative M1/M2 counters never feed back, so they are left out of
    the active coordinates and stay at zero.
    """
    subsystem = SubsystemId(subsystem)
    kernel = subsystem_rhs(subsystem)
    active = subsystem.mask.copy()
    for name in ACCUMULATOR_STATES:
        active[STATE_INDEX[name]] = False
    return DynamicalSystem(
        name=subsystem.value,
        state_names=STATE_NAMES,
        rhs=lambda y: kernel(y, params),
        scales=state_scales(params),
        active=active,
        template=np.zeros(len(STATE_NAMES)),
        seeds=[boundary_equilibrium(subsystem, params)],
        nonnegative=True,
        sort_index=STATE_INDEX["P"],
    )


def as_system(system: SystemLike, params: Optional[ParameterSet] = None) -> DynamicalSystem:
    if isinstance(system, DynamicalSystem):
        return system
    if params is None:
        raise DomainError("a parameter set is required for sepsis subsystems")
    return sepsis_system(SubsystemId(system), params)


def _reference(name, names, rhs, scales=None, seeds=None) -> DynamicalSystem:
    n = len(names)
    return DynamicalSystem(
        name=name,
        state_names=tuple(names),
        rhs=rhs,
        scales=np.ones(n) if scales is None else scales,
        active=np.ones(n, dtype=bool),
        template=np.zeros(n),
        seeds=seeds or [],
        nonnegative=False,
    )


# ---------------------------------------------------------------------------
# Reference systems
# ---------------------------------------------------------------------------

def linear_decay(rate: float = 1.0) -> DynamicalSystem:
    """x' = -rate x"""
    return _reference("linear_decay", ("x",), lambda y: -rate * y)


def pitchfork(mu: float) -> DynamicalSystem:
    """x' = mu x - x^3; the origin is a root for every mu."""
    return _reference("pitchfork", ("x",), lambda y: mu * y - y ** 3, seeds=[np.zeros(1)])


def van_der_pol(mu: float = 1.0) -> DynamicalSystem:
    """x' = v, v' = mu (1 - x^2) v - x"""
    def rhs(y: np.ndarray) -> np.ndarray:
        x, v = y
        return np.array([v, mu * (1.0 - x * x) * v - x])
    return _reference("van_der_pol", ("x", "v"), rhs, scales=np.array([2.0, 2.0]))


def damped_oscillator(damping: float = 0.5) -> DynamicalSystem:
    """x'' + damping x' + x = 0 as a first-order system."""
    def rhs(y: np.ndarray) -> np.ndarray:
        x, v = y
        return np.array([v, -damping * v - x])
    return _reference("damped_oscillator", ("x", "v"), rhs)


def logistic(r: float = 0.5, capacity: float = 10.0) -> DynamicalSystem:
    """x' = r x (1 - x / capacity)"""
    system = _reference("logistic", ("x",), lambda y: r * y * (1.0 - y / capacity), scales=np.array([capacity]))
    system.nonnegative = True
    return system


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

def simulate_system(
    system: DynamicalSystem,
    y0: np.ndarray,
    t_end: float,
    integ: Optional[IntegratorConfig] = None,
    grid_step: Optional[float] = None,
) -> Trajectory:
    """Free run of an autonomous system from t = 0."""
    integ = integ or IntegratorConfig()
    times = make_grid(0.0, t_end, grid_step or integ.grid_step)
    states, clamp, _ = solve(
        lambda t, y, u: system.rhs(y),
        np.asarray(y0, dtype=float),
        times,
        integ,
        scales=system.scales,
        nonnegative=system.nonnegative,
    )
    sepsis = system.state_names == STATE_NAMES
    return Trajectory(
        times=times,
        states=states,
        controls=np.zeros((len(times) - 1, 2)),
        subsystem=SubsystemId(system.name) if sepsis else None,
        state_names=system.state_names,
        clamp=clamp,
    )
