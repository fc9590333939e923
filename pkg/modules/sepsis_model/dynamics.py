"""
Right-hand sides of the three nested sepsis ODE systems.

Array kernels operate on the full 20-component layout (inactive components
are returned as 0) and are what the numerical layers call in their inner
loops. The typed ``rhs_*`` functions wrap them for StateVector inputs.
"""

from __future__ import annotations

import logging
import math
from typing import Callable, Dict

import numpy as np

from modules.errors import DomainError
from modules.sepsis_model.config import SCALE_FLOOR, STATE_DIM, STATE_INDEX, STATE_NAMES
from modules.sepsis_model.models import (
    ControlInput,
    ParameterSet,
    StateDerivative,
    StateVector,
    SubsystemId,
)

logger = logging.getLogger(__name__)

ArrayRhs = Callable[..., np.ndarray]

_NEUTROPHIL, _MONOCYTE, _FULL = 0, 1, 2
_LEVEL = {
    SubsystemId.NEUTROPHIL: _NEUTROPHIL,
    SubsystemId.MONOCYTE: _MONOCYTE,
    SubsystemId.FULL: _FULL,
}


def _gate(x: float, k: float, n: float) -> float:
    # |x| keeps finite-difference probes just below zero real-valued.
    xn = abs(x) ** n
    return xn / (xn + k ** n)


# ---------------------------------------------------------------------------
# Array kernels
# ---------------------------------------------------------------------------

def _derivative(y: np.ndarray, p: ParameterSet, level: int, u_p: float, u_T: float) -> np.ndarray:
    (P, M_kf, M_kb, T, N_R, N_f, N_b, r1, D,
     M_R, M_f, M_b, _M1, _M2, H, C_A, T4, T8, B, A) = (float(v) for v in y)
    n = p.n
    dy = [0.0] * STATE_DIM

    Ps = P / p.P_inf
    Ds = D / p.A_inf
    monocytes = level >= _MONOCYTE
    adaptive = level == _FULL

    hP1 = _gate(Ps, p.k_c1, n)
    hP2 = _gate(Ps, p.k_c2, n)
    bind_k = hP1 * M_kf * Ps
    bind_n = hP2 * N_f * Ps
    # IL-10 divides the whole activation flux: the same inhibited term leaves
    # N_R (M_R) and enters N_f (M_f), in the monocyte system as in the full one.
    inhib = 1.0 + C_A / p.C_inf if monocytes else 1.0
    act = r1 * N_R * (T / p.T_ref + Ps) / inhib

    dP = (
        (1.0 - u_p) * p.k_pg * P * (1.0 - Ps)
        - p.r_pmk * hP1 * M_kf * Ps
        - p.r_pn * hP2 * (N_f + N_b) * Ps
    )
    dM_kf = p.k_mk * M_kf * (1.0 - M_kf / p.K_inf) + p.k_mkub * M_kb - bind_k - p.u_mk * M_kf
    dM_kb = bind_k - p.k_mkub * M_kb
    dT = (
        p.r_t1max * M_kb * M_kb / (p.m_t1 + M_kb)
        + (1.0 - u_T) * p.r_t2max * N_b * N_b / (p.m_t2 + N_b)
        - p.u_t * T
    )
    dN_R = p.k_rd * N_R * (1.0 - N_R / p.N_S) - act - p.u_nr * N_R
    dN_f = act + p.k_nub * N_b - bind_n - p.u_n * N_f
    dN_b = bind_n - p.k_nub * N_b
    dr1 = p.k_r1 * (1.0 + math.tanh(N_f / p.N_S)) - p.u_r1 * r1
    dD = p.r_hn * _gate(Ds, p.k_c3, n) * N_f * Ds * (1.0 - Ds) - p.r_ah * D

    if monocytes:
        Mfs = M_f / p.M_S
        Mbs = M_b / p.M_S
        E1 = p.r_pm * _gate(Ps, p.k_c4, n) * M_f * Ps
        dP -= E1
        dN_b -= p.u_mn * N_b * Mfs

        drive = H / p.H_ref + T / p.T_ref
        if adaptive:
            drive += T4 / p.T_CD4_inf + T8 / p.T_CD8_inf
        act_m = p.r_2 * M_R * drive / inhib

        dM_R = p.k_mr * M_R * (1.0 - M_R / p.M_S) - act_m - p.u_mr * M_R
        dM_f = act_m + p.k_umb * M_b - E1 - p.u_m * M_f
        dM_b = E1 - p.k_umb * M_b
        MbD = M_b + D
        dH = p.r_h1max * MbD * MbD / (p.mh_1 + MbD) - p.u_h * H
        dC_A = p.r_camax * M_b * M_b / (p.C_Ah + M_b) - p.u_ca * C_A

        dy[STATE_INDEX["M_R"]] = dM_R
        dy[STATE_INDEX["M1"]] = E1
        dy[STATE_INDEX["H"]] = dH
        dy[STATE_INDEX["C_A"]] = dC_A

    if adaptive:
        T4s = T4 / p.T_CD4_inf
        T8s = T8 / p.T_CD8_inf
        Bs = B / p.B_inf
        Mkbs = M_kb / p.K_inf
        Nbs = N_b / p.N_S

        cd4_kill = p.r_pcd4 * _gate(Ps, p.k_c6, n) * T4 * Ps
        ab_kill = p.r_pAb * _gate(Ps, p.k_c5, n) * A * Ps
        dP -= cd4_kill + ab_kill

        kill_kb = p.r_Mkbcd8 * _gate(Mkbs, p.k_c6, n) * T8 * Mkbs
        kill_nb = p.r_Nbcd8 * _gate(Nbs, p.k_c7, n) * T8 * Nbs
        kill_mb = p.r_Mbcd8 * _gate(Mbs, p.k_c7, n) * T8 * Mbs
        dM_kb -= kill_kb
        dN_b -= kill_nb

        hMf = _gate(Mfs, p.k_c8, n)
        apc4 = p.r_cd4Mb * hMf * T4 * Mfs
        apc8 = p.r_cd8Mb * hMf * T8 * Mfs
        eat4 = p.k_cd4M * _gate(T4s, p.k_c10, n) * M_f * T4s
        eat8 = p.k_cd8M * _gate(T8s, p.k_c10, n) * M_f * T8s
        E2 = eat4 + eat8

        dM_f -= E2 + apc4 + apc8
        dM_b += E2 + apc4 + apc8 - kill_mb

        dy[STATE_INDEX["M2"]] = E2
        dy[STATE_INDEX["T_CD4"]] = (
            p.k_cd4 * T4 * (1.0 - T4s) + apc4 - eat4 - cd4_kill - p.u_cd4 * T4
        )
        dy[STATE_INDEX["T_CD8"]] = (
            p.k_cd8 * T8 * (1.0 - T8s) + apc8 - eat8
            - kill_kb - kill_nb - kill_mb - p.u_cd8 * T8
        )
        dy[STATE_INDEX["B"]] = (
            p.k_B * B * (1.0 - Bs) + p.r_Bt * _gate(Bs, p.k_c9, n) * T4 * Bs - p.u_B * B
        )
        dy[STATE_INDEX["A"]] = p.r_Abmax * B * B / (p.m_Ab + B) - p.u_Ab * A

    if monocytes:
        dy[STATE_INDEX["M_f"]] = dM_f
        dy[STATE_INDEX["M_b"]] = dM_b

    dy[0:9] = [dP, dM_kf, dM_kb, dT, dN_R, dN_f, dN_b, dr1, dD]
    return np.array(dy, dtype=float)


def neutrophil_rhs(y: np.ndarray, params: ParameterSet, u_p: float = 0.0, u_T: float = 0.0) -> np.ndarray:
    """Neutrophil subsystem on the 20-component layout."""
    return _derivative(y, params, _NEUTROPHIL, u_p, u_T)


def monocyte_rhs(y: np.ndarray, params: ParameterSet, u_p: float = 0.0, u_T: float = 0.0) -> np.ndarray:
    """Monocyte subsystem on the 20-component layout."""
    return _derivative(y, params, _MONOCYTE, u_p, u_T)


def full_rhs(y: np.ndarray, params: ParameterSet, u_p: float = 0.0, u_T: float = 0.0) -> np.ndarray:
    """Full system with adaptive immunity, antibiotic control u_p and anti-TNF control u_T."""
    return _derivative(y, params, _FULL, u_p, u_T)


_KERNELS: Dict[SubsystemId, ArrayRhs] = {
    SubsystemId.NEUTROPHIL: neutrophil_rhs,
    SubsystemId.MONOCYTE: monocyte_rhs,
    SubsystemId.FULL: full_rhs,
}


def subsystem_rhs(subsystem: SubsystemId) -> ArrayRhs:
    """Array kernel ``f(y, params, u_p=0, u_T=0)`` for a subsystem."""
    return _KERNELS[SubsystemId(subsystem)]


# ---------------------------------------------------------------------------
# Typed operations
# ---------------------------------------------------------------------------

def _masked(state: StateVector, subsystem: SubsystemId) -> np.ndarray:
    return np.where(subsystem.mask, state.to_array(), 0.0)


def rhs_neutrophil(state: StateVector, params: ParameterSet) -> StateDerivative:
    """Derivatives of the nine neutrophil-subsystem states."""
    sub = SubsystemId.NEUTROPHIL
    return StateDerivative.from_array(neutrophil_rhs(_masked(state, sub), params), sub)


def rhs_monocyte(state: StateVector, params: ParameterSet) -> StateDerivative:
    """Derivatives of the fifteen monocyte-subsystem states."""
    sub = SubsystemId.MONOCYTE
    return StateDerivative.from_array(monocyte_rhs(_masked(state, sub), params), sub)


def rhs_full(state: StateVector, params: ParameterSet, control: ControlInput) -> StateDerivative:
    """Derivatives of all twenty states under the given control."""
    control.check_bounds(params)
    dy = full_rhs(state.to_array(), params, control.u_p, control.u_T)
    return StateDerivative.from_array(dy, SubsystemId.FULL)


# ---------------------------------------------------------------------------
# Scales and reference states
# ---------------------------------------------------------------------------

def state_scales(params: ParameterSet) -> np.ndarray:
    """Characteristic magnitude of every component.

    Capacities where the model has one, production/degradation balances
    otherwise. Used for norms, tolerances and finite-difference steps.
    """
    p = params
    tnf = max(p.T_ref, (p.r_t1max * p.K_inf + p.r_t2max * p.N_S) / p.u_t)
    hmgb = max(p.H_ref, p.r_h1max * (p.M_S + p.A_inf) / p.u_h)
    values = {
        "P": p.P_inf,
        "M_kf": p.K_inf,
        "M_kb": p.K_inf,
        "T": tnf,
        "N_R": p.N_S,
        "N_f": p.N_S,
        "N_b": p.N_S,
        "r1": 2.0 * p.k_r1 / p.u_r1,
        "D": p.A_inf,
        "M_R": p.M_S,
        "M_f": p.M_S,
        "M_b": p.M_S,
        "M1": p.M_S,
        "M2": p.M_S,
        "H": hmgb,
        "C_A": p.r_camax * p.M_S / p.u_ca,
        "T_CD4": p.T_CD4_inf,
        "T_CD8": p.T_CD8_inf,
        "B": p.B_inf,
        "A": p.r_Abmax * p.B_inf / p.u_Ab,
    }
    return np.maximum(np.array([values[name] for name in STATE_NAMES], dtype=float), SCALE_FLOOR)


def _logistic_balance(capacity: float, growth: float, death: float) -> float:
    if growth <= 0:
        return 0.0
    return capacity * max(0.0, 1.0 - death / growth)


def boundary_equilibrium(subsystem: SubsystemId, params: ParameterSet) -> np.ndarray:
    """Pathogen-free balance state.

    Exact equilibrium of the neutrophil and monocyte subsystems; for the
    full system it is a starting point only, since the T- and B-cell
    pools settle at their own logistic balances.
    """
    subsystem = SubsystemId(subsystem)
    p = params
    y = np.zeros(STATE_DIM)
    y[STATE_INDEX["M_kf"]] = _logistic_balance(p.K_inf, p.k_mk, p.u_mk)
    y[STATE_INDEX["N_R"]] = _logistic_balance(p.N_S, p.k_rd, p.u_nr)
    y[STATE_INDEX["r1"]] = p.k_r1 / p.u_r1
    if subsystem in (SubsystemId.MONOCYTE, SubsystemId.FULL):
        y[STATE_INDEX["M_R"]] = _logistic_balance(p.M_S, p.k_mr, p.u_mr)
    if subsystem is SubsystemId.FULL:
        y[STATE_INDEX["T_CD4"]] = _logistic_balance(p.T_CD4_inf, p.k_cd4, p.u_cd4)
        y[STATE_INDEX["T_CD8"]] = _logistic_balance(p.T_CD8_inf, p.k_cd8, p.u_cd8)
        y[STATE_INDEX["B"]] = _logistic_balance(p.B_inf, p.k_B, p.u_B)
        b = y[STATE_INDEX["B"]]
        y[STATE_INDEX["A"]] = p.r_Abmax * b * b / (p.m_Ab + b) / p.u_Ab
    logger.debug("Boundary equilibrium for %s: %s", subsystem.value, y)
    return y
