"""
Pydantic models and enums for the sepsis model.

ParameterSet carries every rate and capacity constant; StateVector and
StateDerivative name the twenty state components in their fixed order.
"""

from __future__ import annotations

from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationInfo, model_validator

from modules.errors import DomainError
from modules.sepsis_model.config import (
    CAPACITY_PARAMETERS,
    HALF_SATURATION_PARAMETERS,
    NON_RATE_PARAMETERS,
    PARAMETER_REGISTRY,
    STATE_DIM,
    STATE_NAMES,
    SUBSYSTEM_STATES,
)


# ---------------------------------------------------------------------------
# Enums
# ---------------------------------------------------------------------------

class SubsystemId(str, Enum):
    """The three nested ODE systems."""

    NEUTROPHIL = "neutrophil"
    MONOCYTE = "monocyte"
    FULL = "full"

    @property
    def state_names(self) -> Tuple[str, ...]:
        return SUBSYSTEM_STATES[self.value]

    @property
    def mask(self) -> np.ndarray:
        active = set(self.state_names)
        return np.array([name in active for name in STATE_NAMES], dtype=bool)

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

def _param(symbol: str) -> Any:
    spec = PARAMETER_REGISTRY[symbol]
    return Field(spec.default, description=f"{spec.description} [{spec.unit}]")


class ParameterSet(BaseModel):
    """All model constants plus objective weights and control bounds.

    Validation enforces the literature ranges unless the validation context
    carries ``enforce_table_ranges=False``.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    k_pg: float = _param("k_pg")
    P_inf: float = _param("P_inf")
    r_pmk: float = _param("r_pmk")
    n: float = _param("n")
    k_c1: float = _param("k_c1")
    r_pn: float = _param("r_pn")
    k_c2: float = _param("k_c2")
    k_mk: float = _param("k_mk")
    K_inf: float = _param("K_inf")
    k_mkub: float = _param("k_mkub")
    u_mk: float = _param("u_mk")
    r_t1max: float = _param("r_t1max")
    m_t1: float = _param("m_t1")
    r_t2max: float = _param("r_t2max")
    m_t2: float = _param("m_t2")
    u_t: float = _param("u_t")
    k_rd: float = _param("k_rd")
    N_S: float = _param("N_S")
    u_nr: float = _param("u_nr")
    k_nub: float = _param("k_nub")
    u_n: float = _param("u_n")
    k_r1: float = _param("k_r1")
    u_r1: float = _param("u_r1")
    r_hn: float = _param("r_hn")
    k_c3: float = _param("k_c3")
    A_inf: float = _param("A_inf")
    r_ah: float = _param("r_ah")
    C_inf: float = _param("C_inf")
    u_mn: float = _param("u_mn")
    k_mr: float = _param("k_mr")
    M_S: float = _param("M_S")
    r_2: float = _param("r_2")
    u_mr: float = _param("u_mr")
    u_m: float = _param("u_m")
    k_umb: float = _param("k_umb")
    r_pm: float = _param("r_pm")
    k_c4: float = _param("k_c4")
    r_h1max: float = _param("r_h1max")
    mh_1: float = _param("mh_1")
    u_h: float = _param("u_h")
    r_camax: float = _param("r_camax")
    C_Ah: float = _param("C_Ah")
    u_ca: float = _param("u_ca")
    r_pcd4: float = _param("r_pcd4")
    k_c5: float = _param("k_c5")
    k_c6: float = _param("k_c6")
    r_pAb: float = _param("r_pAb")
    r_Mkbcd8: float = _param("r_Mkbcd8")
    r_Nbcd8: float = _param("r_Nbcd8")
    k_c7: float = _param("k_c7")
    r_cd4Mb: float = _param("r_cd4Mb")
    r_cd8Mb: float = _param("r_cd8Mb")
    k_c8: float = _param("k_c8")
    r_Mbcd8: float = _param("r_Mbcd8")
    k_cd4M: float = _param("k_cd4M")
    k_cd8M: float = _param("k_cd8M")
    k_c9: float = _param("k_c9")
    k_c10: float = _param("k_c10")
    k_cd4: float = _param("k_cd4")
    T_CD4_inf: float = _param("T_CD4_inf")
    u_cd4: float = _param("u_cd4")
    k_cd8: float = _param("k_cd8")
    T_CD8_inf: float = _param("T_CD8_inf")
    u_cd8: float = _param("u_cd8")
    k_B: float = _param("k_B")
    B_inf: float = _param("B_inf")
    r_Bt: float = _param("r_Bt")
    u_B: float = _param("u_B")
    r_Abmax: float = _param("r_Abmax")
    m_Ab: float = _param("m_Ab")
    u_Ab: float = _param("u_Ab")
    w1: float = _param("w1")
    w2: float = _param("w2")
    u_pL: float = _param("u_pL")
    u_pU: float = _param("u_pU")
    u_TL: float = _param("u_TL")
    u_TU: float = _param("u_TU")
    T_ref: float = _param("T_ref")
    H_ref: float = _param("H_ref")

    @model_validator(mode="after")
    def _check_invariants(self, info: ValidationInfo) -> "ParameterSet":
        context = info.context or {}
        enforce_ranges = context.get("enforce_table_ranges", True)
        problems: List[str] = []
        for symbol, spec in PARAMETER_REGISTRY.items():
            value = getattr(self, symbol)
            if not np.isfinite(value):
                problems.append(f"{symbol} must be finite")
            elif value < 0:
                problems.append(f"{symbol} must be nonnegative, got {value}")
            elif enforce_ranges and symbol not in NON_RATE_PARAMETERS and not spec.contains(value):
                problems.append(f"{symbol}={value} outside range [{spec.low}, {spec.high}]")
        for symbol in CAPACITY_PARAMETERS + HALF_SATURATION_PARAMETERS:
            if getattr(self, symbol) <= 0:
                problems.append(f"{symbol} divides a state or gates a rate and must be positive")
        if self.n < 1:
            problems.append(f"Hill exponent n must be >= 1, got {self.n}")
        if not 0 <= self.u_pL <= self.u_pU <= 1:
            problems.append("antibiotic bounds must satisfy 0 <= u_pL <= u_pU <= 1")
        if not 0 <= self.u_TL <= self.u_TU <= 1:
            problems.append("anti-TNF bounds must satisfy 0 <= u_TL <= u_TU <= 1")
        if problems:
            raise DomainError("; ".join(problems))
        return self


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------

class _NamedComponents(BaseModel):
    """Twenty named scalars in the fixed state order."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    P: float = 0.0
    M_kf: float = 0.0
    M_kb: float = 0.0
    T: float = 0.0
    N_R: float = 0.0
    N_f: float = 0.0
    N_b: float = 0.0
    r1: float = 0.0
    D: float = 0.0
    M_R: float = 0.0
    M_f: float = 0.0
    M_b: float = 0.0
    M1: float = 0.0
    M2: float = 0.0
    H: float = 0.0
    C_A: float = 0.0
    T_CD4: float = 0.0
    T_CD8: float = 0.0
    B: float = 0.0
    A: float = 0.0
    subsystem: Optional[SubsystemId] = Field(
        None, description="Subsystem tag; components outside its mask must be 0"
    )

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in STATE_NAMES], dtype=float)

    @classmethod
    def from_array(cls, values: Any, subsystem: Optional[SubsystemId] = None):
        arr = np.asarray(values, dtype=float).ravel()
        if arr.shape != (STATE_DIM,):
            raise DomainError(f"expected {STATE_DIM} state components, got {arr.size}")
        data: Dict[str, Any] = dict(zip(STATE_NAMES, (float(v) for v in arr)))
        data["subsystem"] = subsystem
        return cls(**data)

    def as_dict(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in STATE_NAMES}

    @model_validator(mode="after")
    def _check_mask(self):
        if self.subsystem is not None:
            active = set(self.subsystem.state_names)
            stray = [name for name in STATE_NAMES if name not in active and getattr(self, name) != 0.0]
            if stray:
                raise DomainError(
                    f"components {stray} are outside the {self.subsystem.value} subsystem and must be 0"
                )
        return self


class StateVector(_NamedComponents):
    """Immune-system state; every component is a nonnegative level."""

    @model_validator(mode="after")
    def _check_nonnegative(self) -> "StateVector":
        negative = [
            name for name in STATE_NAMES
            if not np.isfinite(getattr(self, name)) or getattr(self, name) < 0.0
        ]
        if negative:
            raise DomainError(f"state components must be nonnegative and finite: {negative}")
        return self


class StateDerivative(_NamedComponents):
    """Time derivative of a StateVector, per hour."""


# ---------------------------------------------------------------------------
# Controls
# ---------------------------------------------------------------------------

class ControlInput(BaseModel):
    """Instantaneous values of the two treatment controls."""

    model_config = ConfigDict(frozen=True)

    u_p: float = Field(0.0, ge=0.0, le=1.0, description="Antibiotic control fraction")
    u_T: float = Field(0.0, ge=0.0, le=1.0, description="Anti-TNF control fraction")

    def check_bounds(self, params: ParameterSet) -> None:
        """Raise DomainError unless both values lie within the parameter bounds."""
        if not params.u_pL <= self.u_p <= params.u_pU:
            raise DomainError(f"u_p={self.u_p} outside [{params.u_pL}, {params.u_pU}]")
        if not params.u_TL <= self.u_T <= params.u_TU:
            raise DomainError(f"u_T={self.u_T} outside [{params.u_TL}, {params.u_TU}]")
