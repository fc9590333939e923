"""
Configuration for the sepsis immune-response model.

Parameter registry (value, unit, description and literature range for every
rate and capacity), state layout, and subsystem masks.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple


# ---------------------------------------------------------------------------
# Parameter registry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParameterSpec:
    """One row of the parameter table."""

    symbol: str
    default: float
    unit: str
    description: str
    low: Optional[float] = None
    high: Optional[float] = None

    @property
    def ranged(self) -> bool:
        return self.low is not None and self.high is not None

    def contains(self, value: float) -> bool:
        if not self.ranged:
            return True
        return self.low <= value <= self.high


def _spec(symbol: str, default: float, unit: str, description: str,
          low: Optional[float] = None, high: Optional[float] = None) -> ParameterSpec:
    return ParameterSpec(symbol, default, unit, description, low, high)


_PARAMETER_ROWS: List[ParameterSpec] = [
    # Pathogen and Kupffer cells
    _spec("k_pg", 0.23, "1/h", "Pathogen growth rate", 0.0, 3.6),
    _spec("P_inf", 1e8, "cells", "Pathogen carrying capacity"),
    _spec("r_pmk", 0.03, "1/(cell h)", "Rate at which pathogens are killed by Kupffer cells"),
    _spec("n", 2.0, "-", "Hill exponent of pathogen binding"),
    _spec("k_c1", 0.03, "cells/h", "Kupffer cells which phagocytose half of pathogen"),
    _spec("r_pn", 60.0, "1/(cell h)", "Rate at which pathogens are killed by neutrophils", 20.0, 100.0),
    _spec("k_c2", 1.5e-4, "1/h", "Neutrophil concentration which phagocytoses half of pathogen"),
    _spec("k_mk", 1.0075, "1/h", "Proliferation rate of Kupffer cells under inflammation", 0.015, 2.0),
    _spec("K_inf", 18e6, "cells/g", "Kupffer cell carrying capacity", 16e6, 20e6),
    _spec("k_mkub", 0.435, "1/h", "Unbinding rate of bound Kupffer cells", 0.1, 0.77),
    _spec("u_mk", 0.565, "1/h", "Killing rate of free Kupffer cells", 0.23, 0.9),
    # TNF-alpha and neutrophils
    _spec("r_t1max", 10.0, "1/h", "Maximal TNF-alpha release by Kupffer cells"),
    _spec("m_t1", 1e4, "cells", "Kupffer cells at half-maximal TNF-alpha release"),
    _spec("r_t2max", 1000.0, "1/h", "Maximal TNF-alpha release by neutrophils"),
    _spec("m_t2", 1e4, "cells", "Activated neutrophils at half-maximal TNF-alpha release"),
    _spec("u_t", 0.2625, "1/h", "Degradation rate of TNF-alpha", 0.025, 0.5),
    _spec("k_rd", 0.41, "1/h", "Influx rate of neutrophils", 0.1, 0.72),
    _spec("N_S", 3.5e5, "cells", "Maximum amount of neutrophils in liver"),
    _spec("u_nr", 0.0945, "1/h", "Apoptotic rate of resting neutrophils", 0.069, 0.12),
    _spec("k_nub", 0.255, "1/h", "Unbinding rate of activated neutrophils", 0.01, 0.5),
    _spec("u_n", 0.05, "1/h", "Apoptotic rate of activated neutrophils"),
    _spec("k_r1", 3.0, "1/h", "Activation drive of resting neutrophils"),
    _spec("u_r1", 0.003, "1/h", "Degradation rate of the activation rate r1"),
    # Tissue damage
    _spec("r_hn", 9000.0, "1/(cell h)", "Rate at which activated neutrophils kill hepatocytes"),
    _spec("k_c3", 0.04, "cells/h", "Damage concentration at half-maximal killing"),
    _spec("A_inf", 3.2e8, "cells", "Number of hepatocytes in liver"),
    _spec("r_ah", 1.25, "1/h", "Recovery rate of apoptotic hepatocytes", 0.5, 2.0),
    _spec("C_inf", 0.02, "-", "Dissociation constant of IL-10"),
    # Monocytes, HMGB-1 and IL-10
    _spec("u_mn", 200.0, "1/(cell h)", "Rate at which activated neutrophils are killed by monocytes"),
    _spec("k_mr", 0.5, "1/h", "Influx rate of monocytes"),
    _spec("M_S", 5e4, "cells", "Resting monocyte carrying capacity"),
    _spec("r_2", 80.0, "1/h", "Influx rate of monocytes in liver"),
    _spec("u_mr", 0.2, "1/h", "Apoptotic rate of resting monocytes"),
    _spec("u_m", 0.08, "1/h", "Apoptotic rate of activated monocytes"),
    _spec("k_umb", 0.4, "1/h", "Unbinding rate of bound monocytes"),
    _spec("r_pm", 7.0, "1/(cell h)", "Rate at which pathogens are killed by monocytes"),
    _spec("k_c4", 0.002, "cells/h", "Monocytes that phagocytose half of pathogen"),
    _spec("r_h1max", 0.001, "1/h", "Maximal HMGB-1 release"),
    _spec("mh_1", 1e4, "cells", "Monocytes at half-maximal HMGB-1 release"),
    _spec("u_h", 1.75, "1/h", "Degradation rate of HMGB-1", 0.5, 3.0),
    _spec("r_camax", 1e4, "1/h", "Maximal IL-10 release"),
    _spec("C_Ah", 1e4, "cells", "Monocytes at half-maximal IL-10 release"),
    _spec("u_ca", 0.02, "1/h", "Degradation rate of IL-10"),
    # Adaptive immunity
    _spec("r_pcd4", 8.0, "1/(cell h)", "Rate at which pathogens are killed by CD4+ T cells"),
    _spec("k_c5", 0.035, "-", "Antibody concentration which kills half of pathogen"),
    _spec("k_c6", 0.0015, "-", "CD4+ T cell concentration which kills half of pathogen"),
    _spec("r_pAb", 1.0, "1/h", "Rate at which pathogens are killed by antibody"),
    _spec("r_Mkbcd8", 0.25, "1/h", "Rate at which bound Kupffer cells are killed by CD8+ T cells"),
    _spec("r_Nbcd8", 0.25, "1/h", "Rate at which bound neutrophils are killed by CD8+ T cells"),
    _spec("k_c7", 0.0015, "-", "CD8+ T cell concentration which kills half of bound APCs"),
    _spec("r_cd4Mb", 4.0, "1/h", "Rate at which CD4+ T cells bind to activated monocytes"),
    _spec("r_cd8Mb", 4.0, "1/h", "Rate at which CD8+ T cells bind to activated monocytes"),
    _spec("k_c8", 0.0075, "-", "Activated monocyte concentration at half occupation of T cells"),
    _spec("r_Mbcd8", 0.25, "1/h", "Rate at which bound monocytes are killed by CD8+ T cells"),
    _spec("k_cd4M", 1.365, "1/h", "Rate at which bound CD4+ T cells are killed by monocytes", 0.73, 2.0),
    _spec("k_cd8M", 1.365, "1/h", "Rate at which bound CD8+ T cells are killed by monocytes", 0.73, 2.0),
    _spec("k_c9", 0.045, "-", "B cell concentration at half occupation of T cells"),
    _spec("k_c10", 0.018, "-", "Monocyte concentration which kills half of bound T cells"),
    _spec("k_cd4", 0.014, "1/h", "Influx rate of CD4+ T cells"),
    _spec("T_CD4_inf", 27.4e6, "cells", "CD4+ T cell carrying capacity"),
    _spec("u_cd4", 0.000915, "1/h", "Degradation rate of CD4+ T cells", 0.00083, 0.001),
    _spec("k_cd8", 0.0625, "1/h", "Influx rate of CD8+ T cells"),
    _spec("T_CD8_inf", 5e6, "cells", "CD8+ T cell carrying capacity"),
    _spec("u_cd8", 0.000895, "1/h", "Degradation rate of CD8+ T cells", 0.00079, 0.001),
    _spec("k_B", 0.0122, "1/h", "Influx rate of B cells"),
    _spec("B_inf", 28.6e6, "cells", "B cell carrying capacity"),
    _spec("r_Bt", 5.5, "1/h", "Rate at which B cells bind to T cells", 1.0, 10.0),
    _spec("u_B", 0.00014, "1/h", "Degradation rate of B cells", 0.00012, 0.00016),
    _spec("r_Abmax", 0.00053, "1/h", "Maximal antibody production by B cells"),
    _spec("m_Ab", 1e4, "cells", "B cells at half-maximal antibody production"),
    _spec("u_Ab", 0.00675, "1/h", "Degradation rate of antibody", 0.0035, 0.01),
    # Objective weights, control bounds and reference scales
    _spec("w1", 1.0, "-", "Weight of the M1/M2 ratio in the pathogen objective"),
    _spec("w2", 1.0, "-", "Weight of the CD8/CD4 ratio in the pathogen objective"),
    _spec("u_pL", 0.0, "-", "Lower bound of the antibiotic control"),
    _spec("u_pU", 1.0, "-", "Upper bound of the antibiotic control"),
    _spec("u_TL", 0.0, "-", "Lower bound of the anti-TNF control"),
    _spec("u_TU", 1.0, "-", "Upper bound of the anti-TNF control"),
    _spec("T_ref", 1.0, "level", "Reference scale normalizing TNF-alpha in activation drives"),
    _spec("H_ref", 1.0, "level", "Reference scale normalizing HMGB-1 in activation drives"),
]

PARAMETER_REGISTRY: Dict[str, ParameterSpec] = {spec.symbol: spec for spec in _PARAMETER_ROWS}
PARAMETER_NAMES: Tuple[str, ...] = tuple(spec.symbol for spec in _PARAMETER_ROWS)

# Capacities that divide a state; must be strictly positive.
CAPACITY_PARAMETERS: Tuple[str, ...] = (
    "P_inf", "K_inf", "N_S", "A_inf", "C_inf", "M_S",
    "T_CD4_inf", "T_CD8_inf", "B_inf", "T_ref", "H_ref",
)

# Half-saturation constants fed to the Hill gate.
HALF_SATURATION_PARAMETERS: Tuple[str, ...] = tuple(f"k_c{i}" for i in range(1, 11))

NON_RATE_PARAMETERS = ("w1", "w2", "u_pL", "u_pU", "u_TL", "u_TU")


def get_parameter_spec(symbol: str) -> ParameterSpec:
    """Look up a parameter row by symbol. Raises KeyError if not found."""
    if symbol not in PARAMETER_REGISTRY:
        raise KeyError(f"Unknown parameter: {symbol}. Known: {', '.join(PARAMETER_NAMES)}")
    return PARAMETER_REGISTRY[symbol]


# ---------------------------------------------------------------------------
# State layout
# ---------------------------------------------------------------------------

STATE_NAMES: Tuple[str, ...] = (
    "P", "M_kf", "M_kb", "T", "N_R", "N_f", "N_b", "r1", "D",
    "M_R", "M_f", "M_b", "M1", "M2", "H", "C_A",
    "T_CD4", "T_CD8", "B", "A",
)
STATE_INDEX: Dict[str, int] = {name: i for i, name in enumerate(STATE_NAMES)}
STATE_DIM = len(STATE_NAMES)

NEUTROPHIL_STATES: Tuple[str, ...] = STATE_NAMES[:9]
MONOCYTE_STATES: Tuple[str, ...] = NEUTROPHIL_STATES + ("M_R", "M_f", "M_b", "M1", "H", "C_A")
FULL_STATES: Tuple[str, ...] = STATE_NAMES

SUBSYSTEM_STATES: Dict[str, Tuple[str, ...]] = {
    "neutrophil": NEUTROPHIL_STATES,
    "monocyte": MONOCYTE_STATES,
    "full": FULL_STATES,
}

# Cumulative counters: fed by a flux, feed back nowhere.
ACCUMULATOR_STATES: Tuple[str, ...] = ("M1", "M2")

# Denominator of each normalized concentration.
CONCENTRATION_CAPACITY: Dict[str, str] = {
    "P": "P_inf",
    "M_kf": "K_inf",
    "M_kb": "K_inf",
    "T": "T_ref",
    "N_R": "N_S",
    "N_f": "N_S",
    "N_b": "N_S",
    "D": "A_inf",
    "M_R": "M_S",
    "M_f": "M_S",
    "M_b": "M_S",
    "H": "H_ref",
    "C_A": "C_inf",
    "T_CD4": "T_CD4_inf",
    "T_CD8": "T_CD8_inf",
    "B": "B_inf",
}

SCALE_FLOOR = 1.0
