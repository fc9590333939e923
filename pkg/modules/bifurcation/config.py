"""
Configuration for equilibrium search, stability classification and
oscillation analysis.

Search defaults, classification margins, oscillation thresholds, the
phase planes exported by default and the reference bifurcation loci that
run summaries report distances to.
"""

from typing import Dict, Tuple

# ---------------------------------------------------------------------------
# Equilibrium search
# ---------------------------------------------------------------------------

N_STARTS = 24
START_BOX: Tuple[float, float] = (0.0, 1.0)   # in units of each component's scale
NEWTON_TOL = 1e-8                             # max scaled residual of an accepted root
MAX_ITER = 200                                # root-solver iterations per start
DEDUP_RADIUS = 1e-3                           # max scaled component distance of duplicates
DEFAULT_SEED = 0
NEGATIVE_SLACK = 1e-9                         # scaled tolerance below zero for nonnegative systems

# ---------------------------------------------------------------------------
# Stability
# ---------------------------------------------------------------------------

FD_EPS = 1e-6               # central-difference step, scaled units
STABILITY_MARGIN = 1e-6     # on the leading real part

# Bisection stops once the bracket is this fraction of the swept interval.
REFINE_FRACTION = 1e-3

# ---------------------------------------------------------------------------
# Equilibrium re-integration check
# ---------------------------------------------------------------------------

VERIFY_HOURS = 50.0
VERIFY_PERTURBATION = 1e-6
VERIFY_STABLE_TOL = 1e-3
VERIFY_UNSTABLE_DEPARTURE = 1e-2

# ---------------------------------------------------------------------------
# Oscillations
# ---------------------------------------------------------------------------

OSCILLATION_FLOOR = 1e-4        # fraction of the component scale
SUSTAIN_THRESHOLD = 0.5         # last / previous cycle amplitude
MIN_CYCLES = 4
DIRECTION_MARK_COUNT = 20       # direction marks per phase export

DEFAULT_PHASE_PLANES: Tuple[Tuple[str, ...], ...] = (
    ("P", "N_f"),
    ("P", "N_b"),
    ("P", "N_f", "N_b"),
    ("P", "T", "N_b"),
)

# Parameter values at which published diagrams show a branch change.
REFERENCE_LOCI: Dict[str, float] = {
    "k_pg": 0.175,
    "r_pn": 132.6,
}


def get_reference_locus(param_name: str) -> float:
    """Published bifurcation locus for a swept parameter; raises KeyError if none."""
    if param_name not in REFERENCE_LOCI:
        raise KeyError(f"No reference locus for parameter: {param_name}")
    return REFERENCE_LOCI[param_name]
