"""
Configuration for the command-line pipeline: scenario presets, run
defaults, phenotype thresholds and artifact names.
"""

from typing import Any, Dict, Tuple

# ---------------------------------------------------------------------------
# Run defaults (desk scale)
# ---------------------------------------------------------------------------

DEFAULT_T_F = 50                # control intervals
DEFAULT_D = 5
DEFAULT_STEP = 1.0              # hours per control interval
DEFAULT_SIM_HOURS = 100.0
DEFAULT_SWEEP_POINTS = 25
DEFAULT_OSCILLATION_HOURS = 600.0
COMPARE_SEEDS = 10
DATASET_SETTINGS = 5
DATASET_SPREAD = 0.2            # relative jitter of sampled initial states
PREDICT_SETTINGS = 5

# ---------------------------------------------------------------------------
# Scenario presets
# ---------------------------------------------------------------------------

# Reference magnitudes that keep the normalized TNF-alpha and HMGB-1 drives O(1).
PRESET_REFERENCE_SCALES: Dict[str, float] = {"T_ref": 1e8, "H_ref": 1e5}

# Initial states start at the pathogen-free balance of the full system;
# ``pathogen_fraction`` sets P(0) as a fraction of P_inf, ``pool_factor``
# scales the resting phagocyte pools and ``initial_updates`` sets
# individual components outright.
PRESETS: Dict[str, Dict[str, Any]] = {
    "pathogen-high": {
        "description": "Weak innate response: the pathogen load stays high while TNF-alpha collapses",
        "scenario": "pathogen",
        "overrides": {"k_pg": 0.6, "u_t": 0.5},
        "pathogen_fraction": 0.1,
        "pool_factor": 0.2,
        "initial_updates": {},
    },
    "tnf-persistent": {
        "description": "Pathogen cleared while TNF-alpha stays high",
        "scenario": "tnf",
        "overrides": {"k_pg": 0.1, "u_t": 0.025},
        "pathogen_fraction": 1e-4,
        "pool_factor": 1.0,
        "initial_updates": {"T": 1e3},
    },
}

# ---------------------------------------------------------------------------
# Phenotype checks
# ---------------------------------------------------------------------------

TRAILING_FRACTION = 0.25        # tail of the run used for trailing means
PATHOGEN_HIGH_RATIO = 0.5       # final P / initial P that still counts as high
TNF_COLLAPSE_RATIO = 0.1        # trailing T / peak T below which TNF has collapsed
PATHOGEN_CLEARED_RATIO = 0.1    # final P / initial P below which P is cleared
TNF_PERSIST_FACTOR = 10.0       # trailing T / initial T above which TNF stays high
TNF_PEAK_REDUCTION = 10.0       # uncontrolled / controlled peak TNF-alpha/IL-10

# ---------------------------------------------------------------------------
# Bifurcation self-test
# ---------------------------------------------------------------------------

SELFTEST_RANGE: Tuple[float, float] = (-1.0, 0.95)
SELFTEST_POINTS = 20
SELFTEST_START_BOX: Tuple[float, float] = (-2.0, 2.0)
SELFTEST_STARTS = 16
SELFTEST_VDP_MU = 1.0
SELFTEST_VDP_HOURS = 100.0
SELFTEST_VDP_PERIOD = 6.6633    # limit-cycle period at mu = 1
SELFTEST_VDP_START: Tuple[float, float] = (2.0, 0.0)

# ---------------------------------------------------------------------------
# Artifacts
# ---------------------------------------------------------------------------

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1
CSV_FLOAT_FORMAT = "%.17g"
