"""
Configuration for the Gaussian-process surrogate, the candidate proposer,
local search, the window driver and dataset files.
"""

from typing import Tuple

# ---------------------------------------------------------------------------
# Window optimizer budget
# ---------------------------------------------------------------------------

DEFAULT_WINDOW = 10         # d, control intervals per window
N_INIT = 10                 # seeded random evaluations before the first fit
N_ITER = 40                 # BO rounds
KAPPA = 2.0                 # LCB exploration weight
N_ARMS = 8
ARM_BATCH = 64
RS_BATCH = 64
UCB_EXPLORATION = 2.0       # bandit bonus constant c in mean + c sqrt(ln t / n)
PARALLEL_EVAL = 1
DEFAULT_SEED = 0

# ---------------------------------------------------------------------------
# Local search
# ---------------------------------------------------------------------------

LS_RADIUS = 0.1             # unit-box perturbation
LS_STEPS = 20               # objective evaluations
LS_SHRINK = 0.5
LS_MIN_RADIUS = 1e-6

# ---------------------------------------------------------------------------
# Gaussian process
# ---------------------------------------------------------------------------

# Maximum-marginal-likelihood search runs over the full product of these grids.
LENGTH_SCALE_GRID: Tuple[float, ...] = (0.05, 0.1, 0.2, 0.4, 0.8, 1.6)
SIGNAL_VARIANCE_GRID: Tuple[float, ...] = (0.5, 1.0, 2.0)
NOISE_VARIANCE_GRID: Tuple[float, ...] = (1e-6, 1e-4, 1e-2)

FIXED_LENGTH_SCALE = 0.3
FIXED_SIGNAL_VARIANCE = 1.0
FIXED_NOISE_VARIANCE = 1e-6

JITTER_START = 1e-10
JITTER_MAX = 1e-4
JITTER_FACTOR = 10.0

# ---------------------------------------------------------------------------
# Dataset files
# ---------------------------------------------------------------------------

DATASET_FORMAT_VERSION = 1
REPLAY_RTOL = 1e-6
REPLAY_ATOL = 1e-9
