"""
Configuration for control signals, plants and objectives.

Objective defaults, the scenario-to-channel map, and the toy linear plant
used to check the learning layers against a known feedback law.
"""

from typing import Dict, Tuple

import numpy as np

DEFAULT_W1 = 1.0
DEFAULT_W2 = 1.0
EPSILON_FLOOR = 1e-6            # denominator guard, raw units
DEFAULT_AGGREGATION = "integral"
DEFAULT_HORIZON: Tuple[float, float] = (0.0, 200.0)
DEFAULT_CONTROL_STEP = 1.0      # hours per control interval

# Channel columns in every (n_intervals, 2) control array.
CHANNEL_COLUMNS: Dict[str, int] = {"u_p": 0, "u_T": 1}

# Antibiotics act on pathogen growth; anti-TNF on TNF-alpha release.
SCENARIO_CHANNEL: Dict[str, str] = {"pathogen": "u_p", "tnf": "u_T"}

# ---------------------------------------------------------------------------
# Toy linear plant: x' = A x + B (u - U_CENTER)
# ---------------------------------------------------------------------------

TOY_STATE_NAMES: Tuple[str, ...] = ("x1", "x2", "x3")
TOY_A = np.array([
    [-0.6, 0.2, 0.0],
    [0.0, -0.4, 0.1],
    [0.1, 0.0, -0.3],
])
TOY_B = np.array([0.8, 0.5, 0.3])
TOY_U_CENTER = 0.5
# Known saturated feedback law u = clip(TOY_GAIN_OFFSET + TOY_GAIN @ x, 0, 1)
TOY_GAIN = np.array([-0.3, -0.2, -0.1])
TOY_GAIN_OFFSET = 0.5
