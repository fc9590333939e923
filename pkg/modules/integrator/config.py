"""
Configuration for the time integrator.

Default tolerances, step sizes and safety factors of the RK4 and
Dormand-Prince (RK45) schemes.
"""

from typing import Tuple

DEFAULT_METHOD = "rk45"
DEFAULT_STEP_H = 0.1            # hours; RK4 substep and RK45 first trial step
DEFAULT_REL_TOL = 1e-9
DEFAULT_ABS_TOL = 1e-12         # multiplied by each component's state scale
DEFAULT_MAX_STEPS = 1_000_000
DEFAULT_NEGATIVITY_MODE = "clamp"
DEFAULT_GRID_STEP = 1.0         # export grid when no control signal is given

# Adaptive step control
SAFETY_FACTOR = 0.9
MIN_STEP_FACTOR = 0.2
MAX_STEP_FACTOR = 5.0
MIN_STEP_RELATIVE = 1e-12       # minimum step = MIN_STEP_RELATIVE * max(1, |t|)

# Convergence measurement
SATURATION_ERROR = 1e-13        # errors below this (relative) are roundoff

CSV_CONTROL_COLUMNS: Tuple[str, str] = ("u_p", "u_T")
