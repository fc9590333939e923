"""
Configuration for the recurrent control predictor.
"""

# ---------------------------------------------------------------------------
# Architecture
# ---------------------------------------------------------------------------

DEFAULT_HIDDEN = 32
INIT_SCALE = 1.0            # multiplier on the Glorot uniform limit

# Weight blocks in flat order; shapes use in_dim, hidden, out_dim.
PARAM_NAMES = ("W_x", "b_x", "W_h", "b_h", "W_y", "b_y")

# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

EPOCHS = 200
LEARNING_RATE = 1e-2
BATCH_SIZE = 32
TRAIN_SPLIT = 0.8
PATIENCE = 30
CLIP_NORM = 5.0
MOMENTUM = 0.9
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
DEFAULT_SEED = 0

# ---------------------------------------------------------------------------
# Gradient check
# ---------------------------------------------------------------------------

GRADCHECK_EPS = 1e-6
GRADCHECK_FLOOR = 1e-5      # denominator floor of the relative error
GRADCHECK_COORDS = 10

# ---------------------------------------------------------------------------
# Model files
# ---------------------------------------------------------------------------

MODEL_FORMAT = "rnn-control-predictor"
MODEL_VERSION = 1
