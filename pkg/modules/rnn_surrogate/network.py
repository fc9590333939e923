"""
Elman recurrence with backpropagation through time.

    a_t = W_x x + b_x + W_h h_{t-1} + b_h,   h_t = tanh(a_t),   h_{-1} = 0
    p_t = sigmoid(W_y h_t + b_y)

The same normalized setting ``x`` drives every one of the ``d`` steps; each
step emits one value in (0, 1) per controlled channel.
"""

from __future__ import annotations

from typing import Dict, Tuple

import numpy as np
from scipy.special import expit

from modules.rnn_surrogate.config import INIT_SCALE, PARAM_NAMES
from modules.rnn_surrogate.models import param_shapes

Weights = Dict[str, np.ndarray]


def init_weights(in_dim: int, hidden: int, out_dim: int, rng: np.random.Generator) -> Weights:
    """Glorot-uniform matrices, zero biases."""
    weights: Weights = {}
    for name, shape in param_shapes(in_dim, hidden, out_dim).items():
        if len(shape) == 1:
            weights[name] = np.zeros(shape)
        else:
            limit = INIT_SCALE * np.sqrt(6.0 / (shape[0] + shape[1]))
            weights[name] = rng.uniform(-limit, limit, shape)
    return weights


def zero_weights(in_dim: int, hidden: int, out_dim: int) -> Weights:
    return {name: np.zeros(shape) for name, shape in param_shapes(in_dim, hidden, out_dim).items()}


def forward(weights: Weights, X: np.ndarray, d: int) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    """Outputs (N, d, out) in (0, 1) and the activations BPTT needs."""
    X = np.atleast_2d(X)
    n = len(X)
    hidden = weights["W_h"].shape[0]
    drive = X @ weights["W_x"].T + weights["b_x"] + weights["b_h"]
    H = np.zeros((n, d + 1, hidden))            # H[:, 0] is h_{-1}
    P = np.empty((n, d, weights["W_y"].shape[0]))
    for t in range(d):
        H[:, t + 1] = np.tanh(drive + H[:, t] @ weights["W_h"].T)
        P[:, t] = expit(H[:, t + 1] @ weights["W_y"].T + weights["b_y"])
    return P, {"X": X, "H": H}


def mse(P: np.ndarray, Y: np.ndarray) -> float:
    return float(np.mean((P - Y) ** 2))


def loss_and_grad(weights: Weights, X: np.ndarray, Y: np.ndarray) -> Tuple[float, Weights]:
    """Mean squared error against targets ``Y`` (N, d, out) and its gradient."""
    d = Y.shape[1]
    P, cache = forward(weights, X, d)
    H = cache["H"]
    X = cache["X"]
    grads = {name: np.zeros_like(weights[name]) for name in PARAM_NAMES}

    dP = 2.0 * (P - Y) / P.size
    dh_next = np.zeros((len(X), weights["W_h"].shape[0]))
    for t in reversed(range(d)):
        h_t = H[:, t + 1]
        dO = dP[:, t] * P[:, t] * (1.0 - P[:, t])
        grads["W_y"] += dO.T @ h_t
        grads["b_y"] += dO.sum(axis=0)
        dh = dO @ weights["W_y"] + dh_next
        da = dh * (1.0 - h_t * h_t)
        grads["W_x"] += da.T @ X
        grads["b_x"] += da.sum(axis=0)
        grads["W_h"] += da.T @ H[:, t]
        grads["b_h"] += da.sum(axis=0)
        dh_next = da @ weights["W_h"]
    return mse(P, Y), grads


def global_norm(grads: Weights) -> float:
    return float(np.sqrt(sum(np.sum(g * g) for g in grads.values())))


def clip_gradients(grads: Weights, max_norm: float) -> Tuple[Weights, float]:
    """Scale all gradients together so their joint norm is at most ``max_norm``."""
    norm = global_norm(grads)
    if norm > max_norm:
        factor = max_norm / norm
        grads = {k: g * factor for k, g in grads.items()}
    return grads, norm
