"""
Training of the control predictor on a control dataset.

Minibatch BPTT on the mean squared error of bound-normalized control
windows, with momentum SGD or Adam, global gradient-norm clipping and early
stopping on the validation loss. The best-validation weights are returned.
"""

from __future__ import annotations

import logging
import math
import time
from typing import Dict, Optional, Tuple

import numpy as np

from modules.bo_optimizer.models import ControlDataset
from modules.errors import DatasetError, TrainingDivergedError
from modules.rnn_surrogate.config import (
    ADAM_BETA1,
    ADAM_BETA2,
    ADAM_EPS,
    GRADCHECK_COORDS,
    GRADCHECK_EPS,
    GRADCHECK_FLOOR,
    PARAM_NAMES,
)
from modules.rnn_surrogate.features import dataset_arrays, standardization
from modules.rnn_surrogate.models import OptimizerKind, RnnModel, TrainConfig, TrainReport
from modules.rnn_surrogate.network import Weights, clip_gradients, forward, init_weights, loss_and_grad, mse

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Optimizers
# ---------------------------------------------------------------------------

class MomentumSgd:
    def __init__(self, weights: Weights, lr: float, momentum: float) -> None:
        self.lr = lr
        self.momentum = momentum
        self.velocity = {k: np.zeros_like(v) for k, v in weights.items()}

    def step(self, weights: Weights, grads: Weights) -> None:
        for k in PARAM_NAMES:
            self.velocity[k] = self.momentum * self.velocity[k] - self.lr * grads[k]
            weights[k] += self.velocity[k]


class Adam:
    def __init__(self, weights: Weights, lr: float) -> None:
        self.lr = lr
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in weights.items()}
        self.v = {k: np.zeros_like(v) for k, v in weights.items()}

    def step(self, weights: Weights, grads: Weights) -> None:
        self.t += 1
        c1 = 1.0 - ADAM_BETA1 ** self.t
        c2 = 1.0 - ADAM_BETA2 ** self.t
        for k in PARAM_NAMES:
            self.m[k] = ADAM_BETA1 * self.m[k] + (1.0 - ADAM_BETA1) * grads[k]
            self.v[k] = ADAM_BETA2 * self.v[k] + (1.0 - ADAM_BETA2) * grads[k] ** 2
            weights[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + ADAM_EPS)


def make_optimizer(cfg: TrainConfig, weights: Weights):
    if cfg.optimizer is OptimizerKind.ADAM:
        return Adam(weights, cfg.learning_rate)
    return MomentumSgd(weights, cfg.learning_rate, cfg.momentum)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def split_indices(n: int, train_split: float, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Seeded (train, validation) split; a single pair validates on itself."""
    perm = rng.permutation(n)
    if n < 2:
        return perm, perm
    n_val = min(max(int(round(n * (1.0 - train_split))), 1), n - 1)
    return perm[n_val:], perm[:n_val]


def _diverged(epoch: int, batch: int, loss: float, grad_norm: float) -> TrainingDivergedError:
    diagnostics = {"epoch": epoch, "batch": batch, "loss": loss, "grad_norm": grad_norm}
    return TrainingDivergedError(f"training loss became non-finite at epoch {epoch}, batch {batch}", diagnostics)


def train(
    dataset: ControlDataset,
    cfg: Optional[TrainConfig] = None,
    hidden: Optional[int] = None,
) -> Tuple[RnnModel, TrainReport]:
    """Fit an RnnModel to the dataset's (setting -> window) pairs."""
    cfg = cfg or TrainConfig()
    hidden = hidden or cfg.hidden
    if not dataset.records:
        raise DatasetError("cannot train on an empty dataset")
    header = dataset.header
    X_raw, Y, meta = dataset_arrays(dataset)
    rng = np.random.default_rng(cfg.seed)
    train_idx, val_idx = split_indices(len(X_raw), cfg.train_split, rng)

    mean, scale = standardization(X_raw[train_idx])
    X = (X_raw - mean) / scale
    in_dim, out_dim, d = X.shape[1], Y.shape[2], Y.shape[1]
    weights = init_weights(in_dim, hidden, out_dim, rng)
    optimizer = make_optimizer(cfg, weights)

    batch_size = cfg.batch_size
    if batch_size > len(train_idx):
        logger.info("Batch size %d exceeds %d training pairs; using one batch", batch_size, len(train_idx))
        batch_size = len(train_idx)

    def losses() -> Tuple[float, float]:
        return (
            mse(forward(weights, X[train_idx], d)[0], Y[train_idx]),
            mse(forward(weights, X[val_idx], d)[0], Y[val_idx]),
        )

    train_loss, val_loss = losses()
    report = TrainReport(
        train_loss=[train_loss], val_loss=[val_loss], epoch_seconds=[0.0], best_epoch=0,
        n_train=len(train_idx), n_val=len(val_idx),
    )
    best_weights = {k: v.copy() for k, v in weights.items()}
    stale = 0
    log_every = max(1, cfg.epochs // 10)

    for epoch in range(1, cfg.epochs + 1):
        started = time.perf_counter()
        order = rng.permutation(train_idx)
        for b, lo in enumerate(range(0, len(order), batch_size)):
            batch = order[lo:lo + batch_size]
            loss, grads = loss_and_grad(weights, X[batch], Y[batch])
            if cfg.clip_norm is not None:
                grads, norm = clip_gradients(grads, cfg.clip_norm)
            else:
                norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
            if not (math.isfinite(loss) and math.isfinite(norm)):
                raise _diverged(epoch, b, loss, norm)
            optimizer.step(weights, grads)

        train_loss, val_loss = losses()
        if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
            raise _diverged(epoch, -1, train_loss, math.nan)
        report.train_loss.append(train_loss)
        report.val_loss.append(val_loss)
        report.epoch_seconds.append(time.perf_counter() - started)

        if val_loss < report.val_loss[report.best_epoch]:
            report.best_epoch = epoch
            best_weights = {k: v.copy() for k, v in weights.items()}
            stale = 0
        else:
            stale += 1
        if epoch % log_every == 0 or epoch == cfg.epochs:
            logger.info("Epoch %d: train %.3e, validation %.3e", epoch, train_loss, val_loss)
        if stale >= cfg.patience:
            report.stopped_early = True
            logger.info("Stopping at epoch %d; best validation %.3e at epoch %d",
                        epoch, report.final_val_mse, report.best_epoch)
            break

    model = RnnModel(
        in_dim=in_dim,
        hidden=hidden,
        out_dim=out_dim,
        d=d,
        weights=best_weights,
        feature_mean=mean,
        feature_scale=scale,
        bounds=meta["bounds"],
        channels=meta["channels"],
        plant=header.plant,
        scenario=header.scenario,
        channel=header.channel,
        step=header.step,
        override_keys=meta["override_keys"],
        override_defaults=meta["override_defaults"],
        base_params=dict(header.base_params),
        objective=dict(header.objective),
        integrator=dict(header.integrator),
    )
    logger.info(
        "Trained %d-parameter model on %d pairs: validation MSE %.3e (epoch %d)",
        model.n_params, len(train_idx), report.final_val_mse, report.best_epoch,
    )
    return model, report


# ---------------------------------------------------------------------------
# Gradient check
# ---------------------------------------------------------------------------

def gradient_check(
    weights: Weights,
    X: np.ndarray,
    Y: np.ndarray,
    n_coords: int = GRADCHECK_COORDS,
    eps: float = GRADCHECK_EPS,
    rng: Optional[np.random.Generator] = None,
) -> Dict[str, float]:
    """Largest relative error between BPTT and central differences.

    Errors are measured at ``n_coords`` random flat coordinates as
    |g - fd| / max(|g| + |fd|, floor).
    """
    rng = rng or np.random.default_rng(0)
    _, grads = loss_and_grad(weights, X, Y)
    names = list(PARAM_NAMES)
    sizes = [weights[k].size for k in names]
    total = int(sum(sizes))
    coords = rng.choice(total, size=min(n_coords, total), replace=False)

    worst = 0.0
    for flat_index in coords:
        block = int(np.searchsorted(np.cumsum(sizes), flat_index, side="right"))
        name = names[block]
        local = int(flat_index - (np.cumsum(sizes)[block - 1] if block else 0))
        idx = np.unravel_index(local, weights[name].shape)

        original = weights[name][idx]
        weights[name][idx] = original + eps
        plus = mse(forward(weights, X, Y.shape[1])[0], Y)
        weights[name][idx] = original - eps
        minus = mse(forward(weights, X, Y.shape[1])[0], Y)
        weights[name][idx] = original

        numeric = (plus - minus) / (2.0 * eps)
        analytic = float(grads[name][idx])
        rel = abs(analytic - numeric) / max(abs(analytic) + abs(numeric), GRADCHECK_FLOOR)
        worst = max(worst, rel)
    return {"max_relative_error": worst, "coordinates": float(len(coords))}
