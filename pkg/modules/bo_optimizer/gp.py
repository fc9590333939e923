"""
Gaussian-process surrogate with a squared-exponential kernel.

Outputs are standardized before fitting. Hyperparameters are either fixed
or picked by maximum marginal likelihood over a fixed grid. The kernel
matrix is factorized by Cholesky with escalating diagonal jitter.
"""

from __future__ import annotations

import itertools
import logging
import math
from typing import Optional, Tuple, Union

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.spatial.distance import cdist

from modules.bo_optimizer.config import (
    FIXED_LENGTH_SCALE,
    FIXED_NOISE_VARIANCE,
    FIXED_SIGNAL_VARIANCE,
    JITTER_FACTOR,
    JITTER_MAX,
    JITTER_START,
    LENGTH_SCALE_GRID,
    NOISE_VARIANCE_GRID,
    SIGNAL_VARIANCE_GRID,
)
from modules.bo_optimizer.models import GpHyper, HyperPolicy
from modules.errors import DomainError, GpFitError

logger = logging.getLogger(__name__)


def se_kernel(A: np.ndarray, B: np.ndarray, length_scale: float, signal_variance: float) -> np.ndarray:
    """sigma_f^2 exp(-|a - b|^2 / (2 l^2))"""
    sq = cdist(np.atleast_2d(A), np.atleast_2d(B), "sqeuclidean")
    return signal_variance * np.exp(-0.5 * sq / (length_scale * length_scale))


def _factorize(K: np.ndarray) -> Tuple[tuple, float]:
    """Cholesky factor of K, adding jitter until it succeeds."""
    jitter = 0.0
    eye = np.eye(len(K))
    while True:
        try:
            return cho_factor(K + jitter * eye, lower=True), jitter
        except LinAlgError:
            jitter = JITTER_START if jitter == 0.0 else jitter * JITTER_FACTOR
            if jitter > JITTER_MAX:
                raise GpFitError(f"kernel matrix of size {len(K)} not positive definite up to jitter {JITTER_MAX}")
            logger.warning("Kernel matrix not positive definite; retrying with jitter %.1e", jitter)


class GpSurrogate:
    """Exact GP posterior over [0, 1]^d."""

    def __init__(self, X: np.ndarray, y: np.ndarray, hyper: GpHyper) -> None:
        self.X = np.atleast_2d(np.asarray(X, dtype=float))
        self.y = np.asarray(y, dtype=float).ravel()
        self.hyper = hyper
        self.y_mean = float(np.mean(self.y))
        std = float(np.std(self.y))
        self.y_std = std if std > 0 else 1.0
        self.z = (self.y - self.y_mean) / self.y_std

        K = se_kernel(self.X, self.X, hyper.length_scale, hyper.signal_variance)
        K[np.diag_indices_from(K)] += hyper.noise_variance
        self._factor, self.jitter = _factorize(K)
        self.alpha = cho_solve(self._factor, self.z)

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def log_marginal_likelihood(self) -> float:
        L = self._factor[0]
        n = len(self.z)
        return float(
            -0.5 * self.z @ self.alpha
            - np.sum(np.log(np.diag(L)))
            - 0.5 * n * math.log(2.0 * math.pi)
        )

    def predict(self, Xs: np.ndarray, standardized: bool = False) -> Tuple[np.ndarray, np.ndarray]:
        """Posterior (mean, variance) of the latent function at ``Xs``."""
        Xs = np.atleast_2d(np.asarray(Xs, dtype=float))
        if Xs.shape[1] != self.dim:
            raise DomainError(f"query points have {Xs.shape[1]} dims, surrogate has {self.dim}")
        Ks = se_kernel(Xs, self.X, self.hyper.length_scale, self.hyper.signal_variance)
        mean = Ks @ self.alpha
        v = cho_solve(self._factor, Ks.T)
        var = np.maximum(self.hyper.signal_variance - np.sum(Ks * v.T, axis=1), 0.0)
        if standardized:
            return mean, var
        return self.y_mean + self.y_std * mean, self.y_std ** 2 * var


def _hyper_grid():
    for ell, sf2, sn2 in itertools.product(LENGTH_SCALE_GRID, SIGNAL_VARIANCE_GRID, NOISE_VARIANCE_GRID):
        yield GpHyper(ell, sf2, sn2)


def fit_gp(
    X: np.ndarray,
    y: np.ndarray,
    hyper_policy: Union[HyperPolicy, str] = HyperPolicy.GRID,
    hyper: Optional[GpHyper] = None,
) -> GpSurrogate:
    """GP posterior for inputs in [0, 1]^d and finite outputs.

    ``hyper_policy="fixed"`` uses ``hyper`` (or the documented fixed values);
    ``"grid"`` keeps the grid point with the largest marginal likelihood,
    the first one on ties.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if len(X) != len(y) or len(y) < 2:
        raise DomainError(f"need at least two (x, y) pairs of equal count, got {len(X)} and {len(y)}")
    if not np.all(np.isfinite(y)):
        raise DomainError("GP outputs must be finite")
    if np.any(X < -1e-12) or np.any(X > 1 + 1e-12):
        raise DomainError("GP inputs must lie in the unit box")

    if HyperPolicy(hyper_policy) is HyperPolicy.FIXED:
        return GpSurrogate(X, y, hyper or GpHyper(FIXED_LENGTH_SCALE, FIXED_SIGNAL_VARIANCE, FIXED_NOISE_VARIANCE))

    best: Optional[GpSurrogate] = None
    best_lml = -math.inf
    for candidate in _hyper_grid():
        try:
            gp = GpSurrogate(X, y, candidate)
        except GpFitError:
            continue
        lml = gp.log_marginal_likelihood()
        if lml > best_lml:
            best, best_lml = gp, lml
    if best is None:
        raise GpFitError("no grid hyperparameters give a factorizable kernel matrix")
    logger.debug(
        "GP fit on %d points: l=%.3g sf2=%.3g sn2=%.1e lml=%.4g",
        len(y), best.hyper.length_scale, best.hyper.signal_variance, best.hyper.noise_variance, best_lml,
    )
    return best


def lcb(surrogate: GpSurrogate, x: np.ndarray, kappa: float, standardized: bool = False) -> np.ndarray:
    """Lower confidence bound mu(x) - kappa sigma(x); one value per row of ``x``."""
    mean, var = surrogate.predict(x, standardized=standardized)
    return mean - kappa * np.sqrt(var)
