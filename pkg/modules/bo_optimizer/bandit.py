"""
UCB1 bandit over an axis-aligned partition of the unit box.

Each arm is one cell of the partition. Pulling an arm samples a point
uniformly inside its cell; the reward is the negated standardized LCB of
that point, so arms whose cells look promising under the surrogate are
pulled more often.
"""

from __future__ import annotations

import logging
from typing import List, Tuple

import numpy as np

from modules.errors import DomainError

logger = logging.getLogger(__name__)


def _prime_factors(n: int) -> List[int]:
    factors = []
    p = 2
    while p * p <= n:
        while n % p == 0:
            factors.append(p)
            n //= p
        p += 1
    if n > 1:
        factors.append(n)
    return factors


def axis_splits(n_arms: int, d: int) -> Tuple[int, ...]:
    """Divisions per axis whose product is ``n_arms``.

    Prime factors, largest first, go to the axis with the fewest divisions
    so far (lowest axis on ties).
    """
    if n_arms < 1 or d < 1:
        raise DomainError(f"need n_arms >= 1 and d >= 1, got {n_arms}, {d}")
    splits = [1] * d
    for p in sorted(_prime_factors(n_arms), reverse=True):
        axis = int(np.argmin(splits))
        splits[axis] *= p
    return tuple(splits)


class ArmBandit:
    """UCB1 arm selection over box cells.

    UCB(a) = mean_reward(a) + c * sqrt(ln(t + 1) / n_a); untried arms first,
    lowest index on ties.
    """

    def __init__(self, n_arms: int, d: int, exploration: float = 2.0) -> None:
        self.n_arms = n_arms
        self.d = d
        self.exploration = exploration
        self.splits = axis_splits(n_arms, d)
        self._counts = np.zeros(n_arms)
        self._rewards = np.zeros(n_arms)
        self._total_pulls = 0

    @property
    def counts(self) -> np.ndarray:
        return self._counts.copy()

    def cell_bounds(self, arm: int) -> Tuple[np.ndarray, np.ndarray]:
        """(lower, upper) corners of an arm's cell."""
        if not 0 <= arm < self.n_arms:
            raise DomainError(f"invalid arm index: {arm}")
        idx = np.array(np.unravel_index(arm, self.splits), dtype=float)
        width = 1.0 / np.asarray(self.splits, dtype=float)
        return idx * width, (idx + 1.0) * width

    def arm_of(self, x: np.ndarray) -> int:
        """Cell containing ``x``; points on the upper face belong to the last cell."""
        x = np.asarray(x, dtype=float)
        splits = np.asarray(self.splits)
        idx = np.minimum((x * splits).astype(int), splits - 1)
        return int(np.ravel_multi_index(tuple(idx), self.splits))

    def ucb_values(self) -> np.ndarray:
        values = np.full(self.n_arms, np.inf)
        tried = self._counts > 0
        mean = np.zeros(self.n_arms)
        mean[tried] = self._rewards[tried] / self._counts[tried]
        bonus = self.exploration * np.sqrt(np.log(self._total_pulls + 1) / np.maximum(self._counts, 1))
        values[tried] = mean[tried] + bonus[tried]
        return values

    def select_arm(self) -> int:
        untried = np.flatnonzero(self._counts == 0)
        if len(untried):
            return int(untried[0])
        return int(np.argmax(self.ucb_values()))

    def sample(self, arm: int, rng: np.random.Generator) -> np.ndarray:
        lo, hi = self.cell_bounds(arm)
        return lo + rng.random(self.d) * (hi - lo)

    def update(self, arm: int, reward: float) -> None:
        if not 0 <= arm < self.n_arms:
            raise DomainError(f"invalid arm index: {arm}")
        self._counts[arm] += 1
        self._rewards[arm] += reward
        self._total_pulls += 1
