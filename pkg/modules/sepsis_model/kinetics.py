"""
Elementary rate laws: the Hill gate and normalized concentrations.
"""

from __future__ import annotations

from typing import Dict, Union

import numpy as np

from modules.errors import DomainError
from modules.sepsis_model.config import CONCENTRATION_CAPACITY
from modules.sepsis_model.models import ParameterSet, StateVector

ArrayLike = Union[float, np.ndarray]


def hill(x: ArrayLike, k: float, n: float = 2.0) -> ArrayLike:
    """Saturating gate x^n / (x^n + k^n), in [0, 1) for finite x >= 0."""
    if not k > 0:
        raise DomainError(f"half-saturation constant must be positive, got {k}")
    if n < 1:
        raise DomainError(f"Hill exponent must be >= 1, got {n}")
    xn = x ** n
    return xn / (xn + k ** n)


def concentrations(state: StateVector, params: ParameterSet) -> Dict[str, float]:
    """Each capacity-bearing component divided by its capacity.

    Components without a capacity (r1, M1, M2, A) are not included.
    """
    return {
        name: getattr(state, name) / getattr(params, capacity)
        for name, capacity in CONCENTRATION_CAPACITY.items()
    }
