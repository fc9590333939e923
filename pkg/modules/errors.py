"""
Shared exception hierarchy.

Every failure raised by the toolkit derives from SepsisControlError so the
command line can map it to an exit code in one place.
"""

from __future__ import annotations

from typing import Any, Dict, Optional


class SepsisControlError(Exception):
    """Root of all toolkit errors."""


class DomainError(SepsisControlError, ValueError):
    """Raised when an input lies outside the domain of an operation."""


class ConfigError(SepsisControlError):
    """Raised when a configuration or an input artifact is missing or invalid."""


# ---------------------------------------------------------------------------
# Numerical failures
# ---------------------------------------------------------------------------

class IntegrationError(SepsisControlError):
    """Raised when time integration cannot continue."""

    def __init__(self, message: str, t: Optional[float] = None) -> None:
        super().__init__(message)
        self.t = t


class StepSizeUnderflowError(IntegrationError):
    """Raised when the adaptive step falls below the minimum step size."""


class MaxStepsExceededError(IntegrationError):
    """Raised when an integration exceeds its step budget."""


class NonFiniteDerivativeError(IntegrationError):
    """Raised when the right-hand side returns NaN or Inf."""


class NegativityError(IntegrationError):
    """Raised when a state component goes negative beyond tolerance."""


class StabilityError(SepsisControlError):
    """Raised when the eigenvalue computation of a Jacobian fails."""


class GpFitError(SepsisControlError):
    """Raised when the kernel matrix cannot be factorized even with jitter."""


class TrainingDivergedError(SepsisControlError):
    """Raised when the training loss becomes NaN or Inf."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ModelFileError(SepsisControlError):
    """Raised when a model file is corrupt or has an unsupported version."""


class DatasetError(SepsisControlError):
    """Raised when a dataset file is malformed."""
