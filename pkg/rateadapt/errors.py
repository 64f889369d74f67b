"""Exception hierarchy shared by the library, CLI and service fronts."""

from typing import Any, Dict, Optional


class RateAdaptError(Exception):
    """Base class for every error raised on purpose by this package."""


class ConfigurationError(RateAdaptError, ValueError):
    """Invalid or unknown configuration value; ``key_path`` names the offending key."""

    def __init__(self, message: str, key_path: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.key_path = key_path

    def __str__(self) -> str:
        if self.key_path:
            return f"{self.key_path}: {self.message}"
        return self.message


class ModelError(RateAdaptError, ValueError):
    """Model precondition violated (e.g. path-loss exponent not above 2)."""


class DegenerateDistributionError(RateAdaptError, ValueError):
    """Meta distribution has (numerically) zero variance; callers fall back to a point mass."""

    def __init__(self, m1: float, m2: float):
        super().__init__(f"degenerate meta distribution (M1={m1!r}, M2={m2!r})")
        self.m1 = m1
        self.m2 = m2


class NumericalError(RateAdaptError, RuntimeError):
    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        self.diagnostics = dict(diagnostics or {})
        if self.diagnostics:
            details = ", ".join(f"{k}={v!r}" for k, v in self.diagnostics.items())
            message = f"{message} ({details})"
        super().__init__(message)


class ChainError(RateAdaptError, RuntimeError):
    """Absorbing chain blocks are inconsistent (dimension mismatch, non-stochastic rows)."""


class InvariantViolation(RateAdaptError, RuntimeError):
    pass


class ClassEvaluationError(RateAdaptError, RuntimeError):
    """Spatial or temporal failure while evaluating one FSD class."""

    def __init__(self, class_index: int, cause: Exception):
        super().__init__(f"class {class_index}: {cause}")
        self.class_index = class_index
        self.cause = cause
