"""Shared error types for the toolkit."""

from __future__ import annotations

from typing import Any


class SfwmError(Exception):
    """Base class for every error raised by the toolkit."""


class ConfigSchemaError(SfwmError, ValueError):
    """Raised when a run config, CSV or JSON input violates its schema."""


class DomainError(SfwmError, ValueError):
    """Raised when an argument lies outside an operation's domain."""


class ErfOverflowError(DomainError):
    """Raised when a complex erf argument would overflow the intermediate terms."""


class NoPhasematchingError(SfwmError):
    """Raised when the bracketing scan finds no phasematched signal frequency."""


class DegenerateConfigurationError(SfwmError, ValueError):
    """Raised when a dual-pump formula is asked to evaluate at zero pump walk-off."""


class DegenerateInputError(SfwmError, ValueError):
    """Raised when a grid carries no amplitude at all."""


class ContractError(SfwmError):
    """Raised when an object is passed in a state an operation does not accept."""


class ResamplingRequiredError(SfwmError, ValueError):
    """Raised when two grids are compared on different axes."""


class UndefinedEstimatorError(SfwmError, ZeroDivisionError):
    """Raised when a correlation estimator has a zero denominator."""


class InconsistentDataError(SfwmError, ValueError):
    """Raised when measured counts contradict the model's assumptions."""


class IdentifiabilityError(SfwmError):
    """Raised when count data cannot constrain the fit parameters."""


class FitConvergenceError(SfwmError):
    """Raised when the least-squares fit stops without converging."""

    def __init__(self, message: str, last_iterate: Any = None) -> None:
        super().__init__(message)
        self.last_iterate = last_iterate
