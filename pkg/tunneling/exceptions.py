"""Domain errors raised by the tunneling computations.

Every error is a ``ValidationError`` so that callers handling the
framework's validation failures (serializers, management commands) also
handle these. Numeric context is kept on ``details`` for logging.
"""

from typing import Any

from django.core.exceptions import ValidationError


class TunnelingError(ValidationError):
    """Base class for failures of a physical or numerical precondition."""

    default_code = "tunneling_error"

    def __init__(self, message: str, **details: Any) -> None:
        super().__init__(message, code=self.default_code)
        self.details = details

    @property
    def error_type(self) -> str:
        return type(self).__name__


class RegimeViolation(TunnelingError):
    """An approximation was requested outside the regime that licenses it."""

    default_code = "regime_violation"

    def __init__(self, message: str, condition: str, **details: Any) -> None:
        super().__init__(message, condition=condition, **details)
        self.condition = condition


class EvanescentOverflow(TunnelingError):
    default_code = "evanescent_overflow"


class ZeroTransmission(TunnelingError):
    default_code = "zero_transmission"


class ResonantDenominator(TunnelingError):
    default_code = "resonant_denominator"


class PhaseUnwrapFailure(TunnelingError):
    default_code = "phase_unwrap_failure"


class GridTooCoarse(TunnelingError):
    default_code = "grid_too_coarse"


class MultiPeak(TunnelingError):
    """The arrival density has no unique peak, so no delay can be read off."""

    default_code = "multi_peak"


class DegenerateJacobian(TunnelingError):
    default_code = "degenerate_jacobian"


class NonDifferentiablePotential(TunnelingError):
    default_code = "non_differentiable_potential"
