"""Exception hierarchy shared by every module of the toolkit."""

from __future__ import annotations


class LpwaError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(LpwaError, ValueError):
    """A scenario file or override could not be parsed or validated."""


class SingularInputError(LpwaError, ValueError):
    """A formula was evaluated at a point where it is undefined."""


class QuadratureError(LpwaError, ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""


class UnsupportedModelError(LpwaError, ValueError):
    """The requested closed form does not apply to the configured model."""


class InfeasibleError(LpwaError):
    """No operating point satisfies the reliability constraint.

    ``reason`` is ``"interference-floor"`` when no transmit power can reach the
    target (densify APs or add bandwidth) and ``"noise-limited"`` when the
    required power exceeds the allowed maximum.
    """

    def __init__(self, message: str, reason: str):
        super().__init__(message)
        self.reason = reason


class NonMonotoneError(LpwaError):
    """Bracketing for a monotone search failed; ``probes`` holds what was seen."""

    def __init__(self, message: str, probes: list[tuple[float, float]] | None = None):
        super().__init__(message)
        self.probes = probes or []
