"""HDHN 계산기 예외 계층"""


class HdhnError(Exception):
    """Base class for every error raised by this package."""


class DomainError(HdhnError, ValueError):
    """Argument outside the domain where a formula or special function is defined."""


class ConvergenceError(HdhnError, ArithmeticError):
    """Series iteration cap or integration truncation bound exceeded."""


class PreconditionError(DomainError):
    """A closed form was requested outside the conditions it was derived under."""


class DegenerateNetworkError(HdhnError, ValueError):
    """All AP densities are zero where at least one positive density is needed."""


class EmptyWindowError(HdhnError, RuntimeError):
    """No access point fell inside the simulation window."""


class ConfigError(HdhnError, ValueError):
    """Unreadable or invalid network config; ``violations`` lists every problem found."""

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations or [])
