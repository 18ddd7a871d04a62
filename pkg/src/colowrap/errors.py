"""Exception hierarchy. The CLI maps these onto exit codes."""


class ColowrapError(Exception):
    """Base class for all package errors."""


class ParameterError(ColowrapError, ValueError):
    """Invalid configuration or argument value (CLI exit code 2)."""


class InvariantViolation(ColowrapError):
    """A model invariant failed at runtime (CLI exit code 1)."""


class TensorValidationError(InvariantViolation, ValueError):
    """A loss tensor breaks nonnegativity or the per-(t, i) sum bound."""

    def __init__(self, message, t=None, arm=None):
        super().__init__(message)
        self.t = t
        self.arm = arm


class InvalidArmError(ParameterError, IndexError):
    """An arm index outside ``0..K-1``."""


class NumericStateError(InvariantViolation):
    """A policy state holds non-finite values."""


class FeedbackRangeError(ParameterError):
    """A loss fed to a base policy lies outside [0, 1]."""


class CapabilityError(ParameterError):
    """Requested size exceeds what a brute-force oracle supports."""
