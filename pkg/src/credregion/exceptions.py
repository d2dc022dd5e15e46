"""Exception hierarchy.

Errors split into configuration/shape problems and numeric or regime
failures; the CLI maps the two families to different exit codes.
"""


class CredRegionError(Exception):
    """Base class for all package errors."""


class ConfigError(CredRegionError, ValueError):
    """Invalid user input or configuration."""


class InvalidDimensionError(ConfigError):
    pass


class ShapeError(ConfigError):
    pass


class NotInformationallyCompleteError(ConfigError):
    pass


class InvalidDistributionError(ConfigError):
    pass


class NumericError(CredRegionError, ArithmeticError):
    """Numerical failure or an input outside the asymptotic regime."""


class DegenerateEnsembleError(NumericError):
    pass


class DegenerateProbabilityError(NumericError):
    pass


class ConvergenceError(NumericError):
    """Iterative solver did not converge; ``last_iterate`` holds its final state."""

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class IllConditionedFisherError(NumericError):
    pass


class DomainError(NumericError, ValueError):
    pass


class OutOfRegimeError(NumericError):
    pass


class ReferenceOutsideError(NumericError):
    pass


class EmptyRegionError(NumericError):
    pass


class StepFailureError(NumericError):
    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class ChainUnhealthyError(NumericError):
    pass


class DataQualityError(NumericError):
    pass


class FeasibilityError(ConfigError):
    pass
