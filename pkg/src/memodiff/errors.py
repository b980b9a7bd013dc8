"""Exception hierarchy shared by every module of the package."""


class MemodiffError(Exception):
    """Base class for all package errors."""


class ConfigurationError(MemodiffError, ValueError):
    """A model or numerical parameter is out of its admissible range."""


class ConfigParseError(ConfigurationError):
    """Malformed configuration text."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class EpsilonValidationError(ConfigurationError):
    """The viscosity coefficient violates monotonicity or boundedness."""


class NonlinearityValidationError(ConfigurationError):
    """The nonlinearity violates f(0)=0, the one-sided bound f' >= -l or its growth bounds."""


class InvalidKernelError(ConfigurationError):
    """The memory kernel fails a pointwise sign condition.

    Attributes
    ----------
    node : float or None
        The s-value of the first offending grid node.
    """

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class ShapeError(MemodiffError, ValueError):
    """Array sizes are inconsistent with the basis or grid."""


class NormRangeError(MemodiffError, ValueError):
    """A Sobolev or interpolation exponent lies outside its supported range."""


class SingularOperatorError(MemodiffError, ZeroDivisionError):
    """A diagonal operator has a vanishing entry."""


class CoverageError(MemodiffError, ValueError):
    """A sampled trajectory does not cover the required time window."""


class DivergenceError(MemodiffError, RuntimeError):
    """The time stepper produced a non-finite state.

    Attributes
    ----------
    step_index : int
        Index of the step that produced the non-finite state.
    t : float
        Time reached by that step.
    """

    def __init__(self, message, step_index, t):
        super().__init__(f"{message} (step {step_index}, t={t:.6g})")
        self.step_index = step_index
        self.t = t


class ComparabilityError(MemodiffError, ValueError):
    """Two trajectories do not share a configuration or time grid."""


class InapplicableOracleError(MemodiffError, ValueError):
    """A reference computation was requested outside its domain of validity."""


class EmptySetError(MemodiffError, ValueError):
    """A set-valued operation received an empty set."""
