"""Exception hierarchy shared by all plreg modules."""


class PlregError(Exception):
    """Base class for all errors raised by plreg."""


class InvalidParameterError(PlregError, ValueError):
    """A distribution or operation received an out-of-domain parameter."""


class TransformOverflowError(PlregError, FloatingPointError):
    """A feature transform produced a non-finite value."""


class DegenerateWeightsError(PlregError, ValueError):
    """All class scores are zero; probabilities are undefined."""


class InfeasibleStateError(PlregError, RuntimeError):
    """An inference step reached a state with no valid continuation."""


class EmptyChainError(PlregError, ValueError):
    """A posterior summary was requested from a chain with no draws."""


class InsufficientDataError(PlregError, ValueError):
    """A diagnostic needs more data points than were supplied."""


class UndefinedMetricError(PlregError, ValueError):
    """A metric is undefined for the given inputs (e.g. single-class ROC)."""


class SamplerStallError(PlregError, RuntimeError):
    """A rejection sampler exceeded its iteration cap."""


class NumericError(PlregError, ArithmeticError):
    """A numeric intermediate became non-finite."""


class ParseError(PlregError, ValueError):
    """A data or config file could not be parsed."""
