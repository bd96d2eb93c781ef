"""Exception hierarchy shared by every module.

Errors split in two families that the command line maps to distinct exit
codes: :class:`ValidationError` (bad input, exit 2) and everything else
derived from :class:`IedError` (numerical or Monte Carlo failure, exit 3).
"""


class IedError(Exception):
    """Base class for all package errors."""


class ValidationError(IedError, ValueError):
    """Invalid arguments or model description."""


class ArgumentError(ValidationError):
    pass


class DomainError(ValidationError):
    """Argument outside the region where a function is defined."""


class IncompatibleClassError(ValidationError):
    """IED classes that cannot be combined (differing slowly varying parts)."""


class UnsupportedError(ValidationError, NotImplementedError):
    pass


class IndeterminateError(ValidationError):
    """Stability cannot be decided at working precision."""


class DivergenceError(IedError):
    pass


class EstimationError(IedError):
    pass


class BracketingError(EstimationError):
    pass


class HeavyTailError(EstimationError):
    pass


class ExpansionError(IedError):
    pass


class SamplerError(IedError):
    pass


class ExperimentError(IedError):
    pass
