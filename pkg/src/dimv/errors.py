"""Exception hierarchy shared across the package."""


class DimvError(Exception):
    """Base class for all package errors."""


class DimensionError(DimvError, ValueError):
    pass


class ValidationError(DimvError, ValueError):
    pass


class EstimationError(DimvError):
    """Parameter estimation impossible (e.g. a feature with no observations)."""


class SingularityError(DimvError, ArithmeticError):
    """A linear system that must be solved is (numerically) singular."""


class SelectionError(DimvError):
    pass


class DomainError(DimvError, ValueError):
    pass


class TuningError(DimvError):
    pass


class GenerationError(DimvError):
    pass


class ScoringError(DimvError, ValueError):
    pass


class ModelVersionError(DimvError):
    pass
