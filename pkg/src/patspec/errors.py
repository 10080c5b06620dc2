"""Exception hierarchy shared across the package."""


class PatspecError(Exception):
    """Base class for all package errors."""


class ConfigError(PatspecError, ValueError):
    """Invalid run configuration or malformed input file."""


class ProvenanceError(PatspecError, ValueError):
    """Objects built on different grids/speeds were combined."""


class SpanError(PatspecError, ValueError):
    """Initial function is not in the finite span of the basis."""


class HorizonError(PatspecError, ValueError):
    """Time grid too short (or too coarse) for the requested integral."""


class NumericalError(PatspecError, RuntimeError):
    """A numerical stage failed (factorization, eigensolve, ...)."""


class EigenSolverError(NumericalError):
    pass


class IllConditionedError(NumericalError):
    pass
