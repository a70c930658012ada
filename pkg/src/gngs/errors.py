"""Exception hierarchy shared by all modules."""


class GNGSError(Exception):
    """Base class for every error raised by this package."""


class InvalidStructureError(GNGSError, ValueError):
    pass


class SupercriticalOrderError(GNGSError, ValueError):
    pass


class DegeneratePairError(GNGSError, ValueError):
    pass


class DegenerateInterpolationError(GNGSError, ValueError):
    pass


class InfeasibleExponentError(GNGSError, ValueError):
    pass


class InadmissibleError(GNGSError, ValueError):
    """Index set outside the range where the functionals are well posed."""


class GridMismatchError(GNGSError, ValueError):
    pass


class NumericError(GNGSError, FloatingPointError):
    pass


class DegenerateProjectionError(GNGSError, ValueError):
    pass


class UnsupportedExponentError(GNGSError, ValueError):
    pass


class UnsupportedProblemError(GNGSError, ValueError):
    pass


class SolverDivergenceError(GNGSError, RuntimeError):
    """Raised when the energy becomes non-finite; carries the last finite iterate."""

    def __init__(self, message, iterate=None, dump_path=None):
        super().__init__(message)
        self.iterate = iterate
        self.dump_path = dump_path


class ConfigError(GNGSError, ValueError):
    pass


class SerializationError(GNGSError, ValueError):
    pass
