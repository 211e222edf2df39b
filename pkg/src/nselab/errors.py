"""Exception types shared across the package."""


class NseLabError(Exception):
    """Base class for all package errors."""


class GridError(NseLabError):
    """Invalid grid construction or mismatched grids."""


class RankError(NseLabError):
    """Operation applied to a field of the wrong tensor rank."""


class SymbolError(NseLabError):
    """Fourier multiplier symbol produced non-finite values."""


class PartitionError(NseLabError):
    """Dyadic partition does not cover the grid spectrum, or a block
    index is out of range."""


class ExponentError(NseLabError):
    """Exponent relations required by an estimate are violated."""


class QuadratureError(NseLabError):
    """Time quadrature is under-resolved or a trajectory does not
    cover the requested interval."""


class ConfigError(NseLabError):
    """Invalid configuration object."""


class PicardDivergenceError(NseLabError):
    """Picard iteration diverged.  Carries the iterate norm history."""

    def __init__(self, message, norms=None, diffs=None):
        super().__init__(message)
        self.norms = list(norms) if norms is not None else []
        self.diffs = list(diffs) if diffs is not None else []
