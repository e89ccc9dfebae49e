"""Exception hierarchy shared across the package."""


class MageoError(Exception):
    """Base class for all package errors."""


class GridError(MageoError, ValueError):
    """Invalid grid parameters."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class StencilError(MageoError, IndexError):
    """A stencil would reach past a Dirichlet layer."""


class FieldFormatError(MageoError):
    """Base class for MAFLD file problems."""


class HeaderError(FieldFormatError):
    pass


class UnsupportedVersionError(FieldFormatError):
    pass


class DimensionMismatchError(FieldFormatError):
    pass


class TruncatedPayloadError(FieldFormatError):
    pass


class AdmissibilityError(MageoError):
    """A node has a non-positive slot matrix."""

    def __init__(self, message, node=None, slot=None):
        super().__init__(message)
        self.node = node
        self.slot = slot


class DegenerateEigenvalueError(MageoError):
    pass


class ConvexityError(MageoError, ValueError):
    pass


class SolverError(MageoError):
    """Newton failure; ``eps`` is attached when raised inside a sweep."""

    def __init__(self, message, eps=None, report=None):
        super().__init__(message if eps is None else f"eps={eps:g}: {message}")
        self.eps = eps
        self.report = report


class ConvergenceError(SolverError):
    pass


class LineSearchError(SolverError):
    pass


class ConfigError(MageoError):
    pass
