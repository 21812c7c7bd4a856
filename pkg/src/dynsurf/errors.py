"""Exception hierarchy shared across the package."""


class DynsurfError(Exception):
    """Base class for all package-specific errors."""


class DomainError(DynsurfError, ValueError):
    """A parameter value lies outside the valid evaluation domain."""


class GeometryError(DynsurfError):
    """Degenerate or self-intersecting geometry."""


class InputError(DynsurfError):
    """Invalid caller-supplied data (bad files, inconsistent inputs)."""


class ConfigError(InputError):
    """Invalid pipeline configuration."""


class TopologyError(DynsurfError):
    """Mesh connectivity unusable (disconnected, broken boundary)."""


class FeasibilityError(DynsurfError):
    """A constrained fit cannot be satisfied with the given data."""


class ParametrizationError(DynsurfError):
    """Parameter merging produced an unusable station-to-cell mapping."""


class NumericalError(DynsurfError):
    """A linear solve failed or produced non-finite results."""


class RefinementError(DynsurfError):
    """Knot insertion would exceed the allowed multiplicity."""
