"""Exception types shared across modules."""


class PreconditionError(ValueError):
    """An operation was called outside its documented domain."""


class ZeroModeError(PreconditionError):
    """Massless negative power applied to a field with a zero mode."""


class UnresolvableRadiusError(PreconditionError):
    """A support radius is below the lattice resolution."""


class WraparoundError(PreconditionError):
    """A support would wrap around the periodic box."""


class HorizonError(PreconditionError):
    """A time argument exceeds the configured horizon."""


class ContainmentError(PreconditionError):
    """A subspace is not contained in the declared ambient."""


class AmbientMismatchError(PreconditionError):
    """Objects belong to different ambient spaces."""


class SectorError(PreconditionError):
    """A datum violates the admissible-sector constraints."""


class GeometryError(PreconditionError):
    """Invalid geometric input (null vector, off-surface point, ...)."""


class ResourceBudgetError(RuntimeError):
    """A computation was refused because it exceeds the memory budget."""
