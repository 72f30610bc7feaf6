"""Exception taxonomy shared by all solver modules."""


class WarpcapError(Exception):
    """Base class for all errors raised by this package."""


class InputError(WarpcapError):
    """Malformed or out-of-range user input."""


class DomainError(InputError):
    """A radius (or grid point) falls outside the warp's declared domain."""


class UnsupportedError(WarpcapError):
    """Operation not defined for this manifold (e.g. volume without a pole)."""


class SingularInputError(InputError):
    """Flux constant at or above the lateral-area infimum: slope undefined."""


class NonIntegrableError(WarpcapError):
    """The slope integrand blows up on a set of positive length."""


class DegenerateGeometryError(WarpcapError):
    """No admissible flux constant exists (lateral area vanishes)."""


class ConvergenceError(WarpcapError):
    """Iterative solver failed to converge; carries the last iterate."""

    def __init__(self, message, last_iterate=None, diagnostics=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.diagnostics = diagnostics or {}


class PreconditionError(WarpcapError):
    """A documented operation precondition does not hold."""


class ResolutionError(InputError):
    """Grid too coarse for the requested smoothing length."""
