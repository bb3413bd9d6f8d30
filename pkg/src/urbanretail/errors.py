"""Exception hierarchy shared by every module."""


class UrbanRetailError(Exception):
    """Base class for all package errors."""


class GeographyError(UrbanRetailError, ValueError):
    """Invalid geography: bad size, non-metric distances, bad demand."""


class DegenerateStateError(UrbanRetailError, ValueError):
    """State with no populated zone (or otherwise outside the model's domain)."""


class StiffnessError(UrbanRetailError, ArithmeticError):
    """Adaptive integrator step size underflowed.

    The last accepted state is kept on ``state`` so callers can inspect it.
    """

    def __init__(self, message, state=None, t=None):
        super().__init__(message)
        self.state = state
        self.t = t


class ResourceLimitError(UrbanRetailError, RuntimeError):
    """A configurable size cap (group order, chain state count) was exceeded."""


class NumericalError(UrbanRetailError, ArithmeticError):
    """Linear algebra failure (singular solve, eigen-solver breakdown)."""


class UnsupportedGeographyError(UrbanRetailError, ValueError):
    """Operation needs a lattice geography but got a custom one."""
