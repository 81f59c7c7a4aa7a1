"""Exception hierarchy shared across the package."""


class SffmError(Exception):
    """Base class for all package errors."""


class ValidationError(SffmError):
    """Model or initial-distribution invariants are violated."""


class NumericalError(SffmError):
    """A numerical procedure failed (non-convergence, divergent limit, singularity)."""


class BoundaryConditionError(SffmError):
    """A level-zero boundary condition fails at some derivative order."""

    def __init__(self, order: int, residual: float):
        self.order = order
        self.residual = residual
        super().__init__(
            f"boundary condition fails at order {order} (residual {residual:.3e})"
        )
