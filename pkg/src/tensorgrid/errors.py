"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class OutOfDomainError(ValueError):
    """A point lies outside the computational box."""


class SnapError(ValueError):
    """A point is too far from every grid node to be snapped onto one."""


class SizeGuardError(MemoryError):
    """A dense expansion was refused because it would be too large."""


class ConvergenceError(RuntimeError):
    """An iterative procedure failed to reach its tolerance."""
