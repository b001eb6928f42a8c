"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the region where a formula is defined."""


class IdenticallyZeroError(ValueError):
    """Polynomial is zero within tolerance, so it has no isolated roots."""


class AmbiguousClassError(ValueError):
    """Root structure cannot be resolved at the requested tolerance."""


class NotApplicableError(ValueError):
    """The requested lower bound constant is zero (the condition fails)."""


class InsufficientWindowError(ValueError):
    """Time window too short or too early for a decay fit."""


class InstabilityError(RuntimeError):
    """Simulation blew up or violated its stability limit."""

    def __init__(self, message, t):
        super().__init__(f"{message} (t={t:.6g})")
        self.t = t
