"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An input violates a structural invariant (shape, Hermiticity, norm)."""


class PreconditionError(ValueError):
    """An operation was called outside its domain of validity."""


class IntegrationError(RuntimeError):
    """The stochastic integrator lost the state vector (norm collapse)."""
