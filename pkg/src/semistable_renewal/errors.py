"""Exception types shared across the package."""


class DomainError(ValueError):
    """Argument outside the domain of an operation."""


class ConstructionError(ValueError):
    """A distribution or specification could not be built as requested."""


class PreconditionError(ValueError):
    """A hypothesis required by an asymptotic statement is not met."""


class NumericError(ArithmeticError):
    """Quadrature or series evaluation failed to reach its tolerance."""


class ResourceError(MemoryError):
    """A computation would exceed the configured memory budget."""


class ConfigError(ValueError):
    """Invalid experiment or specification config."""
