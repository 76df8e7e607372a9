"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input lies outside the physically meaningful domain of an operation."""


class ResolutionError(RuntimeError):
    """An iterative solver failed to reach the requested accuracy."""


class GridTooSmallError(ResolutionError):
    """A field does not decay sufficiently before reaching the box edge."""


class ConstructionError(RuntimeError):
    """A derived construction violated one of its own guarantees."""


class InterfaceError(ValueError):
    """Mismatched grids, modes or fields passed between modules."""


class ConfigError(ValueError):
    """Scenario configuration failed validation."""
