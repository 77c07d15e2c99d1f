"""Exception hierarchy shared by all engines."""


class HolojumpError(Exception):
    """Base class; ``module`` names the engine that raised."""

    module = "holojump"


class ShapeError(HolojumpError, ValueError):
    module = "core"


class DomainError(HolojumpError, ValueError):
    module = "core"


class IntegrationError(HolojumpError, RuntimeError):
    module = "lindblad"


class BudgetError(HolojumpError, RuntimeError):
    module = "jumps"


class ConsistencyError(HolojumpError, RuntimeError):
    module = "gates"


class ConfigError(HolojumpError, ValueError):
    module = "config"


class RangeError(HolojumpError, IndexError):
    module = "holonomy"
