"""Exception hierarchy shared by all modules."""


class GrnError(Exception):
    """Base class for every error raised by grnswitch."""


class DomainError(GrnError, ValueError):
    """An argument lies outside the domain of the operation."""


class ExistenceError(DomainError):
    """The requested object (equilibrium, root, ...) does not exist for these parameters."""


class OverlapError(DomainError):
    """A chart point is not in the overlap of the source and target charts."""


class NumericalError(GrnError, RuntimeError):
    """A numerical procedure failed (non-convergence, step underflow, ...)."""


class ConfigError(GrnError, ValueError):
    """Invalid experiment configuration."""
