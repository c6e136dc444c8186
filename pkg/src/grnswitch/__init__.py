"""Multi-scale analysis toolkit for a two-gene activator-inhibitor network.

Submodules: ``model``, ``charts``, ``reduction``, ``equilibria``, ``pwl``,
``sim``, plus ``config``, ``tables``, ``recipes`` and ``cli`` for the
command-line front end.
"""
__version__ = "0.1.0"

from .errors import ConfigError, DomainError, ExistenceError, GrnError, NumericalError, OverlapError  # noqa: E402
from .model import OSCILLATION_PARAMS, ModelParams, RawParams, State4  # noqa: E402

__all__ = [
    "ModelParams",
    "OSCILLATION_PARAMS",
    "RawParams",
    "State4",
    "GrnError",
    "DomainError",
    "ExistenceError",
    "OverlapError",
    "NumericalError",
    "ConfigError",
    "__version__",
]
