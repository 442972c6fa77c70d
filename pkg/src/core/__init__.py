"""Core modules for PoissonOrbits"""

from .averaging import AveragedMap, QuadratureConfig
from .errors import ConfigurationError, NumericalError, PoissonOrbitsError
from .rootfind import NewtonSettings, SearchBox, find_zeros
from .scenarios import build_scenario, cross_check
from .verify import ShootingSettings, continuation_in_epsilon, poincare_shoot

__all__ = [
    "AveragedMap",
    "QuadratureConfig",
    "ConfigurationError",
    "NumericalError",
    "PoissonOrbitsError",
    "NewtonSettings",
    "SearchBox",
    "find_zeros",
    "build_scenario",
    "cross_check",
    "ShootingSettings",
    "continuation_in_epsilon",
    "poincare_shoot",
]
