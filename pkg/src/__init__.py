"""
PoissonOrbits - Averaging for Perturbed Poisson Systems

Darboux charts, first and second order averaging, zero finding with
stability classification, and Poincare-map verification of the periodic
orbits that bifurcate from a family of centers.
"""

# Import version information
from .version import (
    __version__,
    __version_info__,
    __release_date__,
    __app_name__,
    __app_full_name__,
    __description__,
    __license__,
    __status__,
    __python_requires__,
    get_version_string,
    get_version_info
)

# Make key items available at package level
__all__ = [
    "__version__",
    "__app_name__",
    "get_version_string",
    "get_version_info"
]
