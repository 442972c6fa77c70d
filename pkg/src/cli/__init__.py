"""Command line interface for PoissonOrbits"""

from .main import cli, main

__all__ = ["cli", "main"]
