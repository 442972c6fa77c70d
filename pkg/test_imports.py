#!/usr/bin/env python3
"""
Test imports for PoissonOrbits
"""

import sys
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent / "src"))

print("Testing imports...")

try:
    from src.core.jets import Jet1, dual_jacobian
    from src.core.polynomials import SparsePoly
    print("✓ Jets and polynomials imported successfully")
except ImportError as e:
    print(f"✗ Failed to import jets and polynomials: {e}")

try:
    from src.core.poisson import PoissonSpec, validate_poisson
    from src.core.reduction import build_chart, standard_form
    print("✓ Poisson core and reduction imported successfully")
except ImportError as e:
    print(f"✗ Failed to import Poisson core: {e}")

try:
    from src.core.averaging import AveragedMap
    from src.core.rootfind import find_zeros
    from src.core.verify import poincare_shoot
    print("✓ Averaging, root finding and verification imported successfully")
except ImportError as e:
    print(f"✗ Failed to import analysis modules: {e}")

try:
    from src.core.scenarios import build_scenario
    from src.core.run_archive import RunArchive
    print("✓ Scenarios and archive imported successfully")
except ImportError as e:
    print(f"✗ Failed to import scenarios: {e}")

try:
    from src.cli.main import cli
    print("✓ CLI imported successfully")
except ImportError as e:
    print(f"✗ Failed to import CLI: {e}")

print("\nAll imports completed!")
