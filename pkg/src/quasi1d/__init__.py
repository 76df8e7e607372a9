"""Quasi-1D condensate dynamics toolkit.

Simulation and verification suite for the effective one-dimensional
description of strongly transversally confined repulsive bosons: zero-energy
scattering and its compensated shell construction, transverse ground modes,
cubic 1D Schroedinger dynamics, confined 3D dynamics with profile extraction,
and the finite-N counting functionals used to certify condensation rates.
"""

__version__ = "0.1.0"

from . import (  # noqa: F401
    confined3d,
    gpe1d,
    harness,
    manybody,
    scattering,
    snapshots,
    transverse,
)
from .errors import (  # noqa: F401
    ConfigError,
    ConstructionError,
    DomainError,
    GridTooSmallError,
    InterfaceError,
    ResolutionError,
)
