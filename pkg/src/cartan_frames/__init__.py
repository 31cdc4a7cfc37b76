"""Numerical moving frames: curve and surface invariants, G-structures and bundles."""
from . import bundle, curves, gstructure, linalg_core, stencils, surfaces
from .errors import CartanFramesError, ComputeError, InputError

__all__ = [
    "bundle",
    "curves",
    "gstructure",
    "linalg_core",
    "stencils",
    "surfaces",
    "CartanFramesError",
    "ComputeError",
    "InputError",
]
__version__ = "0.1.0"
