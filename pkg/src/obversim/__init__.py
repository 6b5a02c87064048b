"""Dissipation production for deterministic rotations of Bloch-sphere ensembles."""
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
