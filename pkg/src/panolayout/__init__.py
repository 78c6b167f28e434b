"""Geometric core for joint spherical layout and depth estimation."""

from .boundary import BoundaryVector
from .pano_core import DomainError

__version__ = "0.1.0"

__all__ = ["BoundaryVector", "DomainError", "__version__"]
