"""Picard-slab solver for the dissipative Aw-Rascle system on the torus."""
from .grid import Torus
from .offset import (
    LocalPlusNewtonian,
    PowerLaw,
    SingularRational,
    SingularReciprocal,
)

__version__ = "0.1.0"

__all__ = [
    "Torus",
    "PowerLaw",
    "SingularRational",
    "SingularReciprocal",
    "LocalPlusNewtonian",
]
