"""Equivariant maps from lattice actions on tori to their linear models."""

from .semiconj import SemiconjugacyResult, solve_full
from .spectral import IntMatrix, splitting, weak_hyperbolicity_certificate
from .torusmap import ActionSpec, GridFunction, TorusMap

__all__ = [
    "ActionSpec",
    "GridFunction",
    "IntMatrix",
    "SemiconjugacyResult",
    "TorusMap",
    "solve_full",
    "splitting",
    "weak_hyperbolicity_certificate",
]
__version__ = "0.1.0"
