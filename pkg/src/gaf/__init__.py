"""Numerical toolkit for the conjugate pair ∂_z̄ψ = uψ̄, ∂_z̄ψ⁺ = −ūψ̄⁺: Pompeiu solver,
ω potential, Moutard transform, conformal pullback and a verification harness."""

from .errors import GafError
from .grid import DENSITY, SCALAR, SPINOR, ComplexField, DiffScheme, FieldWeight, GridDomain, make_grid

__all__ = ["GafError", "GridDomain", "make_grid", "ComplexField", "FieldWeight", "DiffScheme",
           "SCALAR", "SPINOR", "DENSITY"]
__version__ = "0.1.0"
