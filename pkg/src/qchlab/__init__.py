"""Numerical verification of Hermitian and QCH Kähler surface constructions."""

from .fields import ScalarField, Point4, parse, FieldDomainError, GridField
from .forms import KForm, wedge, exterior_d, hodge_star
from .frame import Coframe, FrameGeometry
from .hermitian import FrameComplexStructure, HermitianPack, Verdict
from .families import Family, FamilySpec, build
from .solver import Grid2D, ProfileBVP, solve, export_field, export_H

__all__ = [
    "ScalarField", "Point4", "parse", "FieldDomainError", "GridField",
    "KForm", "wedge", "exterior_d", "hodge_star",
    "Coframe", "FrameGeometry",
    "FrameComplexStructure", "HermitianPack", "Verdict",
    "Family", "FamilySpec", "build",
    "Grid2D", "ProfileBVP", "solve", "export_field", "export_H",
]

__version__ = "0.1.0"
