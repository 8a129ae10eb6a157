"""Nodal polytopal scheme for the 2D Poisson problem, with a conforming lifting
and consistency-error diagnostics."""

from .dofs import DiscreteSpace, DofMap, DofVector, apply_dirichlet, interpolate, restrict
from .harness import ConvergenceReport, ManufacturedCase, emit_report, get_case, run_study
from .lifting import LagrangeSpace, LiftedFunction, Lifting, verify_all
from .mesh import PolygonalMesh, build_submesh, generate_mesh, load_mesh, regularity_report
from .norms import (coercivity_bracket, consistency_functional, dof_h1_norm, dual_norm, energy_norm,
                    norm_equivalence_probe, norm_grams)
from .scheme import Discretization, assemble, solve

__version__ = "0.1.0"

__all__ = [
    "ConvergenceReport", "DiscreteSpace", "Discretization", "DofMap", "DofVector", "LagrangeSpace",
    "LiftedFunction", "Lifting", "ManufacturedCase", "PolygonalMesh", "apply_dirichlet", "assemble",
    "build_submesh", "coercivity_bracket", "consistency_functional", "dof_h1_norm", "dual_norm",
    "emit_report", "energy_norm", "generate_mesh", "get_case", "interpolate", "load_mesh",
    "norm_equivalence_probe", "norm_grams", "regularity_report", "restrict", "run_study", "solve",
    "verify_all",
]
