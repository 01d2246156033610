"""Discontinuous Galerkin time-domain solver for 2D TE_z Maxwell with Kerr nonlinearity."""

from kerrdg.mesh import Mesh, build_mesh, mesh_from_edges, shape_regularity
from kerrdg.basis import Basis1D, QuadratureRule, build_basis, eval_modal_1d, gauss_legendre
from kerrdg.fields import Discretization, FieldState, MaterialField
from kerrdg.scenarios import Material, Scenario, cavity_mode, gaussian_pulse, manufactured_kerr

__version__ = "0.1.0"

__all__ = [
    "Basis1D",
    "Discretization",
    "FieldState",
    "Material",
    "MaterialField",
    "Mesh",
    "QuadratureRule",
    "Scenario",
    "build_basis",
    "build_mesh",
    "cavity_mode",
    "eval_modal_1d",
    "gauss_legendre",
    "gaussian_pulse",
    "manufactured_kerr",
    "mesh_from_edges",
    "shape_regularity",
]
