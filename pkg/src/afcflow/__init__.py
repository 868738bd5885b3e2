"""Finite element solver for scalar conservation laws with algebraic flux correction."""
from .fem import (
    assemble_convection,
    assemble_mass,
    cg_solve,
    interpolate,
    l2_error,
    lump_mass,
)
from .mesh import Mesh, build_uniform_mesh, mesh_quality
from .problems import builtin_flux, builtin_initial, get_problem, manufactured_source
from .timestepping import Integrator, SchemeConfig, integrate

__all__ = [
    "Integrator",
    "Mesh",
    "SchemeConfig",
    "assemble_convection",
    "assemble_mass",
    "build_uniform_mesh",
    "builtin_flux",
    "builtin_initial",
    "cg_solve",
    "get_problem",
    "integrate",
    "interpolate",
    "l2_error",
    "lump_mass",
    "manufactured_source",
    "mesh_quality",
]
