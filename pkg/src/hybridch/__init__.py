"""Hybrid finite-volume / discontinuous Galerkin solver for convective Cahn-Hilliard flow."""

__version__ = "0.1.0"

from .basis import BasisSet, gauss_rule
from .cahn_hilliard import ChParams, ChState, ch_step, initial_state
from .coupling import CoupledSolver, CoupledState, coupled_step, dg_to_fvm, fvm_to_dg
from .field import DgField, FvField, FvVectorField, l2_error, project_function
from .fvm_ns import NsParams, NsState, ns_step
from .mesh import build_cartesian_mesh

__all__ = [
    "BasisSet",
    "ChParams",
    "ChState",
    "CoupledSolver",
    "CoupledState",
    "DgField",
    "FvField",
    "FvVectorField",
    "NsParams",
    "NsState",
    "build_cartesian_mesh",
    "ch_step",
    "coupled_step",
    "dg_to_fvm",
    "fvm_to_dg",
    "gauss_rule",
    "initial_state",
    "l2_error",
    "ns_step",
    "project_function",
]
