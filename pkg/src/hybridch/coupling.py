"""Exchange between the finite-volume and DG fields and the coupled time loop.

A finite-volume field is read as degree-0 DG content: injection fills the
constant mode and zeroes the rest, projection back keeps the cell mean.
Each coupled step solves Cahn-Hilliard on the DG side with the current FV
velocity, projects ``c`` back to cell values, forms face fluxes from ``U``
and advances Navier-Stokes.
"""

from dataclasses import dataclass

import numpy as np

from .cahn_hilliard import ChOperators, ch_step, initial_state
from .field import DgField, FvField
from .fvm_ns import face_fluxes, ns_step


class CouplingError(RuntimeError):
    """A coupled sub-step failed; ``stage`` names it."""

    def __init__(self, stage, cause):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


def fvm_to_dg(f, basis):
    """Inject cell values as the constant mode of a DG field."""
    if f.mesh.dimension != basis.dimension:
        raise ValueError("field mesh and basis dimensions differ")
    coeffs = np.zeros((f.mesh.n_cells, basis.n_modes))
    coeffs[:, 0] = f.values / basis.constant_value
    return DgField(f.mesh, basis, coeffs, f.name)


def dg_to_fvm(g, boundary=None):
    """Cell means of a DG field as an FV field."""
    return FvField(g.mesh, g.cell_means(), dict(boundary or {}), g.name)


@dataclass
class CoupledState:
    ch: object
    ns: object
    c_fvm: FvField
    step: int = 0
    fluxes: tuple = None

    def __post_init__(self):
        if not (self.ch.c.mesh is self.ns.U.mesh is self.c_fvm.mesh):
            raise ValueError("coupled solvers must share one mesh")

    @property
    def mesh(self):
        return self.c_fvm.mesh

    @property
    def time(self):
        return self.ch.t


class CoupledSolver:
    """Alternating CH (DG) / NS (FV) loop on one mesh with a shared time step.

    With ``persistent_dg_state`` (the default) the DG order parameter carries
    over between steps and the FV copy of ``c`` is only injected when the
    state is created.  Otherwise ``c`` is re-injected from its cell means at
    the start of every step.
    """

    def __init__(self, basis, ch_params, ns_params, ch_boundaries=None, persistent_dg_state=True):
        if abs(ch_params.dt - ns_params.dt) > 1e-15 * max(ch_params.dt, ns_params.dt):
            raise ValueError("CH and NS must share one time step")
        self.basis = basis
        self.ch_params = ch_params
        self.ns_params = ns_params
        self.ch_boundaries = ch_boundaries
        self.persistent_dg_state = persistent_dg_state
        self._ops = None

    def operators(self, mesh):
        if self._ops is None or self._ops.mesh is not mesh:
            self._ops = ChOperators(mesh, self.basis, self.ch_params, self.ch_boundaries)
        return self._ops

    def initialize(self, c, ns_state):
        """Build a coupled state from an FV or DG order parameter."""
        if isinstance(c, FvField):
            c_dg = fvm_to_dg(c, self.basis)
        else:
            c_dg = c.copy()
        ops = self.operators(c_dg.mesh)
        ch = initial_state(c_dg, self.ch_params, operators=ops, t=ns_state.t)
        return CoupledState(ch, ns_state, dg_to_fvm(ch.c))

    def step(self, state):
        return coupled_step(state, self.ch_params, self.ns_params, solver=self)


def coupled_step(state, ch_params, ns_params, solver=None, persistent_dg_state=True):
    """One pass through copy, CH solve, projection, fluxes and NS solve."""
    if solver is None:
        solver = CoupledSolver(state.ch.c.basis, ch_params, ns_params,
                               persistent_dg_state=persistent_dg_state)
    ops = solver.operators(state.mesh)

    ch_in = state.ch
    if not solver.persistent_dg_state:
        ch_in = initial_state(fvm_to_dg(state.c_fvm, ch_in.c.basis), ch_params, operators=ops, t=ch_in.t)
    velocity = state.ns.U
    try:
        ch_out = ch_step(ch_in, velocity, ch_params, operators=ops)
    except Exception as exc:
        raise CouplingError("Cahn-Hilliard solve", exc) from exc
    c_fvm = dg_to_fvm(ch_out.c, state.c_fvm.boundary)
    fluxes = face_fluxes(velocity)
    try:
        ns_out = ns_step(state.ns, ns_params, fluxes=fluxes)
    except Exception as exc:
        raise CouplingError("Navier-Stokes solve", exc) from exc
    return CoupledState(ch_out, ns_out, c_fvm, state.step + 1, fluxes)
