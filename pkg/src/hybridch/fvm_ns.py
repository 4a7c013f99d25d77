"""Cell-centered finite-volume solver for incompressible Navier-Stokes.

One step is a Chorin projection: an explicit predictor with first-order
upwind convection and central viscous fluxes, a pressure Poisson solve, and
a velocity correction.  The pressure operator is the product of the discrete
divergence and the discrete cell gradient used in the correction, so the
corrected velocity is divergence free in exactly the sense measured by
:func:`divergence`.
"""

import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.sparse as sp

from . import linalg
from .field import FixedValue, FvField, FvVectorField, ZeroGradient, boundary_condition, face_velocities

CFL_LIMIT = 0.9


class PressureSolveError(RuntimeError):
    pass


class CflWarning(UserWarning):
    pass


@dataclass(frozen=True)
class NsParams:
    viscosity: float = 0.01
    dt: float = 1e-3
    pressure_tolerance: float = 1e-10
    max_pressure_iterations: int = 20_000

    def __post_init__(self):
        if self.viscosity < 0 or self.dt <= 0:
            raise ValueError("need viscosity >= 0 and dt > 0")


@dataclass
class NsState:
    """Velocity ``U`` (boundary descriptors per patch) and kinematic pressure ``P``."""

    U: FvVectorField
    P: FvField = None
    t: float = 0.0
    pressure_iterations: int = 0
    divergence_norm: float = 0.0
    _ops: object = dc_field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.P is None:
            self.P = FvField(self.U.mesh, name="P")

    def copy(self):
        return NsState(self.U.copy(), self.P.copy(), self.t, self.pressure_iterations,
                       self.divergence_norm, self._ops)


def wall(velocity=(0.0, 0.0)):
    """No-slip wall moving tangentially with ``velocity``."""
    return FixedValue(np.asarray(velocity, dtype=float))


def divergence(U):
    """Net outward face flux per cell divided by the cell measure."""
    mesh = U.mesh
    un_conn, faces, un_bnd = face_velocities(U)
    conn = mesh.connections()
    flux = un_conn * conn.measure
    div = np.zeros(mesh.n_cells)
    np.add.at(div, conn.owner, flux)
    np.add.at(div, conn.neighbor, -flux)
    np.add.at(div, mesh.bface_owner[faces], un_bnd * mesh.bface_measure[faces])
    return FvField(mesh, div / mesh.cell_measure, name="divU")


def face_fluxes(U):
    """Volumetric face fluxes ``(U_f . n) |f|`` on connections and open boundary faces."""
    mesh = U.mesh
    un_conn, faces, un_bnd = face_velocities(U)
    return un_conn * mesh.connections().measure, faces, un_bnd * mesh.bface_measure[faces]


class FvmOperators:
    """Linear parts of divergence and gradient for one set of velocity conditions.

    Fixed-value velocity patches get zero-gradient pressure and zero-gradient
    velocity patches get fixed (zero) pressure, which makes the divergence the
    negative adjoint of the gradient and the pressure matrix symmetric.
    """

    def __init__(self, mesh, velocity_boundary):
        self.mesh = mesh
        n = mesh.n_cells
        vol = mesh.cell_measure
        conn = mesh.connections()
        faces = mesh.open_boundary_faces()
        self.fixed = np.zeros(faces.size, dtype=bool)
        probe = FvVectorField(mesh, boundary=velocity_boundary)
        for k, b in enumerate(faces):
            bc = boundary_condition(probe, mesh.bface_patch[b])
            if isinstance(bc, FixedValue):
                self.fixed[k] = True
            elif not isinstance(bc, ZeroGradient):
                raise TypeError(f"unsupported velocity condition {bc!r}")
        self.div_parts, self.grad_parts = [], []
        for a in range(mesh.dimension):
            sel = np.flatnonzero(conn.axis == a)
            o, nb = conn.owner[sel], conn.neighbor[sel]
            half = 0.5 * conn.measure[sel]
            rows = np.concatenate([o, o, nb, nb])
            cols = np.concatenate([o, nb, o, nb])
            vals = np.concatenate([half / vol[o], half / vol[o], -half / vol[nb], -half / vol[nb]])
            bsel = faces[mesh.bface_axis[faces] == a]
            bfix = self.fixed[mesh.bface_axis[faces] == a]
            bo = mesh.bface_owner[bsel]
            bval = mesh.bface_side[bsel] * mesh.bface_measure[bsel] / vol[bo]
            # zero-gradient velocity contributes the owner value to divergence,
            # zero-gradient pressure contributes the owner value to the gradient
            d_extra = (bo[~bfix], bo[~bfix], bval[~bfix])
            g_extra = (bo[bfix], bo[bfix], bval[bfix])
            self.div_parts.append(self._build(n, rows, cols, vals, d_extra))
            self.grad_parts.append(self._build(n, rows, cols, vals, g_extra))
        self.pressure_matrix = sum(d @ g for d, g in zip(self.div_parts, self.grad_parts)).tocsr()
        self.pressure_matrix.sort_indices()
        self._neg_pressure = (-self.pressure_matrix).tocsr()

    @staticmethod
    def _build(n, rows, cols, vals, extra):
        r = np.concatenate([rows, extra[0]])
        c = np.concatenate([cols, extra[1]])
        v = np.concatenate([vals, extra[2]])
        return sp.coo_matrix((v, (r, c)), shape=(n, n)).tocsr()

    def gradient(self, P):
        values = P.values if isinstance(P, FvField) else P
        return np.stack([g @ values for g in self.grad_parts], axis=1)


def _operators_for(state):
    ops = state._ops
    if ops is None or ops.mesh is not state.U.mesh:
        ops = FvmOperators(state.U.mesh, state.U.boundary)
    return ops


def _convection(U, fluxes):
    """Conservative first-order upwind ``div(U U)``, per component."""
    mesh = U.mesh
    conn = mesh.connections()
    flux_c, faces, flux_b = fluxes
    u = U.values
    up = np.where((flux_c >= 0.0)[:, None], u[conn.owner], u[conn.neighbor])
    out = np.zeros_like(u)
    np.add.at(out, conn.owner, flux_c[:, None] * up)
    np.add.at(out, conn.neighbor, -flux_c[:, None] * up)
    ub = u[mesh.bface_owner[faces]].copy()
    for k, b in enumerate(faces):
        bc = boundary_condition(U, mesh.bface_patch[b])
        if isinstance(bc, FixedValue) and flux_b[k] < 0.0:
            ub[k] = bc.value
    np.add.at(out, mesh.bface_owner[faces], flux_b[:, None] * ub)
    return out / mesh.cell_measure[:, None]


def _diffusion(U):
    """Compact central-difference Laplacian with wall values at half-cell distance."""
    mesh = U.mesh
    conn = mesh.connections()
    u = U.values
    h = mesh.spacing
    g = (u[conn.neighbor] - u[conn.owner]) * (conn.measure / h[conn.axis])[:, None]
    out = np.zeros_like(u)
    np.add.at(out, conn.owner, g)
    np.add.at(out, conn.neighbor, -g)
    faces = mesh.open_boundary_faces()
    for k, b in enumerate(faces):
        bc = boundary_condition(U, mesh.bface_patch[b])
        if isinstance(bc, FixedValue):
            o = mesh.bface_owner[b]
            dist = 0.5 * h[mesh.bface_axis[b]]
            out[o] += (np.asarray(bc.value) - u[o]) * mesh.bface_measure[b] / dist
    return out / mesh.cell_measure[:, None]


def cfl_number(U, dt):
    return float(np.max(np.abs(U.values) * dt / U.mesh.spacing))


def project(U_star, dt, params, ops=None, x0=None):
    """Remove the divergent part of ``U_star``; returns ``(U, P, iterations)``."""
    ops = ops or FvmOperators(U_star.mesh, U_star.boundary)
    div_star = divergence(U_star).values
    rhs = -div_star / dt
    # the corrected divergence equals dt times the pressure residual
    atol = 0.5 * params.pressure_tolerance / dt
    try:
        p, iters = linalg.solve_cg(
            ops._neg_pressure, rhs, x0=x0, atol=atol, max_iter=params.max_pressure_iterations
        )
    except linalg.LinearSolverError as exc:
        raise PressureSolveError(f"pressure solve failed: {exc}") from exc
    if ops.fixed.all():
        p -= p.mean()  # gauge: constants are invisible to the gradient
    U = U_star.copy()
    U.values = U_star.values - dt * ops.gradient(p)
    return U, FvField(U.mesh, p, name="P"), iters


def ns_step(state, params, fluxes=None):
    """One Chorin projection step.

    ``fluxes`` may carry precomputed face fluxes of ``state.U`` (as returned
    by :func:`face_fluxes`); they are formed here otherwise.
    """
    U = state.U
    ops = _operators_for(state)
    cfl = cfl_number(U, params.dt)
    if cfl > CFL_LIMIT:
        warnings.warn(f"CFL number {cfl:.3f} exceeds {CFL_LIMIT}", CflWarning, stacklevel=2)
    if fluxes is None:
        fluxes = face_fluxes(U)
    rate = -_convection(U, fluxes) + params.viscosity * _diffusion(U)
    U_star = U.copy()
    U_star.values = U.values + params.dt * rate
    U_new, P, iters = project(U_star, params.dt, params, ops)
    div_norm = float(np.abs(divergence(U_new).values).max())
    if div_norm > params.pressure_tolerance:
        raise PressureSolveError(
            f"divergence {div_norm:.3e} above tolerance {params.pressure_tolerance:.1e}"
        )
    return NsState(U_new, P, state.t + params.dt, iters, div_norm, ops)


def couette_profile(mesh, bottom_speed, top_speed):
    """Linear shear profile ``u_x(y)`` between two horizontal walls."""
    lo, hi = mesh.lower[1], mesh.upper[1]
    y = mesh.cell_centers[:, 1]
    values = np.zeros((mesh.n_cells, 2))
    values[:, 0] = bottom_speed + (top_speed - bottom_speed) * (y - lo) / (hi - lo)
    return values
