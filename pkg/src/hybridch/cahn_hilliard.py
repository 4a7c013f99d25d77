"""Mixed DG discretization of the convective Cahn-Hilliard system.

Unknowns are the order parameter ``c`` and the chemical potential ``mu``::

    dc/dt + u . grad c = D lap(mu)
    mu = c^3 - c - gamma lap(c)

Both Laplacians use the SIP operator, convection the upwind DG operator, and
time integration is implicit Euler.  ``eyre_convex_split`` linearizes the
cubic about the previous step and keeps ``-c`` explicit, so a step is a single
linear solve; ``full_newton`` solves the fully implicit step by Newton's
method.
"""

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from . import linalg
from .basis import gauss_rule
from .dg_operators import (
    DEFAULT_PENALTY,
    BoundarySpec,
    mass_matrix,
    sip_laplacian,
    upwind_convection,
    weighted_mass_matrix,
)
from .field import DgField

SPLITTING_MODES = ("eyre_convex_split", "full_newton")


class NewtonConvergenceError(RuntimeError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


@dataclass(frozen=True)
class ChParams:
    mobility: float = 1.0
    gamma: float = 0.02
    dt: float = 1e-3
    max_iterations: int = 25
    tolerance: float = 1e-10
    splitting: str = "eyre_convex_split"
    penalty: float = DEFAULT_PENALTY
    linear_solver: str = "sparse_direct"
    solver_tolerance: float = 1e-12

    def __post_init__(self):
        if not (self.mobility > 0 and self.gamma > 0 and self.dt > 0):
            raise ValueError("mobility, gamma and dt must be positive")
        if self.splitting not in SPLITTING_MODES:
            raise ValueError(f"splitting must be one of {SPLITTING_MODES}")


@dataclass
class ChState:
    c: DgField
    mu: DgField
    t: float = 0.0

    def __post_init__(self):
        if self.c.mesh is not self.mu.mesh or self.c.basis != self.mu.basis:
            raise ValueError("c and mu must share mesh and basis")

    def copy(self):
        return ChState(self.c.copy(), self.mu.copy(), self.t)


def chemical_potential_pointwise(c, laplacian_c, gamma):
    return c**3 - c - gamma * laplacian_c


def _boundaries(mesh, boundaries):
    if boundaries is None:
        boundaries = {}
    bc_c = boundaries.get("c") or BoundarySpec.no_flux(mesh)
    bc_mu = boundaries.get("mu") or BoundarySpec.no_flux(mesh)
    return BoundarySpec(bc_c).validate(mesh), BoundarySpec(bc_mu).validate(mesh)


class ChOperators:
    """Velocity-independent operators of one (mesh, basis, params, boundaries) setup.

    Rebuilding these every step is wasteful; :func:`ch_step` accepts an
    instance through its ``operators`` argument.
    """

    def __init__(self, mesh, basis, params, boundaries=None):
        self.mesh, self.basis, self.params = mesh, basis, params
        self.bc_c, self.bc_mu = _boundaries(mesh, boundaries)
        self.mass = mass_matrix(mesh, basis)
        self.lap_c, self.lap_c_rhs = sip_laplacian(mesh, basis, 1.0, params.penalty, self.bc_c)
        self.lap_mu, self.lap_mu_rhs = sip_laplacian(mesh, basis, 1.0, params.penalty, self.bc_mu)
        self.cubic_points = 2 * basis.degree + 2
        self.cubic_rule = gauss_rule(self.cubic_points, basis.dimension)
        self._phi_cubic = basis.values(self.cubic_rule.points)
        n = mesh.n_cells * basis.n_modes
        N = basis.n_modes
        cell = np.repeat(np.arange(mesh.n_cells), 2 * N)
        fld = np.tile(np.repeat([0, 1], N), mesh.n_cells)
        mode = np.tile(np.arange(N), 2 * mesh.n_cells)
        # interleaved index -> separated (field-major) index
        self.perm = fld * n + cell * N + mode
        self._velocity = None
        self._conv = (sp.csr_matrix((n, n)), np.zeros(n))

    def with_params(self, params):
        """Reuse the assembled operators under a new time step or splitting."""
        if params.penalty != self.params.penalty:
            return ChOperators(self.mesh, self.basis, params, {"c": self.bc_c, "mu": self.bc_mu})
        clone = object.__new__(ChOperators)
        clone.__dict__.update(self.__dict__)
        clone.params = params
        return clone

    @property
    def n_field_dofs(self):
        return self.mesh.n_cells * self.basis.n_modes

    def convection(self, velocity):
        if velocity is None or not np.any(velocity.values):
            n = self.n_field_dofs
            return sp.csr_matrix((n, n)), np.zeros(n)
        key = (id(velocity), velocity.values.tobytes())
        if self._velocity != key:
            self._conv = upwind_convection(self.mesh, self.basis, velocity, self.bc_c)
            self._velocity = key
        return self._conv

    def cubic_values(self, c):
        """``c`` at the cubic-term quadrature points, shape (n_cells, n_q)."""
        return c.coeffs @ self._phi_cubic.T

    def weighted_mass(self, weight_values):
        return weighted_mass_matrix(self.mesh, self.basis, weight_values, self.cubic_points)

    def moment(self, values):
        """Vector of :math:`\\int f\\,\\psi_a` for ``f`` given at the cubic-rule points."""
        jac = self.mesh.cell_measure[0] / self.basis.reference_measure
        return (jac * (values * self.cubic_rule.weights) @ self._phi_cubic).ravel()

    def interleave(self, a11, a12, a21, a22, r1, r2):
        mat = sp.bmat([[a11, a12], [a21, a22]], format="csr")
        mat = mat[self.perm][:, self.perm]
        rhs = np.concatenate([r1, r2])[self.perm]
        return mat.tobsr(blocksize=(2 * self.basis.n_modes,) * 2), rhs

    def split(self, x):
        sep = np.empty_like(x)
        sep[self.perm] = x
        n = self.n_field_dofs
        return sep[:n], sep[n:]

    def join(self, c_vec, mu_vec):
        return np.concatenate([c_vec, mu_vec])[self.perm]

    def free_energy(self, c):
        """Discrete Ginzburg-Landau energy ``int (c^2-1)^2/4 + gamma/2 |grad c|^2``.

        The gradient part is the SIP quadratic form, which carries the jump
        penalties.
        """
        cq = self.cubic_values(c)
        jac = self.mesh.cell_measure[0] / self.basis.reference_measure
        bulk = jac * np.sum(0.25 * (cq**2 - 1.0) ** 2 * self.cubic_rule.weights)
        x = c.vector
        return float(bulk + 0.5 * self.params.gamma * x @ (self.lap_c @ x))


def assemble_ch_system(state, velocity, params, boundaries=None, operators=None):
    """Linear system of one Eyre-split implicit Euler step.

    Per cell the unknowns are ordered ``[c modes, mu modes]``::

        (M/dt + C) c + D L mu           = M c^n/dt + b_C + D b_L
        M mu - 3 (c^n)^2 c - gamma L c  = -2 (c^n)^3 - M c^n - gamma b_L

    where ``L`` is the SIP form of ``-lap`` and ``C`` the upwind convection.
    """
    ops = _operators(state, params, boundaries, operators)
    M, dt, D, gamma = ops.mass, params.dt, params.mobility, params.gamma
    conv, conv_rhs = ops.convection(velocity)
    cn = state.c.vector
    cq = ops.cubic_values(state.c)
    n3 = ops.weighted_mass(3.0 * cq**2)
    b3 = ops.moment(cq**3)
    a11 = M / dt + conv
    a12 = D * ops.lap_mu
    a21 = -n3 - gamma * ops.lap_c
    r1 = M @ cn / dt + conv_rhs + D * ops.lap_mu_rhs
    r2 = -2.0 * b3 - M @ cn - gamma * ops.lap_c_rhs
    mat, rhs = ops.interleave(a11, a12, a21, M, r1, r2)
    x0 = ops.join(cn, state.mu.vector)
    return linalg.SparseSystem(mat, rhs, x0=x0, block_size=2 * state.c.basis.n_modes)


def _operators(state, params, boundaries, operators):
    if operators is None:
        return ChOperators(state.c.mesh, state.c.basis, params, boundaries)
    if operators.mesh is not state.c.mesh or operators.basis != state.c.basis:
        raise ValueError("operators were built for a different mesh or basis")
    if operators.params != params:
        operators = operators.with_params(params)
    return operators


def _linear_solve(system, params):
    return linalg.solve(system, params.linear_solver, tol=params.solver_tolerance)


def full_residual(ops, state, velocity, c_vec, mu_vec):
    """Residual of the fully implicit step and its Jacobian blocks."""
    p = ops.params
    M = ops.mass
    conv, conv_rhs = ops.convection(velocity)
    c = DgField(ops.mesh, ops.basis, c_vec)
    cq = ops.cubic_values(c)
    r1 = M @ (c_vec - state.c.vector) / p.dt + conv @ c_vec - conv_rhs
    r1 += p.mobility * (ops.lap_mu @ mu_vec - ops.lap_mu_rhs)
    r2 = M @ mu_vec - ops.moment(cq**3 - cq) - p.gamma * (ops.lap_c @ c_vec - ops.lap_c_rhs)
    jac = (
        M / p.dt + conv,
        p.mobility * ops.lap_mu,
        -ops.weighted_mass(3.0 * cq**2 - 1.0) - p.gamma * ops.lap_c,
        M,
    )
    return r1, r2, jac


def ch_step(state, velocity, params, boundaries=None, operators=None):
    """Advance ``state`` by one time step ``params.dt``."""
    ops = _operators(state, params, boundaries, operators)
    mesh, basis = state.c.mesh, state.c.basis
    if params.splitting == "eyre_convex_split":
        system = assemble_ch_system(state, velocity, params, operators=ops)
        x = _linear_solve(system, params)
        c_vec, mu_vec = ops.split(x)
    else:
        c_vec, mu_vec = state.c.vector.copy(), state.mu.vector.copy()
        history = []
        for _ in range(params.max_iterations):
            r1, r2, jac = full_residual(ops, state, velocity, c_vec, mu_vec)
            res = max(np.abs(r1).max(), np.abs(r2).max())
            history.append(float(res))
            if res < params.tolerance:
                break
            mat, rhs = ops.interleave(*jac, -r1, -r2)
            dx = _linear_solve(linalg.SparseSystem(mat, rhs, block_size=2 * basis.n_modes), params)
            dc, dmu = ops.split(dx)
            c_vec += dc
            mu_vec += dmu
        else:
            raise NewtonConvergenceError(
                f"Newton did not converge in {params.max_iterations} iterations "
                f"(last residual {history[-1]:.3e})",
                history,
            )
    return ChState(
        DgField(mesh, basis, c_vec, state.c.name),
        DgField(mesh, basis, mu_vec, state.mu.name),
        state.t + params.dt,
    )


def initial_state(c, params, boundaries=None, operators=None, t=0.0):
    """Pair ``c`` with the L2 projection of its chemical potential."""
    ops = operators or ChOperators(c.mesh, c.basis, params, boundaries)
    cq = ops.cubic_values(c)
    rhs = ops.moment(cq**3 - cq) + params.gamma * (ops.lap_c @ c.vector - ops.lap_c_rhs)
    jac = c.mesh.cell_measure[0] / c.basis.reference_measure
    mu = DgField(c.mesh, c.basis, rhs / jac, "mu")
    return ChState(c.copy(), mu, t)


def time_derivative(state, velocity, params, boundaries=None, operators=None):
    """Semi-discrete ``dc/dt`` of the mixed scheme evaluated at ``state.c``."""
    ops = _operators(state, params, boundaries, operators)
    mu = initial_state(state.c, params, operators=ops).mu
    conv, conv_rhs = ops.convection(velocity)
    x = state.c.vector
    rate = -(conv @ x - conv_rhs) - params.mobility * (ops.lap_mu @ mu.vector - ops.lap_mu_rhs)
    jac = state.c.mesh.cell_measure[0] / state.c.basis.reference_measure
    return DgField(state.c.mesh, state.c.basis, rate / jac, "dcdt")


def with_dt(params, dt):
    return replace(params, dt=dt)
