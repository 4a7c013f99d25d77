import warnings

import numpy as np
import pytest

from hybridch.field import FixedValue, FvVectorField, ZeroGradient
from hybridch.fvm_ns import (
    CflWarning,
    FvmOperators,
    NsParams,
    NsState,
    PressureSolveError,
    couette_profile,
    divergence,
    face_fluxes,
    ns_step,
    project,
    wall,
)

from conftest import box_mesh


def walls(mesh, **moving):
    return {p.name: wall(moving.get(p.name, (0.0, 0.0))) for p in mesh.patches if p.tag != "periodic"}


def linear_field(mesh, fn):
    x, y = mesh.cell_centers.T
    return np.stack(fn(x, y), axis=1)


def interior_cells(mesh):
    nx, ny = mesh.cells_per_axis
    i, j = mesh.cell_index.T
    return (i > 0) & (i < nx - 1) & (j > 0) & (j < ny - 1)


def test_params_validated():
    with pytest.raises(ValueError):
        NsParams(viscosity=-1)
    with pytest.raises(ValueError):
        NsParams(dt=0)


def test_divergence_uniform():
    m = box_mesh(5, 4)
    U = FvVectorField(m, np.tile([0.3, -1.2], (m.n_cells, 1)), walls(m))
    for p in m.patches:
        U.boundary[p.name] = FixedValue(np.array([0.3, -1.2]))
    assert np.abs(divergence(U).values).max() < 1e-13


@pytest.mark.parametrize("fn, expected", [(lambda x, y: (x, -y), 0.0), (lambda x, y: (x, y), 2.0)])
def test_divergence_linear(fn, expected):
    m = box_mesh(6, 5, bounds=((-1, 2), (0, 1)))
    U = FvVectorField(m, linear_field(m, fn), {p.name: ZeroGradient() for p in m.patches})
    div = divergence(U).values
    assert np.abs(div[interior_cells(m)] - expected).max() < 1e-12


def test_pressure_matrix_symmetric():
    for periodic in ("", "x"):
        m = box_mesh(6, 4, periodic=periodic)
        A = FvmOperators(m, walls(m)).pressure_matrix
        assert abs(A - A.T).max() < 1e-14


@pytest.mark.parametrize("shape", [(4, 4), (5, 3), (8, 6)])
def test_pinned_pressure_nonsingular(shape):
    m = box_mesh(*shape)
    A = FvmOperators(m, walls(m)).pressure_matrix.toarray()
    assert np.linalg.matrix_rank(A) == m.n_cells - 1
    A[0, :] = 0.0
    A[0, 0] = 1.0
    assert np.linalg.matrix_rank(A) == m.n_cells


def test_divergence_is_negative_adjoint_of_gradient(rng):
    m = box_mesh(5, 6, periodic="x")
    ops = FvmOperators(m, walls(m))
    for D, G in zip(ops.div_parts, ops.grad_parts):
        vol = m.cell_measure[0]
        assert abs(D * vol + (G * vol).T).max() < 1e-13


def test_uniform_flow_unchanged():
    m = box_mesh(6, 4, periodic="x")
    U = FvVectorField(m, np.tile([0.5, 0.0], (m.n_cells, 1)), walls(m, bottom=(0.5, 0), top=(0.5, 0)))
    state = NsState(U)
    for _ in range(5):
        state = ns_step(state, NsParams(viscosity=0.1, dt=1e-3))
    assert np.abs(state.U.values - U.values).max() < 1e-12


def test_couette_steady():
    m = box_mesh(8, 16, periodic="x")
    params = NsParams(viscosity=1.0, dt=5e-4)
    state = NsState(FvVectorField(m, boundary=walls(m, top=(1.0, 0.0))))
    for _ in range(4000):
        new = ns_step(state, params)
        assert new.divergence_norm <= params.pressure_tolerance
        done = np.abs(new.U.values - state.U.values).max() < 1e-10
        state = new
        if done:
            break
    assert np.abs(state.U.values - couette_profile(m, 0.0, 1.0)).max() < 1e-6


def test_projection_idempotent(rng):
    m = box_mesh(7, 6)
    bc = walls(m)
    params = NsParams(dt=1e-2, pressure_tolerance=1e-11)
    U = FvVectorField(m, rng.normal(size=(m.n_cells, 2)), bc)
    ops = FvmOperators(m, bc)
    once, _, _ = project(U, params.dt, params, ops)
    assert np.abs(divergence(once).values).max() <= params.pressure_tolerance
    twice, _, _ = project(once, params.dt, params, ops)
    assert np.abs(twice.values - once.values).max() < params.pressure_tolerance


def test_divergence_below_tolerance_each_step(rng):
    m = box_mesh(10, 8, periodic="x")
    params = NsParams(viscosity=0.05, dt=2e-3)
    U = FvVectorField(m, 0.3 * rng.normal(size=(m.n_cells, 2)), walls(m, top=(1, 0), bottom=(-1, 0)))
    state = NsState(U)
    for _ in range(20):
        state = ns_step(state, params)
        assert np.abs(divergence(state.U).values).max() <= params.pressure_tolerance


def test_momentum_conserved_fully_periodic(rng):
    m = box_mesh(8, 6, periodic="xy")
    params = NsParams(viscosity=0.0, dt=1e-3)
    state = NsState(FvVectorField(m, rng.normal(size=(m.n_cells, 2))))
    p0 = state.U.values.sum(axis=0) * m.cell_measure[0]
    for _ in range(10):
        new = ns_step(state, params)
        p1 = new.U.values.sum(axis=0) * m.cell_measure[0]
        assert np.abs(p1 - p0).max() <= 1e-10 * np.abs(p0).max()
        state, p0 = new, p1


def test_outflow_patch_projection():
    # zero-gradient velocity on the right side, fixed inflow on the left
    m = box_mesh(8, 4)
    bc = walls(m, left=(1.0, 0.0))
    bc["right"] = ZeroGradient()
    U = FvVectorField(m, np.tile([1.0, 0.0], (m.n_cells, 1)), bc)
    U.values[:, 1] = 0.2 * np.sin(np.arange(m.n_cells))
    params = NsParams(viscosity=0.01, dt=1e-3)
    state = ns_step(NsState(U), params)
    assert state.divergence_norm <= params.pressure_tolerance


def test_cfl_warning():
    m = box_mesh(4, 4, periodic="x")
    U = FvVectorField(m, np.tile([100.0, 0.0], (m.n_cells, 1)), walls(m, top=(100, 0), bottom=(100, 0)))
    with pytest.warns(CflWarning):
        ns_step(NsState(U), NsParams(dt=0.01))


def test_pressure_failure_raises(rng):
    m = box_mesh(8, 8)
    U = FvVectorField(m, rng.normal(size=(m.n_cells, 2)), walls(m))
    with pytest.raises(PressureSolveError):
        ns_step(NsState(U), NsParams(max_pressure_iterations=1))


def test_face_fluxes_match_divergence(rng):
    m = box_mesh(5, 4, periodic="x")
    U = FvVectorField(m, rng.normal(size=(m.n_cells, 2)), walls(m, top=(1, 0)))
    fc, faces, fb = face_fluxes(U)
    conn = m.connections()
    net = np.zeros(m.n_cells)
    np.add.at(net, conn.owner, fc)
    np.add.at(net, conn.neighbor, -fc)
    np.add.at(net, m.bface_owner[faces], fb)
    assert np.allclose(net / m.cell_measure, divergence(U).values, atol=1e-13)


def test_unsupported_velocity_condition():
    from hybridch.field import PeriodicBC

    m = box_mesh(3, 3)
    bc = walls(m)
    bc["left"] = PeriodicBC()
    with pytest.raises(TypeError):
        FvmOperators(m, bc)
