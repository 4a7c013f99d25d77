import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridch.basis import BasisSet
from hybridch.cahn_hilliard import (
    ChOperators,
    ChParams,
    ChState,
    NewtonConvergenceError,
    assemble_ch_system,
    ch_step,
    chemical_potential_pointwise,
    full_residual,
    initial_state,
    time_derivative,
)
from hybridch.dg_operators import BoundarySpec, Dirichlet, Neumann
from hybridch.field import DgField, FvVectorField, l2_norm, project_function
from hybridch.linalg import solve_sparse

from conftest import box_mesh, line_mesh

GAMMA = 0.0125  # interface parameter of the 1D verification case


def uniform_state(mesh, basis, value):
    c = DgField(mesh, basis)
    c.coeffs[:, 0] = value / basis.constant_value
    return ChState(c, DgField(mesh, basis, name="mu"))


def random_state(mesh, basis, seed, params):
    r = np.random.default_rng(seed)
    c = DgField(mesh, basis)
    c.coeffs[:, 0] = r.uniform(-1, 1, mesh.n_cells) / basis.constant_value
    return initial_state(c, params)


def tanh_field(mesh, basis, gamma=GAMMA):
    w = np.sqrt(2 * gamma)
    return project_function(mesh, basis, lambda x, *r: np.tanh(x / w), n_points=2 * basis.degree + 2)


def test_chemical_potential_examples():
    assert chemical_potential_pointwise(1.0, 0.0, 0.3) == 0.0
    assert chemical_potential_pointwise(0.0, 0.0, 0.3) == 0.0
    assert chemical_potential_pointwise(0.5, 0.0, 0.3) == pytest.approx(-0.375)
    assert chemical_potential_pointwise(0.0, 2.0, 0.25) == pytest.approx(-0.5)


@pytest.mark.parametrize("kw", [{"mobility": 0}, {"gamma": -1}, {"dt": 0}, {"splitting": "crank"}])
def test_params_validated(kw):
    with pytest.raises(ValueError):
        ChParams(**kw)


@pytest.mark.parametrize("value", [-1.0, 0.0, 1.0])
def test_uniform_fixed_point_system(value):
    m, b = box_mesh(3, 3), BasisSet(2, 2)
    p = ChParams(gamma=GAMMA)
    state = uniform_state(m, b, value)
    ops = ChOperators(m, b, p)
    x = solve_sparse(assemble_ch_system(state, None, p, operators=ops))
    c, mu = ops.split(x)
    assert np.abs(c - state.c.vector).max() < 1e-9
    assert np.abs(mu).max() < 1e-9


def test_system_stencil():
    m, b = box_mesh(4, 3), BasisSet(2, 1)
    p = ChParams()
    U = FvVectorField(m, np.tile([0.3, -0.2], (m.n_cells, 1)))
    sysm = assemble_ch_system(random_state(m, b, 1, p), U, p)
    assert sysm.block_size == 2 * b.n_modes
    A = sysm.matrix.tobsr(blocksize=(sysm.block_size,) * 2)
    adjacent = {(i, i) for i in range(m.n_cells)}
    for o, n in zip(m.face_owner, m.face_neighbor):
        adjacent |= {(o, n), (n, o)}
    rows = np.repeat(np.arange(m.n_cells), np.diff(A.indptr))
    for i, j, blk in zip(rows, A.indices, A.data):
        if np.any(blk != 0):
            assert (i, j) in adjacent


def test_mismatched_operators():
    p = ChParams()
    state = uniform_state(line_mesh(4), BasisSet(1, 2), 0.0)
    ops = ChOperators(line_mesh(4), BasisSet(1, 2), p)
    with pytest.raises(ValueError):
        ch_step(state, None, p, operators=ops)
    with pytest.raises(ValueError):
        ChState(state.c, DgField(state.c.mesh, BasisSet(1, 1)))


def test_unknown_patch_rejected():
    m = line_mesh(4)
    with pytest.raises(KeyError):
        ChOperators(m, BasisSet(1, 1), ChParams(), {"c": BoundarySpec({"top": Neumann()})})


def test_tanh_near_equilibrium():
    m, b = line_mesh(40), BasisSet(1, 2)
    p = ChParams(gamma=GAMMA)
    ops = ChOperators(m, b, p)
    state = initial_state(tanh_field(m, b), p, operators=ops)
    for _ in range(10):
        new = ch_step(state, None, p, operators=ops)
        change = l2_norm(DgField(m, b, new.c.coeffs - state.c.coeffs))
        state = new
    assert change < 1e-6


@pytest.mark.parametrize("mesh_kind", ["line", "box", "periodic"])
def test_mass_conservation_random(mesh_kind):
    if mesh_kind == "line":
        m, b = line_mesh(16), BasisSet(1, 2)
    elif mesh_kind == "box":
        m, b = box_mesh(5, 4), BasisSet(2, 2)
    else:
        m, b = box_mesh(6, 4, periodic="xy"), BasisSet(2, 1)
    p = ChParams(gamma=GAMMA)
    ops = ChOperators(m, b, p)
    for seed in range(3):
        state = random_state(m, b, seed, p)
        m0 = state.c.integral()
        scale = np.sum(np.abs(state.c.cell_means()) * m.cell_measure)
        for _ in range(5):
            state = ch_step(state, None, p, operators=ops)
            assert abs(state.c.integral() - m0) <= 1e-10 * max(abs(m0), scale)


def test_mass_conservation_with_periodic_transport():
    m, b = box_mesh(6, 5, periodic="xy"), BasisSet(2, 2)
    p = ChParams(gamma=0.005, mobility=0.01)
    state = random_state(m, b, 4, p)
    U = FvVectorField(m, np.tile([0.7, -0.4], (m.n_cells, 1)))
    m0 = state.c.integral()
    for _ in range(5):
        state = ch_step(state, U, p)
    assert abs(state.c.integral() - m0) <= 1e-10 * m.domain_measure


def mirror(c):
    """Coefficients of c(-x) on a symmetric 1D mesh."""
    p = c.basis.degree
    return c.coeffs[::-1] * (-1.0) ** np.arange(p + 1)


@pytest.mark.parametrize("splitting", ["eyre_convex_split", "full_newton"])
def test_odd_symmetry(splitting):
    m, b = line_mesh(14), BasisSet(1, 2)
    p = ChParams(gamma=GAMMA, splitting=splitting)
    r = np.random.default_rng(3)
    half = r.uniform(-1, 1, 7)
    c = DgField(m, b)
    c.coeffs[:, 0] = np.concatenate([-half[::-1], half]) / b.constant_value
    ops = ChOperators(m, b, p)
    state = initial_state(c, p, operators=ops)
    for _ in range(20):
        state = ch_step(state, None, p, operators=ops)
        assert np.abs(mirror(state.c) + state.c.coeffs).max() < 1e-8


@pytest.mark.parametrize("dt", [1e-3, 1e-2])
def test_energy_non_increasing(dt):
    m, b = line_mesh(20), BasisSet(1, 2)
    p = ChParams(gamma=GAMMA, dt=dt)
    ops = ChOperators(m, b, p)
    for init in ("sgn", "random"):
        if init == "sgn":
            c = project_function(m, b, lambda x: np.sign(x), n_points=6)
            state = initial_state(c, p, operators=ops)
        else:
            state = random_state(m, b, 7, p)
        energy = ops.free_energy(state.c)
        for _ in range(50):
            state = ch_step(state, None, p, operators=ops)
            e = ops.free_energy(state.c)
            assert np.all(np.isfinite(state.c.coeffs))
            assert e <= energy + 1e-8
            energy = e


def test_equilibrium_residual_order():
    # the semi-discrete dc/dt of the projected tanh profile, refined 20/40/80
    b = BasisSet(1, 2)
    p = ChParams(gamma=GAMMA)
    norms = []
    for n in (20, 40, 80):
        m = line_mesh(n)
        c = tanh_field(m, b)
        norms.append(l2_norm(time_derivative(ChState(c, c.copy()), None, p)))
    slope = np.polyfit(np.log([0.1, 0.05, 0.025]), np.log(norms), 1)[0]
    assert abs(slope - (b.degree + 1)) <= 0.3, f"residual norms {norms}, slope {slope:.3f}"


def test_full_newton_solves_implicit_step():
    m, b = line_mesh(12), BasisSet(1, 2)
    p = ChParams(gamma=GAMMA, splitting="full_newton", tolerance=1e-11)
    ops = ChOperators(m, b, p)
    state = random_state(m, b, 2, p)
    new = ch_step(state, None, p, operators=ops)
    r1, r2, _ = full_residual(ops, state, None, new.c.vector, new.mu.vector)
    assert max(np.abs(r1).max(), np.abs(r2).max()) < 1e-11
    assert new.c.integral() == pytest.approx(state.c.integral(), abs=1e-12)


def test_splittings_agree_for_small_steps():
    m, b = line_mesh(10), BasisSet(1, 2)
    c = project_function(m, b, lambda x: 0.6 * np.cos(np.pi * x) + 0.2 * np.sin(2 * np.pi * x))
    base = ChParams(gamma=GAMMA)
    state = initial_state(c, base)
    for _ in range(100):  # let the stiff modes of the projected data decay first
        state = ch_step(state, None, base)
    gaps = []
    for dt in (1e-3, 5e-4, 2.5e-4):
        outs = []
        for split in ("eyre_convex_split", "full_newton"):
            p = ChParams(gamma=GAMMA, dt=dt, splitting=split)
            outs.append(ch_step(state, None, p).c.coeffs)
        gaps.append(np.abs(outs[0] - outs[1]).max())
    # both are first order in time; their one-step gap is O(dt^2)
    rates = np.log2(np.array(gaps[:-1]) / np.array(gaps[1:]))
    assert np.all(rates > 1.7), rates


def test_newton_failure_reports_history():
    m, b = line_mesh(8), BasisSet(1, 2)
    p = ChParams(gamma=GAMMA, splitting="full_newton", max_iterations=1, tolerance=1e-30)
    with pytest.raises(NewtonConvergenceError) as info:
        ch_step(random_state(m, b, 1, p), None, p)
    assert len(info.value.history) == 1


def test_dirichlet_on_c():
    # c pinned to the tanh values at the ends keeps the equilibrium profile
    m, b = line_mesh(40), BasisSet(1, 2)
    w = np.sqrt(2 * GAMMA)
    edge = np.tanh(1 / w)
    bcs = {"c": BoundarySpec({"left": Dirichlet(-edge), "right": Dirichlet(edge)})}
    p = ChParams(gamma=GAMMA)
    ops = ChOperators(m, b, p, bcs)
    state = initial_state(tanh_field(m, b), p, operators=ops)
    c0 = state.c.copy()
    for _ in range(20):
        state = ch_step(state, None, p, operators=ops)
    assert l2_norm(DgField(m, b, state.c.coeffs - c0.coeffs)) < 1e-3


@pytest.mark.parametrize("solver", ["direct", "sparse_direct", "bicgstab"])
def test_linear_solvers_agree(solver):
    m, b = box_mesh(4, 4), BasisSet(2, 2)
    ref = ChParams(gamma=GAMMA)
    state = random_state(m, b, 9, ref)
    out = ch_step(state, None, ChParams(gamma=GAMMA, linear_solver=solver))
    base = ch_step(state, None, ref)
    assert np.abs(out.c.coeffs - base.c.coeffs).max() < 1e-9


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([1, 2, 3]))
def test_mass_property(seed, degree):
    m, b = line_mesh(9), BasisSet(1, degree)
    p = ChParams(gamma=GAMMA)
    state = random_state(m, b, seed, p)
    m0 = state.c.integral()
    state = ch_step(state, None, p)
    assert abs(state.c.integral() - m0) <= 1e-10 * max(abs(m0), 2.0)
