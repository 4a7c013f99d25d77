import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from hybridch.basis import BasisSet
from hybridch.dg_operators import BoundarySpec, Dirichlet, sip_laplacian
from hybridch.linalg import (
    DIRECT_MAX_DIMENSION,
    BreakdownError,
    ConvergenceError,
    LinearSolverError,
    SingularMatrixError,
    SparseSystem,
    assemble_blocks,
    diagonal_blocks,
    solve,
    solve_bicgstab,
    solve_cg,
    solve_direct,
    solve_sparse,
)

from conftest import box_mesh


def residual_inf(A, x, b):
    return np.abs(b - A @ x).max()


def test_direct_identity(rng):
    b = rng.normal(size=7)
    assert np.array_equal(solve_direct(SparseSystem(sp.identity(7), b)), b)


def test_direct_two_by_two():
    x = solve_direct(SparseSystem(np.array([[2.0, 1.0], [1.0, 2.0]]), [3.0, 3.0]))
    assert np.allclose(x, [1, 1], atol=1e-15)


def test_direct_random_spd(rng):
    G = rng.normal(size=(50, 50))
    A = G.T @ G + np.eye(50)
    b = rng.normal(size=50)
    x = solve_direct(SparseSystem(A, b))
    assert residual_inf(A, x, b) <= 1e-10 * (1 + np.abs(b).max())


def test_direct_singular():
    with pytest.raises(SingularMatrixError):
        solve_direct(SparseSystem(np.array([[1.0, 2.0], [2.0, 4.0]]), [1.0, 2.0]))


def test_direct_guard():
    n = DIRECT_MAX_DIMENSION + 1
    with pytest.raises(LinearSolverError):
        solve_direct(SparseSystem(sp.identity(n, format="csr"), np.ones(n)))


def test_sparse_singular():
    with pytest.raises(SingularMatrixError):
        solve_sparse(SparseSystem(sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]])), [1.0, 2.0]))


def test_system_validation():
    with pytest.raises(ValueError):
        SparseSystem(np.zeros((2, 3)), [1, 2])
    with pytest.raises(ValueError):
        SparseSystem(np.eye(2), [1, 2, 3])
    with pytest.raises(ValueError):
        SparseSystem(np.eye(2), [1, 2], x0=np.zeros(3))


def test_assemble_blocks_accumulates():
    blk = np.arange(4.0).reshape(1, 2, 2)
    A = assemble_blocks(2, 2, [0, 0, 1], [0, 0, 1], np.concatenate([blk, blk, blk]))
    dense = A.toarray()
    assert np.array_equal(dense[:2, :2], 2 * blk[0])
    assert np.array_equal(dense[2:, 2:], blk[0])
    assert np.array_equal(diagonal_blocks(A, 2)[1], blk[0])
    with pytest.raises(Exception):
        assemble_blocks(2, 2, [0], [2], blk)


@pytest.mark.parametrize("pre", ["none", "jacobi", "block_jacobi"])
def test_bicgstab_identity(pre, rng):
    b = rng.normal(size=10)
    x, it = solve_bicgstab(SparseSystem(sp.identity(10, format="csr"), b, block_size=2), pre)
    assert it <= 1 and np.allclose(x, b)


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("pre", ["none", "jacobi", "block_jacobi"])
def test_bicgstab_matches_direct(seed, pre):
    r = np.random.default_rng(seed)
    A = r.normal(size=(200, 200)) + 30 * np.eye(200)
    b = r.normal(size=200)
    system = SparseSystem(sp.csr_matrix(A), b, block_size=4)
    x, _ = solve_bicgstab(system, pre, tol=1e-13, max_iter=2000)
    assert np.abs(x - solve_direct(system)).max() < 1e-8
    assert np.linalg.norm(b - A @ x) <= 1e-13 * np.linalg.norm(b) * 1.0001


def test_bicgstab_sip_poisson_residual():
    m, basis = box_mesh(8, 8), BasisSet(2, 2)
    spec = BoundarySpec({p.name: Dirichlet(0.0) for p in m.patches})
    A, _ = sip_laplacian(m, basis, 1.0, boundary=spec)
    b = np.random.default_rng(0).normal(size=A.shape[0])
    x, _ = solve_bicgstab(SparseSystem(A, b, block_size=basis.n_modes), "block_jacobi", tol=1e-12, max_iter=5000)
    # recomputed from the assembled matrix, not the solver's own residual
    assert np.linalg.norm(b - A @ x) <= 1e-12 * np.linalg.norm(b)


def test_block_jacobi_one_iteration(rng):
    blocks = rng.normal(size=(6, 3, 3)) + 4 * np.eye(3)
    A = assemble_blocks(6, 3, np.arange(6), np.arange(6), blocks)
    b = rng.normal(size=18)
    x, it = solve_bicgstab(SparseSystem(A, b, block_size=3), "block_jacobi", tol=1e-12)
    assert it == 1
    assert np.linalg.norm(b - A @ x) <= 1e-12 * np.linalg.norm(b)


def test_bicgstab_max_iter_returns_best_iterate():
    r = np.random.default_rng(1)
    A = sp.csr_matrix(r.normal(size=(60, 60)) + 2 * np.eye(60))
    b = r.normal(size=60)
    with pytest.raises(ConvergenceError) as info:
        solve_bicgstab(SparseSystem(A, b), "none", tol=1e-14, max_iter=3)
    err = info.value
    assert err.x is not None and err.iterations == 3
    assert np.linalg.norm(b - A @ err.x) / np.linalg.norm(b) == pytest.approx(err.residual)


def test_bicgstab_breakdown():
    A = sp.csr_matrix(np.array([[0.0, 1.0], [-1.0, 0.0]]))
    with pytest.raises(BreakdownError):
        solve_bicgstab(SparseSystem(A, np.array([1.0, 0.0])), "none")


def test_bicgstab_zero_rhs():
    x, it = solve_bicgstab(SparseSystem(sp.identity(4, format="csr"), np.zeros(4)))
    assert it == 0 and not x.any()


def test_cg_spd(rng):
    G = rng.normal(size=(40, 40))
    A = sp.csr_matrix(G.T @ G + np.eye(40))
    b = rng.normal(size=40)
    x, _ = solve_cg(A, b, atol=1e-12, max_iter=1000)
    assert residual_inf(A, x, b) <= 1e-12


def test_cg_consistent_singular():
    # 1D Neumann Laplacian: singular, consistent right-hand side with zero sum
    n = 30
    A = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]).tolil()
    A[0, 0] = A[-1, -1] = 1.0
    A = A.tocsr()
    b = np.sin(np.linspace(0, 2 * np.pi, n, endpoint=False))
    b -= b.mean()
    x, _ = solve_cg(A, b, atol=1e-12, max_iter=1000)
    assert residual_inf(A, x, b) <= 1e-12


def test_solve_dispatch(rng):
    A = sp.csr_matrix(np.diag(rng.uniform(1, 2, 8)))
    b = rng.normal(size=8)
    for method in ("direct", "sparse_direct", "bicgstab"):
        assert residual_inf(A, solve(SparseSystem(A, b), method), b) < 1e-10
    with pytest.raises(ValueError):
        solve(SparseSystem(A, b), "gmres")


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 40), st.integers(0, 10_000))
def test_recomputed_residual_property(n, seed):
    r = np.random.default_rng(seed)
    A = r.normal(size=(n, n)) + n * np.eye(n)
    b = r.normal(size=n)
    system = SparseSystem(sp.csr_matrix(A), b)
    x, _ = solve_bicgstab(system, "jacobi", tol=1e-11, max_iter=500)
    assert np.linalg.norm(b - A @ x) <= 1e-11 * np.linalg.norm(b) * 1.0001
    xd = solve_direct(system)
    assert np.abs(b - A @ xd).max() <= 1e-10 * (1 + np.abs(b).max())
