"""Block-sparse assembly and linear solvers.

Operator matrices are ``scipy.sparse.bsr_matrix`` objects whose blocks are
``(cell, cell)`` couplings.  Direct solves go through LAPACK/SuperLU; the
Krylov solvers are implemented here so they can report iteration counts and
breakdowns and take block-Jacobi preconditioning on the cell blocks.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DIRECT_MAX_DIMENSION = 20_000


class LinearSolverError(RuntimeError):
    pass


class SingularMatrixError(LinearSolverError):
    pass


class ConvergenceError(LinearSolverError):
    """Iteration limit reached; ``x`` holds the best iterate."""

    def __init__(self, message, x=None, residual=None, iterations=None):
        super().__init__(message)
        self.x = x
        self.residual = residual
        self.iterations = iterations


class BreakdownError(LinearSolverError):
    pass


@dataclass
class SparseSystem:
    matrix: sp.spmatrix
    rhs: np.ndarray
    x0: np.ndarray = None
    block_size: int = 1

    def __post_init__(self):
        self.rhs = np.asarray(self.rhs, dtype=float)
        n, m = self.matrix.shape
        if n != m:
            raise ValueError("system matrix must be square")
        if self.rhs.shape != (n,):
            raise ValueError(f"rhs length {self.rhs.size} does not match dimension {n}")
        if self.x0 is not None and np.shape(self.x0) != (n,):
            raise ValueError("initial guess has the wrong length")

    @property
    def dimension(self):
        return self.matrix.shape[0]

    def residual(self, x):
        return self.rhs - self.matrix @ x


def assemble_blocks(n_blocks, block_size, rows, cols, blocks):
    """Sum ``blocks[k]`` into block position ``(rows[k], cols[k])``.

    Entries are accumulated in the order given, so the result is reproducible.
    """
    rows = np.asarray(rows, dtype=int)
    cols = np.asarray(cols, dtype=int)
    blocks = np.asarray(blocks, dtype=float).reshape(-1, block_size, block_size)
    ar = np.arange(block_size)
    r = (rows[:, None, None] * block_size + ar[None, :, None]) + 0 * ar[None, None, :]
    c = (cols[:, None, None] * block_size + ar[None, None, :]) + 0 * ar[None, :, None]
    n = n_blocks * block_size
    mat = sp.coo_matrix((blocks.ravel(), (r.ravel(), c.ravel())), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    return mat.tobsr(blocksize=(block_size, block_size))


def diagonal_blocks(matrix, block_size):
    """Dense diagonal blocks, shape (n_blocks, block_size, block_size)."""
    coo = sp.coo_matrix(matrix)
    n_blocks = matrix.shape[0] // block_size
    keep = coo.row // block_size == coo.col // block_size
    out = np.zeros((n_blocks, block_size, block_size))
    np.add.at(
        out,
        (coo.row[keep] // block_size, coo.row[keep] % block_size, coo.col[keep] % block_size),
        coo.data[keep],
    )
    return out


def solve_direct(system):
    """Dense LU with partial pivoting for systems up to 20,000 unknowns."""
    n = system.dimension
    if n > DIRECT_MAX_DIMENSION:
        raise LinearSolverError(f"dimension {n} exceeds the dense solver limit {DIRECT_MAX_DIMENSION}")
    dense = system.matrix.toarray() if sp.issparse(system.matrix) else np.asarray(system.matrix)
    with warnings.catch_warnings():
        # singularity is reported below as an exception
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(dense, check_finite=True)
    diag = np.abs(np.diag(lu))
    if diag.min() <= np.finfo(float).eps * max(diag.max(), 1.0) * n:
        raise SingularMatrixError("matrix is singular to machine precision")
    return scipy.linalg.lu_solve((lu, piv), system.rhs)


def solve_sparse(system):
    """Sparse LU (SuperLU) for systems beyond the dense limit."""
    try:
        lu = spla.splu(sp.csc_matrix(system.matrix))
    except RuntimeError as exc:
        raise SingularMatrixError(str(exc)) from exc
    x = lu.solve(system.rhs)
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError("sparse LU produced non-finite values")
    return x


def _preconditioner(matrix, kind, block_size):
    if kind in (None, "none"):
        return lambda v: v
    if kind == "jacobi":
        d = matrix.diagonal()
        if np.any(d == 0):
            raise LinearSolverError("Jacobi preconditioner needs a nonzero diagonal")
        inv = 1.0 / d
        return lambda v: inv * v
    if kind == "block_jacobi":
        inv = np.linalg.inv(diagonal_blocks(matrix, block_size))
        nb = inv.shape[0]

        def apply(v):
            return np.einsum("bij,bj->bi", inv, v.reshape(nb, block_size)).ravel()

        return apply
    raise ValueError(f"unknown preconditioner {kind!r}")


def solve_bicgstab(system, preconditioner="block_jacobi", tol=1e-10, max_iter=1000):
    """Right-preconditioned BiCGStab.

    Returns ``(x, iterations)`` with ``||b - A x|| <= tol * ||b||``.
    ``block_jacobi`` inverts the ``system.block_size`` diagonal blocks.
    """
    A, b = system.matrix, system.rhs
    apply_k = _preconditioner(A, preconditioner, system.block_size)
    x = np.zeros_like(b) if system.x0 is None else np.array(system.x0, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), 0
    target = tol * bnorm
    r = b - A @ x
    if np.linalg.norm(r) <= target:
        return x, 0
    r_hat = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    best_x, best_res = x.copy(), np.linalg.norm(r)
    tiny = np.finfo(float).tiny ** 0.5
    for it in range(1, max_iter + 1):
        rho_new = r_hat @ r
        if abs(rho_new) < tiny * bnorm**2:
            raise BreakdownError(f"BiCGStab breakdown (rho = {rho_new:.3e}) at iteration {it}")
        beta = (rho_new / rho) * (alpha / omega)
        p = r + beta * (p - omega * v)
        y = apply_k(p)
        v = A @ y
        rv = r_hat @ v
        if rv == 0.0:
            raise BreakdownError(f"BiCGStab breakdown (r_hat . v = 0) at iteration {it}")
        alpha = rho_new / rv
        x_half = x + alpha * y
        s = r - alpha * v
        if np.linalg.norm(s) <= target:
            return x_half, it
        z = apply_k(s)
        t = A @ z
        tt = t @ t
        if tt == 0.0:
            raise BreakdownError(f"BiCGStab breakdown (t = 0) at iteration {it}")
        omega = (t @ s) / tt
        x = x_half + omega * z
        r = s - omega * t
        rho = rho_new
        res = np.linalg.norm(r)
        if res < best_res:
            best_x, best_res = x.copy(), res
        if res <= target:
            return x, it
        if omega == 0.0:
            raise BreakdownError(f"BiCGStab breakdown (omega = 0) at iteration {it}")
    raise ConvergenceError(
        f"BiCGStab did not reach tol {tol:g} in {max_iter} iterations "
        f"(relative residual {best_res / bnorm:.3e})",
        x=best_x,
        residual=best_res / bnorm,
        iterations=max_iter,
    )


def solve_cg(matrix, rhs, x0=None, atol=1e-12, max_iter=10_000, preconditioner="jacobi"):
    """Preconditioned conjugate gradients for symmetric positive semi-definite systems.

    Stops when the max-norm of the residual drops below ``atol``.  Consistent
    singular systems are fine: iterates stay in the range of the matrix when
    started from zero.
    """
    apply_k = _preconditioner(matrix, preconditioner, 1)
    x = np.zeros_like(rhs) if x0 is None else np.array(x0, dtype=float)
    r = rhs - matrix @ x
    if np.abs(r).max() <= atol:
        return x, 0
    z = apply_k(r)
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        q = matrix @ p
        pq = p @ q
        if pq <= 0.0:
            raise BreakdownError(f"CG breakdown (p.Ap = {pq:.3e}) at iteration {it}")
        alpha = rz / pq
        x += alpha * p
        r -= alpha * q
        if np.abs(r).max() <= atol:
            return x, it
        z = apply_k(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(
        f"CG did not reach atol {atol:g} in {max_iter} iterations",
        x=x,
        residual=float(np.abs(r).max()),
        iterations=max_iter,
    )


def solve(system, method="sparse_direct", tol=1e-12, max_iter=2000):
    """Dispatch to one of ``direct``, ``sparse_direct`` or ``bicgstab``."""
    if method == "direct":
        return solve_direct(system)
    if method == "sparse_direct":
        return solve_sparse(system)
    if method == "bicgstab":
        x, _ = solve_bicgstab(system, "block_jacobi", tol=tol, max_iter=max_iter)
        return x
    raise ValueError(f"unknown linear solver {method!r}")
