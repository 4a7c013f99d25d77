"""Orthonormal Legendre modal bases and Gauss quadrature on [-1, 1]^d."""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

MAX_GAUSS_POINTS = 32


def legendre_eval(k, xi):
    """Unnormalized Legendre polynomial :math:`P_k(\\xi)` by three-term recurrence."""
    if k < 0:
        raise ValueError("order must be non-negative")
    xi = np.asarray(xi, dtype=float)
    p_prev, p = np.ones_like(xi), xi.copy()
    if k == 0:
        return p_prev if p_prev.ndim else float(p_prev)
    for n in range(1, k):
        p_prev, p = p, ((2 * n + 1) * xi * p - n * p_prev) / (n + 1)
    return p if p.ndim else float(p)


def legendre_derivative(k, xi):
    """:math:`P_k'(\\xi)` from :math:`P_{n+1}' = P_{n-1}' + (2n+1) P_n`."""
    xi = np.asarray(xi, dtype=float)
    d = [np.zeros_like(xi), np.ones_like(xi)]
    for n in range(1, k):
        d.append(d[n - 1] + (2 * n + 1) * legendre_eval(n, xi))
    out = d[k]
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes of shape (n_points, dimension) and positive weights."""

    points: np.ndarray
    weights: np.ndarray

    @property
    def dimension(self):
        return self.points.shape[1]

    def __len__(self):
        return self.weights.size


@lru_cache(maxsize=None)
def gauss_rule(n, dimension=1):
    """Gauss-Legendre rule with ``n`` points per axis on the reference cell.

    For ``dimension == 2`` the tensor product is returned with the first
    coordinate varying fastest.  ``dimension == 0`` gives the one-point rule
    used on the faces of 1D cells.
    """
    if not 1 <= n <= MAX_GAUSS_POINTS:
        raise ValueError(f"point count must lie in [1, {MAX_GAUSS_POINTS}], got {n}")
    if dimension == 0:
        rule = QuadratureRule(np.zeros((1, 0)), np.ones(1))
    else:
        x, w = np.polynomial.legendre.leggauss(n)
        grids = np.meshgrid(*([x] * dimension), indexing="ij")
        wgrids = np.meshgrid(*([w] * dimension), indexing="ij")
        pts = np.stack([g.ravel(order="F") for g in grids], axis=1)
        wts = np.prod([g.ravel(order="F") for g in wgrids], axis=0)
        rule = QuadratureRule(pts, wts)
    rule.points.setflags(write=False)
    rule.weights.setflags(write=False)
    return rule


@dataclass(frozen=True)
class BasisSet:
    """Tensor-product orthonormal Legendre basis of degree ``degree`` per axis.

    Mode ``k`` has multi-index ``modes[k]``; the 1D factor of order ``m`` is
    :math:`\\sqrt{(2m+1)/2}\\,P_m`, so every mode has unit L2 norm on the
    reference cell :math:`[-1,1]^d` and mode 0 equals
    :math:`1/\\sqrt{2^d}`.
    """

    dimension: int
    degree: int
    modes: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        if self.degree < 0:
            raise ValueError("degree must be non-negative")
        p = self.degree
        if self.dimension == 1:
            modes = tuple((m,) for m in range(p + 1))
        else:
            modes = tuple((mx, my) for my in range(p + 1) for mx in range(p + 1))
        object.__setattr__(self, "modes", modes)

    @property
    def n_modes(self):
        return len(self.modes)

    @property
    def reference_measure(self):
        return 2.0**self.dimension

    @property
    def constant_value(self):
        return 1.0 / np.sqrt(self.reference_measure)

    def _factors(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        p = self.degree
        norm = np.sqrt((2 * np.arange(p + 1) + 1) / 2.0)
        val = np.empty((self.dimension, points.shape[0], p + 1))
        der = np.empty_like(val)
        for a in range(self.dimension):
            for m in range(p + 1):
                val[a, :, m] = norm[m] * legendre_eval(m, points[:, a])
                der[a, :, m] = norm[m] * legendre_derivative(m, points[:, a])
        return val, der

    def values(self, points):
        """Mode values at reference points, shape (n_points, n_modes)."""
        val, _ = self._factors(points)
        idx = np.array(self.modes)
        out = np.ones((val.shape[1], self.n_modes))
        for a in range(self.dimension):
            out *= val[a][:, idx[:, a]]
        return out

    def gradients(self, points):
        """Reference-coordinate gradients, shape (n_points, n_modes, dimension)."""
        val, der = self._factors(points)
        idx = np.array(self.modes)
        out = np.ones((val.shape[1], self.n_modes, self.dimension))
        for g in range(self.dimension):
            for a in range(self.dimension):
                table = der[a] if a == g else val[a]
                out[:, :, g] *= table[:, idx[:, a]]
        return out


def _check_mode(basis, k):
    if not 0 <= k < basis.n_modes:
        raise IndexError(f"mode {k} out of range for {basis.n_modes} modes")


def eval_basis(basis, k, point):
    _check_mode(basis, k)
    return float(basis.values(np.reshape(point, (1, basis.dimension)))[0, k])


def eval_basis_gradient(basis, k, point, cell_size=None):
    """Physical gradient of mode ``k`` at a reference point.

    ``cell_size`` holds the cell extents per axis; the affine map from
    :math:`[-1,1]^d` scales each derivative by ``2 / cell_size``.  Without it
    the reference gradient is returned.
    """
    _check_mode(basis, k)
    grad = basis.gradients(np.reshape(point, (1, basis.dimension)))[0, k]
    if cell_size is not None:
        grad = grad * 2.0 / np.asarray(cell_size, dtype=float)
    return grad


def face_rule(basis, axis, side, n):
    """Quadrature on the reference face ``xi[axis] = side``.

    Returns the volume-embedded points (n_points, dimension) and weights that
    sum to the reference face measure.
    """
    tangential = gauss_rule(n, basis.dimension - 1)
    pts = np.empty((len(tangential), basis.dimension))
    pts[:, axis] = float(side)
    others = [a for a in range(basis.dimension) if a != axis]
    pts[:, others] = tangential.points
    return pts, np.asarray(tangential.weights)
