import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridch.basis import BasisSet
from hybridch.field import DgField, cell_mean, evaluate_at, l2_error, l2_norm, project_function

from conftest import box_mesh, line_mesh


def test_project_constant():
    m, b = line_mesh(7), BasisSet(1, 3)
    f = project_function(m, b, lambda x: 5.0 + 0 * x)
    assert np.abs(f.cell_means() - 5).max() < 1e-13
    assert np.abs(f.coeffs[:, 1:]).max() < 1e-13


def test_project_linear_reproduces(rng):
    m, b = line_mesh(9), BasisSet(1, 1)
    f = project_function(m, b, lambda x: x)
    pts = rng.uniform(-1, 1, 20)
    assert np.abs(f.evaluate(pts) - pts).max() < 1e-12


def test_sin_projection_slope():
    b = BasisSet(1, 2)
    errs = [l2_error(project_function(line_mesh(n), b, lambda x: np.sin(np.pi * x)), lambda x: np.sin(np.pi * x))
            for n in (10, 20, 40)]
    slope = np.polyfit(np.log([0.2, 0.1, 0.05]), np.log(errs), 1)[0]
    assert 2.8 <= slope <= 3.2


def test_evaluate_at_examples(rng):
    m, b = line_mesh(5), BasisSet(1, 2)
    zero = DgField(m, b)
    assert evaluate_at(zero, 3, [0.4]) == 0.0
    three = project_function(m, b, lambda x: 3 + 0 * x)
    assert evaluate_at(three, 2, [-0.9]) == pytest.approx(3.0, abs=1e-13)
    sq = project_function(m, b, lambda x: x**2)
    for _ in range(5):
        cell = int(rng.integers(5))
        ref = rng.uniform(-1, 1)
        x = m.cell_centers[cell, 0] + 0.5 * ref * m.spacing[0]
        assert evaluate_at(sq, cell, [ref]) == pytest.approx(x**2, abs=1e-12)


def test_evaluate_at_out_of_range():
    f = DgField(line_mesh(3), BasisSet(1, 1))
    with pytest.raises(IndexError):
        evaluate_at(f, 3, [0.0])
    with pytest.raises(IndexError):
        cell_mean(f, -1)


def test_cell_mean_examples():
    m = line_mesh(2, 0.0, 2.0)
    b = BasisSet(1, 2)
    assert cell_mean(project_function(m, b, lambda x: 0 * x - 1.25), 1) == pytest.approx(-1.25)
    assert cell_mean(project_function(m, b, lambda x: x), 0) == pytest.approx(0.5, abs=1e-14)
    assert cell_mean(DgField(m, b), 0) == 0.0


def test_cell_mean_from_mode_zero_2d():
    m, b = box_mesh(3, 2), BasisSet(2, 2)
    f = project_function(m, b, lambda x, y: np.exp(x) * np.cos(y), n_points=8)
    # independent mean: fine midpoint sums per cell
    g = (np.arange(200) + 0.5) / 200
    ex = []
    for c in m.cell_centers:
        x = c[0] + (g - 0.5) * m.spacing[0]
        y = c[1] + (g - 0.5) * m.spacing[1]
        ex.append(np.mean(np.exp(x)) * np.mean(np.cos(y)))
    assert np.abs(f.cell_means() - np.array(ex)).max() < 1e-5


def test_l2_error_examples():
    m, b = line_mesh(6), BasisSet(1, 2)
    g = lambda x: 1 - 2 * x + 3 * x**2
    assert l2_error(project_function(m, b, g), g) <= 1e-12
    delta = 0.3
    err = l2_error(project_function(m, b, lambda x: g(x) + delta), g)
    assert err == pytest.approx(delta * np.sqrt(2), abs=1e-10)
    assert l2_error(DgField(m, b), lambda x: 0 * x) == 0.0


def test_parseval_norm():
    m, b = box_mesh(4, 3), BasisSet(2, 2)
    f = project_function(m, b, lambda x, y: x * y + 1)
    assert l2_norm(f) == pytest.approx(l2_error(f, lambda x, y: 0 * x), rel=1e-12)


def _random_field(mesh, basis, seed):
    return DgField(mesh, basis, np.random.default_rng(seed).normal(size=(mesh.n_cells, basis.n_modes)))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 2), st.integers(0, 4), st.integers(0, 10_000))
def test_projection_idempotent(dim, p, seed):
    m = line_mesh(5) if dim == 1 else box_mesh(3, 2)
    b = BasisSet(dim, p)
    f = _random_field(m, b, seed)
    # pointwise evaluation of the piecewise polynomial, cell by cell
    pts_fn = lambda *xyz: f.evaluate(np.stack(np.broadcast_arrays(*xyz), -1).reshape(-1, dim)).reshape(xyz[0].shape)
    again = project_function(m, b, pts_fn)
    assert np.abs(again.coeffs - f.coeffs).max() < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5))
def test_projection_linear(alpha, beta):
    m, b = line_mesh(6), BasisSet(1, 3)
    f = lambda x: np.sin(3 * x)
    g = lambda x: np.exp(x)
    lhs = project_function(m, b, lambda x: alpha * f(x) + beta * g(x)).coeffs
    rhs = alpha * project_function(m, b, f).coeffs + beta * project_function(m, b, g).coeffs
    assert np.abs(lhs - rhs).max() < 1e-12


def test_field_shape_checked():
    with pytest.raises(ValueError):
        DgField(line_mesh(3), BasisSet(1, 1), np.zeros(5))
    with pytest.raises(ValueError):
        DgField(box_mesh(2, 2), BasisSet(1, 1))
