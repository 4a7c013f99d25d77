"""DG and finite-volume fields on a shared Cartesian mesh.

Pointwise functions passed to this module are called with one coordinate
array per axis, ``f(x)`` in 1D and ``f(x, y)`` in 2D, and must broadcast.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np

from .basis import gauss_rule


def physical_points(mesh, cells, ref_points):
    """Map reference points (n_q, d) into cells, giving shape (n_cells, n_q, d)."""
    centers = mesh.cell_centers[cells]
    return centers[:, None, :] + 0.5 * np.asarray(ref_points)[None, :, :] * mesh.spacing


def call_pointwise(f, pts):
    """Evaluate ``f`` on an array of points with trailing axis ``d``."""
    out = f(*np.moveaxis(pts, -1, 0))
    return np.broadcast_to(np.asarray(out, dtype=float), pts.shape[:-1])


def _volume_scale(mesh, basis):
    """Affine Jacobian determinant |cell| / |reference cell|."""
    return mesh.cell_measure[0] / basis.reference_measure


@dataclass
class DgField:
    """Modal coefficients ``coeffs[cell, mode]`` over a :class:`BasisSet`."""

    mesh: object
    basis: object
    coeffs: np.ndarray = None
    name: str = "c"

    def __post_init__(self):
        shape = (self.mesh.n_cells, self.basis.n_modes)
        if self.coeffs is None:
            self.coeffs = np.zeros(shape)
        else:
            self.coeffs = np.array(self.coeffs, dtype=float).reshape(shape)
        if self.basis.dimension != self.mesh.dimension:
            raise ValueError("basis and mesh dimensions differ")

    def copy(self):
        return DgField(self.mesh, self.basis, self.coeffs.copy(), self.name)

    @property
    def vector(self):
        return self.coeffs.ravel()

    def cell_means(self):
        return self.coeffs[:, 0] * self.basis.constant_value

    def integral(self):
        """Integral over the domain, from the constant modes only."""
        return float(np.sum(self.cell_means() * self.mesh.cell_measure))

    def quadrature_values(self, rule):
        """Values at the rule's points in every cell, shape (n_cells, n_q)."""
        return self.coeffs @ self.basis.values(rule.points).T

    def evaluate(self, points):
        """Evaluate at physical points of shape (n, d) (or (n,) in 1D)."""
        cells, ref = self.mesh.locate(points)
        phi = self.basis.values(ref)
        return np.einsum("nk,nk->n", self.coeffs[cells], phi)


@dataclass
class FixedValue:
    value: object


@dataclass
class ZeroGradient:
    pass


@dataclass
class PeriodicBC:
    pass


@dataclass
class FvField:
    """One value per cell plus a boundary descriptor per patch name."""

    mesh: object
    values: np.ndarray = None
    boundary: dict = dc_field(default_factory=dict)
    name: str = "c"

    def __post_init__(self):
        if self.values is None:
            self.values = np.zeros(self.mesh.n_cells)
        self.values = np.array(self.values, dtype=float).reshape(self.mesh.n_cells)

    def copy(self):
        return FvField(self.mesh, self.values.copy(), dict(self.boundary), self.name)

    def integral(self):
        return float(np.sum(self.values * self.mesh.cell_measure))


@dataclass
class FvVectorField:
    """One vector per cell, shape (n_cells, dimension)."""

    mesh: object
    values: np.ndarray = None
    boundary: dict = dc_field(default_factory=dict)
    name: str = "U"

    def __post_init__(self):
        shape = (self.mesh.n_cells, self.mesh.dimension)
        if self.values is None:
            self.values = np.zeros(shape)
        self.values = np.array(self.values, dtype=float).reshape(shape)

    def copy(self):
        return FvVectorField(self.mesh, self.values.copy(), dict(self.boundary), self.name)


def boundary_condition(fv, patch_id):
    """Boundary descriptor of a patch; periodic patches need none."""
    mesh = fv.mesh
    patch = mesh.patches[patch_id]
    if patch.tag == "periodic":
        return PeriodicBC()
    try:
        return fv.boundary[patch.name]
    except KeyError:
        raise KeyError(f"field {fv.name!r} has no condition on patch {patch.name!r}") from None


def boundary_face_values(fv):
    """Values on the open (non-periodic) boundary faces.

    Returns ``(faces, values)`` with values of shape (n,) for scalars or
    (n, d) for vectors.  Fixed values are taken as given; zero-gradient faces
    copy the owner cell.
    """
    mesh = fv.mesh
    faces = mesh.open_boundary_faces()
    vals = fv.values[mesh.bface_owner[faces]].copy()
    for k, b in enumerate(faces):
        bc = boundary_condition(fv, mesh.bface_patch[b])
        if isinstance(bc, FixedValue):
            vals[k] = bc.value
        elif not isinstance(bc, ZeroGradient):
            raise TypeError(f"unsupported boundary condition {bc!r}")
    return faces, vals


def face_average(fv):
    """Arithmetic mean of owner and neighbor values on every connection."""
    conn = fv.mesh.connections()
    return 0.5 * (fv.values[conn.owner] + fv.values[conn.neighbor])


def face_velocities(velocity):
    """Normal face velocities from a cellwise-constant FV velocity field.

    Returns ``(un_conn, faces, un_bnd)``: arithmetic means projected on
    ``+e_axis`` for every connection, and boundary values projected on the
    outward normal, using the field's boundary descriptors.
    """
    mesh = velocity.mesh
    conn = mesh.connections()
    u = velocity.values
    un_conn = 0.5 * (u[conn.owner, conn.axis] + u[conn.neighbor, conn.axis])
    faces = mesh.open_boundary_faces()
    ub = u[mesh.bface_owner[faces]].copy()
    for k, b in enumerate(faces):
        bc = boundary_condition(velocity, mesh.bface_patch[b]) if velocity.boundary else ZeroGradient()
        if isinstance(bc, FixedValue):
            ub[k] = bc.value
    un_bnd = np.einsum("fd,fd->f", ub, mesh.bface_normal[faces])
    return un_conn, faces, un_bnd


def project_function(mesh, basis, f, n_points=None, name="c"):
    """Cell-wise L2 projection of a pointwise function.

    With the orthonormal basis the mass matrix of every cell is a multiple of
    the identity, so each coefficient is a quadrature inner product with one
    mode.  The default rule has ``degree + 2`` points per axis.
    """
    rule = gauss_rule(n_points or basis.degree + 2, basis.dimension)
    phi = basis.values(rule.points)
    vals = call_pointwise(f, physical_points(mesh, np.arange(mesh.n_cells), rule.points))
    coeffs = (vals * rule.weights) @ phi
    return DgField(mesh, basis, coeffs, name)


def evaluate_at(field, cell_index, ref_point):
    if not 0 <= cell_index < field.mesh.n_cells:
        raise IndexError(f"cell index {cell_index} out of range")
    phi = field.basis.values(np.reshape(ref_point, (1, field.basis.dimension)))[0]
    return float(field.coeffs[cell_index] @ phi)


def cell_mean(field, cell_index):
    if not 0 <= cell_index < field.mesh.n_cells:
        raise IndexError(f"cell index {cell_index} out of range")
    return float(field.coeffs[cell_index, 0] * field.basis.constant_value)


def l2_error(field, g, n_points=None):
    """L2 distance to ``g`` using ``2p + 2`` Gauss points per axis by default."""
    basis, mesh = field.basis, field.mesh
    rule = gauss_rule(n_points or 2 * basis.degree + 2, basis.dimension)
    exact = call_pointwise(g, physical_points(mesh, np.arange(mesh.n_cells), rule.points))
    diff = field.quadrature_values(rule) - exact
    return float(np.sqrt(_volume_scale(mesh, basis) * np.sum(diff**2 * rule.weights)))


def l2_norm(field):
    """L2 norm of a DG field, exact through Parseval on the orthonormal modes."""
    return float(np.sqrt(_volume_scale(field.mesh, field.basis) * np.sum(field.coeffs**2)))
