"""Block-sparse DG operators on Cartesian meshes.

Every assembly routine returns ``(matrix, rhs)`` such that ``matrix @ x - rhs``
is the weak form of the operator tested against every basis function, with
boundary data moved into ``rhs``.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .basis import face_rule, gauss_rule
from .field import call_pointwise, face_velocities
from .linalg import assemble_blocks

DEFAULT_PENALTY = 4.0


@dataclass(frozen=True)
class Dirichlet:
    value: object = 0.0


@dataclass(frozen=True)
class Neumann:
    """Prescribed outward normal derivative ``du/dn``."""

    flux: object = 0.0


@dataclass(frozen=True)
class Periodic:
    pass


class BoundarySpec(dict):
    """Patch name to :class:`Dirichlet`, :class:`Neumann` or :class:`Periodic`."""

    def validate(self, mesh):
        names = {p.name for p in mesh.patches}
        unknown = set(self) - names
        if unknown:
            raise KeyError(f"unknown patch(es) in boundary spec: {sorted(unknown)}")
        for p in mesh.patches:
            cond = self.get(p.name)
            if p.tag == "periodic":
                if cond is not None and not isinstance(cond, Periodic):
                    raise ValueError(f"patch {p.name!r} is periodic in the mesh")
            elif cond is None:
                raise KeyError(f"no boundary condition for patch {p.name!r}")
            elif isinstance(cond, Periodic):
                raise ValueError(f"patch {p.name!r} is not tagged periodic in the mesh")
        return self

    @classmethod
    def no_flux(cls, mesh):
        return cls({p.name: Periodic() if p.tag == "periodic" else Neumann(0.0) for p in mesh.patches})


def _data(value, pts):
    if callable(value):
        return call_pointwise(value, pts)
    return np.full(pts.shape[:-1], float(value))


@lru_cache(maxsize=None)
def _volume_tables(basis, n):
    rule = gauss_rule(n, basis.dimension)
    return rule, basis.values(rule.points), basis.gradients(rule.points)


@lru_cache(maxsize=None)
def _face_tables(basis, axis, side, n):
    pts, w = face_rule(basis, axis, side, n)
    return pts, w, basis.values(pts), basis.gradients(pts)[:, :, axis]


def _quad_points(basis):
    return basis.degree + 2


def _face_scale(mesh, measure):
    # |face| / |reference face|; reference face measure is 2^(d-1)
    return measure / 2.0 ** (mesh.dimension - 1)


def _open_groups(mesh):
    """Non-periodic boundary faces grouped by (axis, side)."""
    faces = mesh.open_boundary_faces()
    for a in range(mesh.dimension):
        for s in (-1, 1):
            sel = faces[(mesh.bface_axis[faces] == a) & (mesh.bface_side[faces] == s)]
            if sel.size:
                yield a, s, sel


def _face_physical(mesh, bfaces, ref_pts):
    centers = mesh.cell_centers[mesh.bface_owner[bfaces]]
    return centers[:, None, :] + 0.5 * ref_pts[None, :, :] * mesh.spacing


def mass_matrix(mesh, basis):
    """Block-diagonal mass matrix; each block is |cell|/|reference cell| times I.

    The identity is the exact Gram matrix of the orthonormal modes, so it is
    used directly instead of its quadrature approximation.
    """
    jac = mesh.cell_measure / basis.reference_measure
    ref = np.eye(basis.n_modes)
    cells = np.arange(mesh.n_cells)
    return assemble_blocks(mesh.n_cells, basis.n_modes, cells, cells, jac[:, None, None] * ref)


def weighted_mass_matrix(mesh, basis, weight_values, n):
    """Blocks of :math:`\\int w\\,\\psi_a \\psi_b` with ``w`` given at the n-point rule."""
    rule, phi, _ = _volume_tables(basis, n)
    jac = mesh.cell_measure / basis.reference_measure
    blocks = np.einsum("q,cq,qa,qb->cab", rule.weights, weight_values, phi, phi)
    cells = np.arange(mesh.n_cells)
    return assemble_blocks(mesh.n_cells, basis.n_modes, cells, cells, jac[:, None, None] * blocks)


def face_penalty(mesh, basis, kappa, eta, axis):
    """Penalty ``eta * kappa * (p+1)^2 / h`` for faces normal to ``axis``."""
    h = mesh.spacing[axis]
    h_face = 2.0 * h * h / (h + h)  # harmonic mean of the two cell extents
    return eta * kappa * (basis.degree + 1) ** 2 / h_face


def sip_laplacian(mesh, basis, kappa, eta=DEFAULT_PENALTY, boundary=None):
    """Symmetric interior penalty discretization of :math:`-\\kappa\\Delta u`.

    Dirichlet data is imposed weakly through the standard boundary penalty
    and consistency terms; Neumann data enters the right-hand side as
    :math:`\\kappa\\int g v`.  The matrix is symmetric positive semi-definite.
    """
    if eta <= 0:
        raise ValueError("penalty factor must be positive")
    if kappa < 0:
        raise ValueError("diffusivity must be non-negative")
    boundary = BoundarySpec.no_flux(mesh) if boundary is None else BoundarySpec(boundary)
    boundary.validate(mesh)
    n_q = _quad_points(basis)
    N = basis.n_modes
    rows, cols, blocks = [], [], []
    rhs = np.zeros((mesh.n_cells, N))

    rule, _, grad = _volume_tables(basis, n_q)
    inv_h = 2.0 / mesh.spacing
    jac = mesh.cell_measure[0] / basis.reference_measure
    stiff = jac * np.einsum("q,qad,qbd,d->ab", rule.weights, grad, grad, inv_h**2)
    cells = np.arange(mesh.n_cells)
    rows.append(cells)
    cols.append(cells)
    blocks.append(np.broadcast_to(kappa * stiff, (mesh.n_cells, N, N)))

    conn = mesh.connections()
    for a in range(mesh.dimension):
        sel = np.flatnonzero(conn.axis == a)
        if not sel.size:
            continue
        _, w, phi_o, dphi_o = _face_tables(basis, a, 1, n_q)
        _, _, phi_n, dphi_n = _face_tables(basis, a, -1, n_q)
        dphi_o = dphi_o * inv_h[a]
        dphi_n = dphi_n * inv_h[a]
        sigma = face_penalty(mesh, basis, kappa, eta, a)
        jf = _face_scale(mesh, conn.measure[sel[0]])
        sides = ((1.0, phi_o, dphi_o), (-1.0, phi_n, dphi_n))
        for i, (s_x, phi_x, dphi_x) in enumerate(sides):
            for j, (s_y, phi_y, dphi_y) in enumerate(sides):
                # row: test on side x; column: trial on side y
                blk = jf * (
                    -0.5 * kappa * s_x * np.einsum("q,qa,qb->ab", w, phi_x, dphi_y)
                    - 0.5 * kappa * s_y * np.einsum("q,qa,qb->ab", w, dphi_x, phi_y)
                    + sigma * s_x * s_y * np.einsum("q,qa,qb->ab", w, phi_x, phi_y)
                )
                rows.append(conn.owner[sel] if i == 0 else conn.neighbor[sel])
                cols.append(conn.owner[sel] if j == 0 else conn.neighbor[sel])
                blocks.append(np.broadcast_to(blk, (sel.size, N, N)))

    for a, s, faces in _open_groups(mesh):
        pts, w, phi, dphi = _face_tables(basis, a, s, n_q)
        dphi = dphi * inv_h[a] * s  # outward normal derivative
        sigma = face_penalty(mesh, basis, kappa, eta, a)
        jf = _face_scale(mesh, mesh.bface_measure[faces[0]])
        xq = _face_physical(mesh, faces, pts)
        owners = mesh.bface_owner[faces]
        for patch in np.unique(mesh.bface_patch[faces]):
            cond = boundary[mesh.patches[patch].name]
            fsel = mesh.bface_patch[faces] == patch
            cells_p = owners[fsel]
            if isinstance(cond, Dirichlet):
                blk = jf * (
                    -kappa * np.einsum("q,qa,qb->ab", w, phi, dphi)
                    - kappa * np.einsum("q,qa,qb->ab", w, dphi, phi)
                    + sigma * np.einsum("q,qa,qb->ab", w, phi, phi)
                )
                rows.append(cells_p)
                cols.append(cells_p)
                blocks.append(np.broadcast_to(blk, (cells_p.size, N, N)))
                g = _data(cond.value, xq[fsel])
                contrib = jf * (
                    -kappa * np.einsum("q,fq,qa->fa", w, g, dphi)
                    + sigma * np.einsum("q,fq,qa->fa", w, g, phi)
                )
                np.add.at(rhs, cells_p, contrib)
            elif isinstance(cond, Neumann):
                g = _data(cond.flux, xq[fsel])
                np.add.at(rhs, cells_p, jf * kappa * np.einsum("q,fq,qa->fa", w, g, phi))
            else:
                raise TypeError(f"unsupported SIP boundary condition {cond!r}")

    matrix = assemble_blocks(
        mesh.n_cells, N, np.concatenate(rows), np.concatenate(cols), np.concatenate(blocks)
    )
    return matrix, rhs.ravel()


def upwind_flux(un, c_in, c_out):
    """Upwind flux density ``(u.n) c_upwind``."""
    return un * np.where(un >= 0.0, c_in, c_out)


def upwind_convection(mesh, basis, velocity, boundary=None):
    """Conservative DG form of :math:`u\\cdot\\nabla c` with an upwind flux.

    Volume term :math:`-\\int c\\,u\\cdot\\nabla v`; face term
    :math:`\\int \\hat f v` with :math:`\\hat f = (u\\cdot n)\\,c_{upwind}`.
    Inflow through Dirichlet patches takes the prescribed value; other
    inflow boundaries use the interior trace.
    """
    boundary = BoundarySpec.no_flux(mesh) if boundary is None else BoundarySpec(boundary)
    boundary.validate(mesh)
    n_q = _quad_points(basis)
    N = basis.n_modes
    rows, cols, blocks = [], [], []
    rhs = np.zeros((mesh.n_cells, N))
    inv_h = 2.0 / mesh.spacing

    rule, phi, grad = _volume_tables(basis, n_q)
    jac = mesh.cell_measure[0] / basis.reference_measure
    # vol[d][a, b] = int psi_b d(psi_a)/dxi_d
    vol = np.einsum("q,qb,qad->dab", rule.weights, phi, grad)
    u = velocity.values
    cells = np.arange(mesh.n_cells)
    rows.append(cells)
    cols.append(cells)
    blocks.append(-jac * np.einsum("cd,d,dab->cab", u, inv_h, vol))

    un_conn, bfaces, un_bnd = face_velocities(velocity)
    conn = mesh.connections()
    for a in range(mesh.dimension):
        sel = np.flatnonzero(conn.axis == a)
        if not sel.size:
            continue
        _, w, phi_o, _ = _face_tables(basis, a, 1, n_q)
        _, _, phi_n, _ = _face_tables(basis, a, -1, n_q)
        jf = _face_scale(mesh, conn.measure[sel[0]])
        un = un_conn[sel]
        up = np.maximum(un, 0.0)[:, None, None] * jf
        dn = np.minimum(un, 0.0)[:, None, None] * jf
        ff = {
            ("o", "o"): np.einsum("q,qa,qb->ab", w, phi_o, phi_o),
            ("o", "n"): np.einsum("q,qa,qb->ab", w, phi_o, phi_n),
            ("n", "o"): np.einsum("q,qa,qb->ab", w, phi_n, phi_o),
            ("n", "n"): np.einsum("q,qa,qb->ab", w, phi_n, phi_n),
        }
        own, nbr = conn.owner[sel], conn.neighbor[sel]
        rows += [own, nbr, own, nbr]
        cols += [own, own, nbr, nbr]
        blocks += [up * ff["o", "o"], -up * ff["n", "o"], dn * ff["o", "n"], -dn * ff["n", "n"]]

    un_of = dict(zip(bfaces, un_bnd))
    for a, s, faces in _open_groups(mesh):
        pts, w, phi_f, _ = _face_tables(basis, a, s, n_q)
        jf = _face_scale(mesh, mesh.bface_measure[faces[0]])
        un = np.array([un_of[f] for f in faces])
        owners = mesh.bface_owner[faces]
        ff = np.einsum("q,qa,qb->ab", w, phi_f, phi_f)
        dirichlet = np.array(
            [isinstance(boundary[mesh.patches[p].name], Dirichlet) for p in mesh.bface_patch[faces]]
        )
        implicit = np.where((un < 0.0) & dirichlet, 0.0, un)
        rows.append(owners)
        cols.append(owners)
        blocks.append(jf * implicit[:, None, None] * ff)
        inflow = np.flatnonzero((un < 0.0) & dirichlet)
        if inflow.size:
            xq = _face_physical(mesh, faces[inflow], pts)
            for k, f in enumerate(faces[inflow]):
                g = _data(boundary[mesh.patches[mesh.bface_patch[f]].name].value, xq[k : k + 1])[0]
                rhs[owners[inflow[k]]] -= jf * un[inflow[k]] * np.einsum("q,q,qa->a", w, g, phi_f)

    matrix = assemble_blocks(
        mesh.n_cells, N, np.concatenate(rows), np.concatenate(cols), np.concatenate(blocks)
    )
    return matrix, rhs.ravel()
