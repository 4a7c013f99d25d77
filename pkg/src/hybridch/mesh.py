"""Uniform Cartesian meshes in one and two dimensions.

A mesh stores cells in lexicographic order (x index fastest), the interior
faces between neighboring cells, the boundary faces, and a patch table naming
each domain side.  Patches tagged ``"periodic"`` are paired with the opposite
side; the paired faces stay in the boundary list but are exposed to the
discretizations as extra cell connections through :meth:`Mesh.connections`.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

SIDES = ("xmin", "xmax", "ymin", "ymax")
_SIDE_ALIASES = {
    "left": "xmin",
    "right": "xmax",
    "bottom": "ymin",
    "top": "ymax",
}
PERIODIC = "periodic"
PAIRING_TOL = 1e-10


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class Patch:
    name: str
    tag: str = "wall"


class FaceRef(NamedTuple):
    """One face of a cell as seen from that cell."""

    face: int
    interior: bool
    neighbor: int | None
    patch: int | None


class Connections(NamedTuple):
    """Cell pairs coupled through a face, including periodic pairs.

    The unit normal of connection ``k`` is ``+e_axis[k]`` and points from
    ``owner`` to ``neighbor``.  The owner sees the face at reference
    coordinate +1 and the neighbor at -1 along ``axis``.
    """

    owner: np.ndarray
    neighbor: np.ndarray
    axis: np.ndarray
    measure: np.ndarray
    centroid: np.ndarray


def _canonical_side(side, dimension):
    side = _SIDE_ALIASES.get(side, side)
    if side not in SIDES[: 2 * dimension]:
        raise MeshError(f"unknown boundary side {side!r} for a {dimension}D mesh")
    return side


class Mesh:
    """Immutable axis-aligned uniform Cartesian mesh.

    Attributes
    ----------
    dimension : int
    cells_per_axis : tuple of int
    lower, upper, spacing : ndarray, shape (dimension,)
    cell_centers : ndarray, shape (n_cells, dimension)
    cell_measure : ndarray, shape (n_cells,)
    face_owner, face_neighbor : ndarray of int, interior faces
    face_normal, face_centroid : ndarray, shape (n_faces, dimension)
    face_measure : ndarray, shape (n_faces,)
    face_axis : ndarray of int
    bface_owner, bface_patch, bface_axis, bface_side : ndarray of int
        ``bface_side`` is -1 on the lower and +1 on the upper side.
    bface_normal, bface_centroid, bface_measure : ndarray
    periodic_partner : ndarray of int
        Index of the paired boundary face, or -1.
    patches : tuple of Patch
    """

    def __init__(self, dimension, cells_per_axis, lower, upper, patches, side_patch):
        self.dimension = dimension
        self.cells_per_axis = tuple(int(n) for n in cells_per_axis)
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        self.spacing = (self.upper - self.lower) / np.asarray(self.cells_per_axis)
        self.patches = tuple(patches)
        self._side_patch = dict(side_patch)
        self._build()
        for arr in vars(self).values():
            if isinstance(arr, np.ndarray):
                arr.setflags(write=False)

    # -- construction -----------------------------------------------------

    def _build(self):
        d = self.dimension
        shape = self.cells_per_axis
        n_cells = int(np.prod(shape))
        # x index fastest
        multi = np.array(np.unravel_index(np.arange(n_cells), shape, order="F")).T
        self.cell_index = multi
        self.cell_centers = self.lower + (multi + 0.5) * self.spacing
        volume = float(np.prod(self.spacing))
        self.cell_measure = np.full(n_cells, volume)

        owners, neighbors, axes = [], [], []
        b_owner, b_axis, b_side, b_patch = [], [], [], []
        strides = [int(np.prod(shape[:a])) for a in range(d)]
        for a in range(d):
            idx = multi[:, a]
            inner = np.flatnonzero(idx < shape[a] - 1)
            owners.append(inner)
            neighbors.append(inner + strides[a])
            axes.append(np.full(inner.size, a))
            for side, at in ((-1, 0), (1, shape[a] - 1)):
                cells = np.flatnonzero(idx == at)
                name = SIDES[2 * a + (side > 0)]
                b_owner.append(cells)
                b_axis.append(np.full(cells.size, a))
                b_side.append(np.full(cells.size, side))
                b_patch.append(np.full(cells.size, self._side_patch[name]))

        self.face_owner = np.concatenate(owners).astype(int)
        self.face_neighbor = np.concatenate(neighbors).astype(int)
        self.face_axis = np.concatenate(axes).astype(int)
        eye = np.eye(d)
        self.face_normal = eye[self.face_axis]
        self.face_centroid = (
            self.cell_centers[self.face_owner] + 0.5 * self.face_normal * self.spacing
        )
        self.face_measure = volume / self.spacing[self.face_axis]

        self.bface_owner = np.concatenate(b_owner).astype(int)
        self.bface_axis = np.concatenate(b_axis).astype(int)
        self.bface_side = np.concatenate(b_side).astype(int)
        self.bface_patch = np.concatenate(b_patch).astype(int)
        self.bface_normal = eye[self.bface_axis] * self.bface_side[:, None]
        self.bface_centroid = (
            self.cell_centers[self.bface_owner] + 0.5 * self.bface_normal * self.spacing
        )
        self.bface_measure = volume / self.spacing[self.bface_axis]
        self.periodic_partner = self._pair_periodic()

    def _pair_periodic(self):
        partner = np.full(self.bface_owner.size, -1)
        tags = np.array([self.patches[p].tag for p in self.bface_patch])
        length = self.upper - self.lower
        for a in range(self.dimension):
            lo = np.flatnonzero((self.bface_axis == a) & (self.bface_side < 0))
            hi = np.flatnonzero((self.bface_axis == a) & (self.bface_side > 0))
            lo_periodic = tags[lo] == PERIODIC
            hi_periodic = tags[hi] == PERIODIC
            if lo_periodic.any() != hi_periodic.any() or (
                lo_periodic.any() and not (lo_periodic.all() and hi_periodic.all())
            ):
                raise MeshError(f"periodic patch on axis {a} has no periodic partner side")
            if not lo_periodic.any():
                continue
            shifted = self.bface_centroid[hi].copy()
            shifted[:, a] -= length[a]
            dist = np.abs(shifted[:, None, :] - self.bface_centroid[lo][None, :, :]).max(axis=2)
            match = dist.argmin(axis=1)
            if not np.all(dist[np.arange(hi.size), match] < PAIRING_TOL * max(1.0, length[a])):
                raise MeshError(f"periodic faces on axis {a} do not match")
            partner[hi] = lo[match]
            partner[lo[match]] = hi
        return partner

    # -- queries ----------------------------------------------------------

    @property
    def n_cells(self):
        return self.cell_measure.size

    @property
    def n_faces(self):
        return self.face_owner.size

    @property
    def n_bfaces(self):
        return self.bface_owner.size

    @property
    def domain_measure(self):
        return float(np.prod(self.upper - self.lower))

    def patch_id(self, name):
        for i, patch in enumerate(self.patches):
            if patch.name == name:
                return i
        raise MeshError(f"unknown patch {name!r}")

    def patch_faces(self, patch):
        """Boundary face indices belonging to a patch (id or name)."""
        if isinstance(patch, str):
            patch = self.patch_id(patch)
        return np.flatnonzero(self.bface_patch == patch)

    def side_patch(self, side):
        return self._side_patch[_canonical_side(side, self.dimension)]

    def is_periodic_face(self, bface):
        return self.periodic_partner[bface] >= 0

    def connections(self):
        """Interior faces plus one entry per periodic face pair."""
        upper = np.flatnonzero((self.periodic_partner >= 0) & (self.bface_side > 0))
        lower = self.periodic_partner[upper]
        return Connections(
            owner=np.concatenate([self.face_owner, self.bface_owner[upper]]),
            neighbor=np.concatenate([self.face_neighbor, self.bface_owner[lower]]),
            axis=np.concatenate([self.face_axis, self.bface_axis[upper]]),
            measure=np.concatenate([self.face_measure, self.bface_measure[upper]]),
            centroid=np.concatenate([self.face_centroid, self.bface_centroid[upper]]),
        )

    def open_boundary_faces(self):
        """Boundary faces that are not periodically paired."""
        return np.flatnonzero(self.periodic_partner < 0)

    def locate(self, points):
        """Cell index and reference coordinates in [-1, 1]^d of physical points."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.dimension == 1 and points.shape[0] == 1 and points.shape[1] != 1:
            points = points.T
        rel = (points - self.lower) / self.spacing
        idx = np.clip(np.floor(rel).astype(int), 0, np.asarray(self.cells_per_axis) - 1)
        ref = 2.0 * (rel - idx) - 1.0
        strides = np.array([int(np.prod(self.cells_per_axis[:a])) for a in range(self.dimension)])
        return idx @ strides, ref

    def __repr__(self):
        return (
            f"Mesh(dimension={self.dimension}, cells_per_axis={self.cells_per_axis}, "
            f"lower={self.lower.tolist()}, upper={self.upper.tolist()})"
        )


def build_cartesian_mesh(dimension, cells_per_axis, bounds, patch_spec):
    """Build a uniform Cartesian mesh.

    Parameters
    ----------
    dimension : {1, 2}
    cells_per_axis : sequence of int
    bounds : sequence of (lower, upper) pairs, one per axis
    patch_spec : dict
        Maps each domain side (``xmin``/``left``, ``xmax``/``right``,
        ``ymin``/``bottom``, ``ymax``/``top``) to a patch name or a
        ``(name, tag)`` pair.  Sides sharing a name share one patch.  The tag
        defaults to ``"wall"``; ``"periodic"`` pairs opposite sides.

    Examples
    --------
    >>> m = build_cartesian_mesh(1, [4], [(-1, 1)], {"left": "left", "right": "right"})
    >>> m.n_cells, m.n_faces, m.n_bfaces
    (4, 3, 2)
    """
    if dimension not in (1, 2):
        raise MeshError("dimension must be 1 or 2")
    cells_per_axis = list(np.atleast_1d(cells_per_axis))
    if len(cells_per_axis) != dimension:
        raise MeshError("need one cell count per axis")
    if any(int(n) != n or n < 1 for n in cells_per_axis):
        raise MeshError(f"cell counts must be positive integers, got {cells_per_axis}")
    bounds = np.asarray(bounds, dtype=float).reshape(dimension, 2)
    if not np.all(bounds[:, 1] > bounds[:, 0]):
        raise MeshError(f"bounds must satisfy lower < upper, got {bounds.tolist()}")

    side_entries = {}
    for side, entry in patch_spec.items():
        side = _canonical_side(side, dimension)
        if side in side_entries:
            raise MeshError(f"side {side!r} assigned twice")
        name, tag = (entry, "wall") if isinstance(entry, str) else tuple(entry)
        side_entries[side] = (name, tag)
    missing = [s for s in SIDES[: 2 * dimension] if s not in side_entries]
    if missing:
        raise MeshError(f"boundary sides without a patch: {missing}")

    patches, side_patch = [], {}
    for side in SIDES[: 2 * dimension]:
        name, tag = side_entries[side]
        existing = [i for i, p in enumerate(patches) if p.name == name]
        if existing:
            if patches[existing[0]].tag != tag:
                raise MeshError(f"patch {name!r} given conflicting tags")
            side_patch[side] = existing[0]
        else:
            side_patch[side] = len(patches)
            patches.append(Patch(name, tag))

    return Mesh(dimension, cells_per_axis, bounds[:, 0], bounds[:, 1], patches, side_patch)


def cell_neighbors(mesh, cell_index):
    """Faces of one cell, ordered xmin, xmax, ymin, ymax.

    Interior entries carry the neighbor cell, boundary entries the patch id.
    Periodic boundary faces are reported as boundary faces of their patch.
    Interior face indices are ``0..n_faces-1``; boundary face ``b`` is
    reported as ``n_faces + b``.
    """
    if not 0 <= cell_index < mesh.n_cells:
        raise IndexError(f"cell index {cell_index} out of range")
    out = []
    for a in range(mesh.dimension):
        for side in (-1, 1):
            if side < 0:
                hit = np.flatnonzero((mesh.face_neighbor == cell_index) & (mesh.face_axis == a))
            else:
                hit = np.flatnonzero((mesh.face_owner == cell_index) & (mesh.face_axis == a))
            if hit.size:
                f = int(hit[0])
                other = mesh.face_owner[f] if side < 0 else mesh.face_neighbor[f]
                out.append(FaceRef(f, True, int(other), None))
                continue
            b = np.flatnonzero(
                (mesh.bface_owner == cell_index) & (mesh.bface_axis == a) & (mesh.bface_side == side)
            )
            b = int(b[0])
            out.append(FaceRef(mesh.n_faces + b, False, None, int(mesh.bface_patch[b])))
    return out
