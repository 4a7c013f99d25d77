"""Legacy-VTK, CSV profile and keyed-text report files."""

import csv
import os

import numpy as np

from ..field import DgField, FvField, FvVectorField


def _fmt(x):
    return repr(float(x))


def write_vtk(fields, mesh, path, title="hybridch output"):
    """ASCII legacy VTK (version 2.0) ``STRUCTURED_POINTS`` file with cell data.

    ``fields`` maps names to FV scalar/vector fields, DG fields (written as
    cell means) or raw per-cell arrays.  Values keep full double precision.
    """
    n = np.ones(3, dtype=int)
    n[: mesh.dimension] = mesh.cells_per_axis
    origin = np.zeros(3)
    origin[: mesh.dimension] = mesh.lower
    spacing = np.ones(3)
    spacing[: mesh.dimension] = mesh.spacing
    dims = [k + 1 if i < mesh.dimension else 1 for i, k in enumerate(n)]
    lines = [
        "# vtk DataFile Version 2.0",
        title[:255],
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        "DIMENSIONS {} {} {}".format(*dims),
        "ORIGIN {} {} {}".format(*map(_fmt, origin)),
        "SPACING {} {} {}".format(*map(_fmt, spacing)),
        f"CELL_DATA {mesh.n_cells}",
    ]
    for name, f in fields.items():
        if isinstance(f, FvVectorField):
            vec = np.zeros((mesh.n_cells, 3))
            vec[:, : mesh.dimension] = f.values
            lines.append(f"VECTORS {name} double")
            lines += [" ".join(map(_fmt, row)) for row in vec]
            continue
        if isinstance(f, DgField):
            vals = f.cell_means()
        elif isinstance(f, FvField):
            vals = f.values
        else:
            vals = np.asarray(f, dtype=float)
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines += [_fmt(v) for v in vals]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_vtk(path):
    """Read back a file written by :func:`write_vtk`.

    Returns ``(header, data)`` where ``header`` has ``dimensions``, ``origin``,
    ``spacing`` and ``n_cells`` and ``data`` maps names to arrays.
    """
    with open(path, encoding="ascii") as fh:
        tokens = fh.read().splitlines()
    if not tokens[0].startswith("# vtk DataFile Version"):
        raise ValueError(f"{path} is not a legacy VTK file")
    header, data = {}, {}
    i = 4
    while i < len(tokens):
        parts = tokens[i].split()
        i += 1
        if not parts:
            continue
        key = parts[0]
        if key == "DIMENSIONS":
            header["dimensions"] = tuple(int(p) for p in parts[1:4])
        elif key in ("ORIGIN", "SPACING"):
            header[key.lower()] = tuple(float(p) for p in parts[1:4])
        elif key == "CELL_DATA":
            header["n_cells"] = int(parts[1])
        elif key == "SCALARS":
            if tokens[i].split()[0] == "LOOKUP_TABLE":
                i += 1
            n = header["n_cells"]
            data[parts[1]] = np.array([float(t) for t in tokens[i : i + n]])
            i += n
        elif key == "VECTORS":
            n = header["n_cells"]
            data[parts[1]] = np.array([[float(t) for t in row.split()] for row in tokens[i : i + n]])
            i += n
        else:
            raise ValueError(f"unexpected VTK section {key!r}")
    return header, data


def sample_profile(field, n_samples):
    """Equispaced sample points over a 1D domain and the field values there."""
    mesh = field.mesh
    if mesh.dimension != 1:
        raise ValueError("profiles are sampled on 1D fields only")
    x = np.linspace(mesh.lower[0], mesh.upper[0], n_samples)
    return x, field.evaluate(x[:, None])


def write_csv_profile(field, n_samples, path, exact=None):
    """CSV with columns ``x, c_numeric, c_analytic`` (the last empty without ``exact``)."""
    x, vals = sample_profile(field, n_samples)
    ref = exact(x) if exact is not None else None
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "c_numeric", "c_analytic"])
        for k in range(n_samples):
            writer.writerow([_fmt(x[k]), _fmt(vals[k]), _fmt(ref[k]) if ref is not None else ""])
    return path


def read_csv_profile(path):
    with open(path, newline="", encoding="ascii") as fh:
        rows = list(csv.DictReader(fh))
    out = {}
    for key in ("x", "c_numeric", "c_analytic"):
        out[key] = np.array([float(r[key]) if r[key] else np.nan for r in rows])
    return out


def write_table(path, header, rows):
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) if isinstance(v, float) else v for v in row])
    return path


def write_report(report, path):
    """One ``key = value`` line per entry; lists are comma separated."""
    lines = []
    for key, value in report.items():
        if isinstance(value, (list, tuple)):
            value = ", ".join(_fmt(v) if isinstance(v, float) else str(v) for v in value)
        elif isinstance(value, float):
            value = _fmt(value)
        lines.append(f"{key} = {value}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_report(path):
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if "=" in line:
                key, value = (s.strip() for s in line.split("=", 1))
                out[key] = value
    return out


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
