"""Case runners behind the command line.

Every runner takes a validated :class:`CaseConfig`, writes its files into the
configured output directory and returns a report dictionary.  Solver
failures surface as :class:`CaseError` carrying the stage that failed.
"""

import logging
import os
import time

import numpy as np

from ..basis import BasisSet, gauss_rule
from ..cahn_hilliard import ChOperators, ChParams, ch_step, initial_state
from ..coupling import CoupledSolver
from ..dg_operators import BoundarySpec, Dirichlet, Neumann, Periodic
from ..field import DgField, FixedValue, FvVectorField, ZeroGradient, l2_error, l2_norm, project_function
from ..fvm_ns import NsParams, NsState, couette_profile, ns_step
from ..mesh import build_cartesian_mesh
from . import io
from .config import parse_condition, patch_names

log = logging.getLogger("hybridch")

SIDES = (("left", "right"), ("bottom", "top"))


class CaseError(RuntimeError):
    """A solver stage of a case failed."""

    def __init__(self, stage, cause):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


class SteadyStateError(RuntimeError):
    pass


# ---------------------------------------------------------------- setup


def build_mesh(cfg):
    v = cfg.values
    spec = {}
    for axis, (lo, hi) in zip("xy"[: cfg.dimension], SIDES):
        if axis in v["mesh.periodic"]:
            spec[lo] = spec[hi] = (f"periodic_{axis}", "periodic")
        else:
            spec[lo], spec[hi] = lo, hi
    bounds = list(zip(v["mesh.lower"], v["mesh.upper"]))
    return build_cartesian_mesh(cfg.dimension, v["mesh.cells"], bounds, spec)


def ch_params(cfg):
    v = cfg.values
    return ChParams(
        mobility=v["ch.mobility"],
        gamma=v["ch.gamma"],
        dt=v["time.dt"],
        max_iterations=v["ch.max_iterations"],
        tolerance=v["ch.tolerance"],
        splitting=v["ch.splitting"],
        penalty=v["dg.penalty"],
        linear_solver=v["ch.linear_solver"],
        solver_tolerance=v["ch.solver_tolerance"],
    )


def ns_params(cfg):
    v = cfg.values
    return NsParams(
        viscosity=v["ns.viscosity"],
        dt=v["time.dt"],
        pressure_tolerance=v["ns.pressure_tolerance"],
        max_pressure_iterations=v["ns.max_pressure_iterations"],
    )


def ch_boundaries(cfg, mesh):
    """DG conditions for ``c`` and ``mu``; open patches default to no flux."""
    out = {}
    for fld in ("c", "mu"):
        spec = BoundarySpec()
        for p in mesh.patches:
            if p.tag == "periodic":
                spec[p.name] = Periodic()
                continue
            kind, g = parse_condition(fld, cfg.boundary.get((fld, p.name), "neumann:0"))
            spec[p.name] = Dirichlet(g) if kind == "dirichlet" else Neumann(g)
        out[fld] = spec
    return out


def velocity_boundary(cfg, mesh):
    out = {}
    for p in mesh.patches:
        if p.tag == "periodic":
            continue
        kind, vals = parse_condition("U", cfg.boundary.get(("U", p.name), "wall:0,0"))
        if kind == "wall":
            vec = np.zeros(mesh.dimension)
            vec[: len(vals)] = vals[: mesh.dimension]
            out[p.name] = FixedValue(vec)
        else:
            out[p.name] = ZeroGradient()
    return out


def interface_width(cfg):
    return np.sqrt(2.0 * cfg["ch.gamma"])


def midpoint(cfg):
    return 0.5 * (np.asarray(cfg["mesh.lower"]) + np.asarray(cfg["mesh.upper"]))


def exact_profile(cfg):
    """Equilibrium ``tanh`` interface through the middle of the first axis."""
    x0, w = midpoint(cfg)[0], interface_width(cfg)
    return lambda x, *rest: np.tanh((x - x0) / w)


def initial_c(cfg, mesh, basis):
    v = cfg.values
    kind = v["init.c"]
    x0 = midpoint(cfg)[0]
    if kind == "sgn":
        return project_function(mesh, basis, lambda x, *r: np.sign(x - x0), n_points=2 * basis.degree + 2)
    if kind == "tanh":
        return project_function(mesh, basis, exact_profile(cfg))
    if kind == "droplet":
        if mesh.dimension != 2:
            raise ValueError("a droplet needs a 2D mesh")
        cx, cy = v["init.center"]
        r0, w = v["init.radius"], interface_width(cfg)
        return project_function(
            mesh, basis, lambda x, y: np.tanh((r0 - np.hypot(x - cx, y - cy)) / w), n_points=2 * basis.degree + 2
        )
    coeffs = np.zeros((mesh.n_cells, basis.n_modes))
    if kind == "random":
        rng = np.random.default_rng(v["init.seed"])
        coeffs[:, 0] = rng.uniform(-1.0, 1.0, mesh.n_cells) / basis.constant_value
    else:
        coeffs[:, 0] = v["init.value"] / basis.constant_value
    return DgField(mesh, basis, coeffs, "c")


def initial_velocity(cfg, mesh, boundary):
    U = FvVectorField(mesh, boundary=boundary)
    if cfg["init.U"] == "couette":
        if mesh.dimension != 2:
            raise ValueError("a Couette velocity needs a 2D mesh")
        speeds = []
        for side in SIDES[1]:
            bc = boundary.get(side)
            speeds.append(float(bc.value[0]) if isinstance(bc, FixedValue) else 0.0)
        U.values = couette_profile(mesh, *speeds)
    return U


# ---------------------------------------------------------------- diagnostics


def mass(c):
    """``int c`` and the scale used for relative drift, from cell means."""
    means = c.cell_means()
    vol = c.mesh.cell_measure
    return float(np.sum(means * vol)), float(np.sum(np.abs(means) * vol))


def relative_drift(m0, m1, scale0):
    return abs(m1 - m0) / max(abs(m0), scale0, np.finfo(float).tiny)


def sampled_range(c, n=5):
    """Min and max of ``c`` on an ``n``-point-per-axis subgrid of every cell."""
    g = np.linspace(-1.0, 1.0, n)
    ref = np.stack(np.meshgrid(*([g] * c.basis.dimension), indexing="xy"), -1).reshape(-1, c.basis.dimension)
    vals = c.coeffs @ c.basis.values(ref).T
    return float(vals.min()), float(vals.max())


def second_moment(c, axis=0):
    """Spread of the ``c > 0`` phase along ``axis``, weighted by ``(1 + c)/2``."""
    mesh, basis = c.mesh, c.basis
    rule = gauss_rule(2 * basis.degree + 2, basis.dimension)
    w = 0.5 * (1.0 + c.quadrature_values(rule)) * rule.weights
    x = mesh.cell_centers[:, axis, None] + 0.5 * mesh.spacing[axis] * rule.points[None, :, axis]
    total = np.sum(w)
    xc = np.sum(w * x) / total
    return float(np.sum(w * (x - xc) ** 2) / total)


def max_deviation(c, exact, n_samples):
    x, vals = io.sample_profile(c, n_samples)
    return float(np.max(np.abs(vals - exact(x))))


def fit_slope(h, err):
    """Least-squares slope of ``log err`` against ``log h``."""
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])


# ---------------------------------------------------------------- runners


def _output_dir(cfg):
    return io.ensure_dir(cfg["output.dir"])


def run_ch_steady(cfg, basis=None, budget=None):
    """March Cahn-Hilliard at zero velocity until steady.

    Returns ``(state, steps, steady, c0)``.  The run is steady once the L2
    change of ``c`` over one step drops below ``time.steady_tolerance``.
    """
    mesh = build_mesh(cfg)
    basis = basis or BasisSet(cfg.dimension, cfg["dg.degree"])
    params = ch_params(cfg)
    ops = ChOperators(mesh, basis, params, ch_boundaries(cfg, mesh))
    c0 = initial_c(cfg, mesh, basis)
    state = initial_state(c0, params, operators=ops)
    budget = budget or (cfg["time.steps"] or cfg["time.max_steps"])
    tol = cfg["time.steady_tolerance"]
    for step in range(1, budget + 1):
        try:
            new = ch_step(state, None, params, operators=ops)
        except Exception as exc:
            raise CaseError(f"Cahn-Hilliard step {step}", exc) from exc
        change = l2_norm(DgField(mesh, basis, new.c.coeffs - state.c.coeffs))
        state = new
        if change < tol:
            return state, step, True, c0
    return state, budget, False, c0


def run_ch1d_profile(cfg):
    out = _output_dir(cfg)
    state, steps, steady, c0 = run_ch_steady(cfg)
    exact = exact_profile(cfg)
    m0, scale = mass(c0)
    m1, _ = mass(state.c)
    n = cfg.values["mesh.cells"][0]
    files = [io.write_csv_profile(state.c, cfg["output.csv_samples"], os.path.join(out, f"profile_{n}.csv"), exact)]
    if cfg["output.vtk"]:
        files.append(io.write_vtk({"c": c0}, state.c.mesh, os.path.join(out, "c_0000.vtk")))
        files.append(io.write_vtk({"c": state.c, "mu": state.mu}, state.c.mesh, os.path.join(out, "c_final.vtk")))
    return {
        "case": cfg.kind,
        "cells": n,
        "degree": cfg["dg.degree"],
        "steps": steps,
        "steady": steady,
        "time": state.t,
        "l2_error": l2_error(state.c, exact),
        "max_deviation": max_deviation(state.c, exact, cfg["output.csv_samples"]),
        "mass_initial": m0,
        "mass_final": m1,
        "mass_drift": relative_drift(m0, m1, scale),
        "outputs": files,
    }


def convergence_study(cfg):
    """Steady 1D profiles on every ``study.resolutions`` mesh and the fitted L2 slope."""
    out = _output_dir(cfg)
    rows, files = [], []
    exact = exact_profile(cfg)
    length = cfg["mesh.upper"][0] - cfg["mesh.lower"][0]
    for n in cfg["study.resolutions"]:
        sub = cfg.with_overrides({"mesh.cells": str(n), "output.dir": out})
        state, steps, steady, _ = run_ch_steady(sub)
        if not steady:
            raise SteadyStateError(f"{n} cells: no steady state within {steps} steps")
        err = l2_error(state.c, exact)
        log.info("%4d cells: %d steps, L2 error %.6e", n, steps, err)
        rows.append((n, length / n, err, steps))
        files.append(io.write_csv_profile(state.c, cfg["output.csv_samples"], os.path.join(out, f"profile_{n}.csv"), exact))
    h = np.array([r[1] for r in rows])
    err = np.array([r[2] for r in rows])
    slope = fit_slope(h, err)
    files.append(io.write_table(os.path.join(out, "convergence.csv"), ["cells", "h", "l2_error", "steps"], rows))
    return {
        "case": cfg.kind,
        "degree": cfg["dg.degree"],
        "resolutions": [r[0] for r in rows],
        "l2_errors": [float(e) for e in err],
        "slope": slope,
        "outputs": files,
    }


def projection_study(f, degree, resolutions, bounds=(-1.0, 1.0)):
    """L2 projection errors of ``f`` on uniform 1D meshes and their slope."""
    basis = BasisSet(1, degree)
    h, err = [], []
    for n in resolutions:
        mesh = build_cartesian_mesh(1, [n], [bounds], {"left": "left", "right": "right"})
        err.append(l2_error(project_function(mesh, basis, f), f))
        h.append((bounds[1] - bounds[0]) / n)
    return np.array(h), np.array(err), fit_slope(h, err)


def run_droplet(cfg):
    out = _output_dir(cfg)
    mesh = build_mesh(cfg)
    basis = BasisSet(2, cfg["dg.degree"])
    chp, nsp = ch_params(cfg), ns_params(cfg)
    ubc = velocity_boundary(cfg, mesh)
    solver = CoupledSolver(basis, chp, nsp, ch_boundaries(cfg, mesh), cfg["coupling.persistent_dg_state"])
    c0 = initial_c(cfg, mesh, basis)
    state = solver.initialize(c0, NsState(initial_velocity(cfg, mesh, ubc)))
    m0, scale = mass(state.ch.c)
    moments = [second_moment(state.ch.c)]
    masses = [m0]
    lo, hi = sampled_range(state.ch.c)
    max_div = 0.0
    every = cfg["output.every"]
    files = []
    if cfg["output.vtk"]:
        files.append(_write_coupled(out, state))
    steps = cfg["time.steps"]
    for k in range(1, steps + 1):
        try:
            state = solver.step(state)
        except Exception as exc:
            raise CaseError(f"coupled step {k}", exc) from exc
        moments.append(second_moment(state.ch.c))
        masses.append(mass(state.ch.c)[0])
        a, b = sampled_range(state.ch.c)
        lo, hi = min(lo, a), max(hi, b)
        max_div = max(max_div, state.ns.divergence_norm)
        if cfg["output.vtk"] and ((every and k % every == 0) or k == steps):
            files.append(_write_coupled(out, state))
        if k % 10 == 0:
            log.info("step %d: second moment %.8f, c in [%.4f, %.4f]", k, moments[-1], a, b)
    m1, _ = mass(state.ch.c)
    moments = np.array(moments)
    files.append(io.write_table(os.path.join(out, "history.csv"), ["step", "second_moment", "mass"],
                                [(k, float(a), float(b)) for k, (a, b) in enumerate(zip(moments, masses))]))
    return {
        "case": cfg.kind,
        "steps": steps,
        "time": state.time,
        "c_min": lo,
        "c_max": hi,
        "mass_initial": m0,
        "mass_final": m1,
        "mass_drift": relative_drift(m0, m1, scale),
        "max_mass_drift": max(relative_drift(m0, m, scale) for m in masses),
        "second_moment_initial": float(moments[0]),
        "second_moment_final": float(moments[-1]),
        "second_moment_monotone": bool(np.all(np.diff(moments) > 0)),
        "max_divergence": max_div,
        "outputs": files,
    }


def _write_coupled(out, state):
    path = os.path.join(out, f"state_{state.step:04d}.vtk")
    return io.write_vtk({"c": state.ch.c, "mu": state.ch.mu, "P": state.ns.P, "U": state.ns.U}, state.mesh, path)


def run_couette(cfg):
    out = _output_dir(cfg)
    mesh = build_mesh(cfg)
    params = ns_params(cfg)
    ubc = velocity_boundary(cfg, mesh)
    state = NsState(initial_velocity(cfg, mesh, ubc))
    speeds = [float(ubc[s].value[0]) if isinstance(ubc.get(s), FixedValue) else 0.0 for s in SIDES[1]]
    profile = couette_profile(mesh, *speeds)
    budget = cfg["time.steps"] or cfg["time.max_steps"]
    tol = cfg["time.steady_tolerance"]
    max_div, steady, step = 0.0, False, 0
    for step in range(1, budget + 1):
        try:
            new = ns_step(state, params)
        except Exception as exc:
            raise CaseError(f"Navier-Stokes step {step}", exc) from exc
        max_div = max(max_div, new.divergence_norm)
        change = float(np.abs(new.U.values - state.U.values).max())
        state = new
        if change < tol:
            steady = True
            break
    files = []
    if cfg["output.vtk"]:
        files.append(io.write_vtk({"U": state.U, "P": state.P}, mesh, os.path.join(out, "U_final.vtk")))
    return {
        "case": cfg.kind,
        "steps": step,
        "steady": steady,
        "time": state.t,
        "max_deviation": float(np.abs(state.U.values - profile).max()),
        "max_divergence": max_div,
        "pressure_tolerance": params.pressure_tolerance,
        "outputs": files,
    }


def run_custom(cfg):
    """Coupled run in 2D, Cahn-Hilliard alone in 1D, for ``time.steps`` steps."""
    if cfg.dimension == 2:
        return run_droplet(cfg)
    out = _output_dir(cfg)
    mesh = build_mesh(cfg)
    basis = BasisSet(1, cfg["dg.degree"])
    params = ch_params(cfg)
    ops = ChOperators(mesh, basis, params, ch_boundaries(cfg, mesh))
    c0 = initial_c(cfg, mesh, basis)
    state = initial_state(c0, params, operators=ops)
    m0, scale = mass(c0)
    files = []
    if cfg["output.vtk"]:
        files.append(io.write_vtk({"c": c0}, mesh, os.path.join(out, "c_0000.vtk")))
    for k in range(1, cfg["time.steps"] + 1):
        try:
            state = ch_step(state, None, params, operators=ops)
        except Exception as exc:
            raise CaseError(f"Cahn-Hilliard step {k}", exc) from exc
        if cfg["output.vtk"] and ((cfg["output.every"] and k % cfg["output.every"] == 0) or k == cfg["time.steps"]):
            files.append(io.write_vtk({"c": state.c}, mesh, os.path.join(out, f"c_{k:04d}.vtk")))
    files.append(io.write_csv_profile(state.c, cfg["output.csv_samples"], os.path.join(out, "profile.csv")))
    m1, _ = mass(state.c)
    lo, hi = sampled_range(state.c)
    return {
        "case": cfg.kind,
        "steps": cfg["time.steps"],
        "time": state.t,
        "c_min": lo,
        "c_max": hi,
        "mass_initial": m0,
        "mass_final": m1,
        "mass_drift": relative_drift(m0, m1, scale),
        "outputs": files,
    }


RUNNERS = {
    "ch1d_profile": run_ch1d_profile,
    "ch_convergence": convergence_study,
    "droplet_shear": run_droplet,
    "couette": run_couette,
    "custom": run_custom,
}


def run_case(cfg):
    """Run the case, write ``config.txt`` and ``report.txt``, return the report."""
    patch_names(cfg)
    start = time.perf_counter()
    report = RUNNERS[cfg.kind](cfg)
    report["wall_time"] = time.perf_counter() - start
    out = _output_dir(cfg)
    with open(os.path.join(out, "config.txt"), "w", encoding="utf-8") as fh:
        fh.write(cfg.to_text())
    report["outputs"] = list(report.get("outputs", ())) + [os.path.join(out, "report.txt")]
    io.write_report(report, os.path.join(out, "report.txt"))
    return report
