"""Flat ``key = value`` case files.

Sections are dotted key prefixes.  Every key must be known to the schema or
match one of the per-patch boundary patterns (``bc.c.<patch>``,
``bc.mu.<patch>``, ``bc.U.<patch>``); anything else is rejected.

Example::

    case = ch1d_profile
    mesh.cells = 20
    ch.gamma = 0.0125
    bc.c.left = neumann:0
"""

import re
from dataclasses import dataclass, field

CASE_KINDS = ("ch1d_profile", "ch_convergence", "droplet_shear", "couette", "custom")


class ConfigError(ValueError):
    pass


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text):
    return tuple(float(t) for t in re.split(r"[,\s]+", text.strip()) if t)


def _ints(text):
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise ValueError(f"expected integers: {text!r}")
    return tuple(int(v) for v in vals)


def _axes(text):
    axes = tuple(t for t in re.split(r"[,\s]+", text.strip().lower()) if t and t != "none")
    if not set(axes) <= {"x", "y"}:
        raise ValueError(f"periodic axes must be x and/or y: {text!r}")
    return axes


# key -> (parser, default); None defaults are filled per case kind
SCHEMA = {
    "case": (str, None),
    "mesh.cells": (_ints, None),
    "mesh.lower": (_floats, None),
    "mesh.upper": (_floats, None),
    "mesh.periodic": (_axes, ()),
    "dg.degree": (int, 2),
    "dg.penalty": (float, 4.0),
    "ch.mobility": (float, 1.0),
    "ch.gamma": (float, 0.0125),
    "ch.splitting": (str, "eyre_convex_split"),
    "ch.max_iterations": (int, 25),
    "ch.tolerance": (float, 1e-10),
    "ch.linear_solver": (str, "sparse_direct"),
    "ch.solver_tolerance": (float, 1e-12),
    "ns.viscosity": (float, 0.01),
    "ns.pressure_tolerance": (float, 1e-10),
    "ns.max_pressure_iterations": (int, 20_000),
    "time.dt": (float, 1e-3),
    "time.steps": (int, 0),
    "time.steady_tolerance": (float, 1e-9),
    "time.max_steps": (int, 20_000),
    "init.c": (str, "sgn"),
    "init.value": (float, 0.0),
    "init.seed": (int, 0),
    "init.center": (_floats, (1.0, 0.5)),
    "init.radius": (float, 0.25),
    "init.U": (str, "zero"),
    "coupling.persistent_dg_state": (_bool, True),
    "output.dir": (str, "output"),
    "output.every": (int, 0),
    "output.csv_samples": (int, 200),
    "output.vtk": (_bool, True),
    "study.resolutions": (_ints, (20, 40, 80)),
}

BC_PATTERN = re.compile(r"^bc\.(c|mu|U)\.([A-Za-z_][\w-]*)$")

CASE_DEFAULTS = {
    "ch1d_profile": {
        "mesh.cells": (20,),
        "mesh.lower": (-1.0,),
        "mesh.upper": (1.0,),
        "init.c": "sgn",
    },
    "ch_convergence": {
        "mesh.cells": (20,),
        "mesh.lower": (-1.0,),
        "mesh.upper": (1.0,),
        "init.c": "sgn",
    },
    "droplet_shear": {
        "mesh.cells": (64, 32),
        "mesh.lower": (0.0, 0.0),
        "mesh.upper": (2.0, 1.0),
        "mesh.periodic": ("x",),
        "ch.gamma": 0.002,
        "ch.mobility": 1e-3,
        "ch.linear_solver": "bicgstab",
        "ch.solver_tolerance": 1e-12,
        "init.c": "droplet",
        "init.U": "couette",
        "time.steps": 200,
        "output.every": 50,
        "bc.U.bottom": "wall:-1,0",
        "bc.U.top": "wall:1,0",
    },
    "couette": {
        "mesh.cells": (8, 16),
        "mesh.lower": (0.0, 0.0),
        "mesh.upper": (1.0, 1.0),
        "mesh.periodic": ("x",),
        "ns.viscosity": 1.0,
        "time.dt": 5e-4,
        "time.steady_tolerance": 1e-9,
        "bc.U.bottom": "wall:0,0",
        "bc.U.top": "wall:1,0",
    },
    "custom": {},
}


@dataclass
class CaseConfig:
    values: dict
    boundary: dict = field(default_factory=dict)
    source: str = "<memory>"

    def __getitem__(self, key):
        return self.values[key]

    @property
    def kind(self):
        return self.values["case"]

    @property
    def dimension(self):
        return len(self.values["mesh.cells"])

    def with_overrides(self, overrides):
        raw = {k: _render(v) for k, v in self.values.items()}
        raw.update({f"bc.{f}.{p}": s for (f, p), s in self.boundary.items()})
        raw.update(overrides)
        return build_config(raw, self.source)

    def to_text(self):
        lines = [f"{k} = {_render(v)}" for k, v in sorted(self.values.items())]
        lines += [f"bc.{f}.{p} = {s}" for (f, p), s in sorted(self.boundary.items())]
        return "\n".join(lines) + "\n"


def _render(value):
    if isinstance(value, tuple):
        return ", ".join(repr(v) if isinstance(v, float) else str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_text(text, source="<string>"):
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in raw:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


def build_config(raw, source="<memory>"):
    """Validate a mapping of raw strings against the schema and case defaults."""
    kind = raw.get("case")
    if kind not in CASE_KINDS:
        raise ConfigError(f"{source}: 'case' must be one of {CASE_KINDS}, got {kind!r}")
    values = {k: default for k, (_, default) in SCHEMA.items() if default is not None}
    boundary = {}
    for key, default in CASE_DEFAULTS[kind].items():
        m = BC_PATTERN.match(key)
        if m:
            boundary[(m.group(1), m.group(2))] = default
        else:
            values[key] = default
    for key, text in raw.items():
        m = BC_PATTERN.match(key)
        if m:
            boundary[(m.group(1), m.group(2))] = str(text).strip()
            continue
        if key not in SCHEMA:
            raise ConfigError(f"{source}: unknown key {key!r}")
        try:
            values[key] = SCHEMA[key][0](str(text))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{source}: bad value for {key!r}: {exc}") from None
    cfg = CaseConfig(values, boundary, source)
    _validate(cfg)
    return cfg


def _validate(cfg):
    v = cfg.values
    for key in ("mesh.cells", "mesh.lower", "mesh.upper"):
        if key not in v:
            raise ConfigError(f"{cfg.source}: {key} is required for case {cfg.kind}")
    d = len(v["mesh.cells"])
    if d not in (1, 2) or len(v["mesh.lower"]) != d or len(v["mesh.upper"]) != d:
        raise ConfigError(f"{cfg.source}: mesh.cells/lower/upper must all have 1 or 2 entries")
    if any(n < 1 for n in v["mesh.cells"]):
        raise ConfigError(f"{cfg.source}: mesh.cells must be positive")
    if any(lo >= hi for lo, hi in zip(v["mesh.lower"], v["mesh.upper"])):
        raise ConfigError(f"{cfg.source}: mesh.lower must be below mesh.upper")
    if "y" in v["mesh.periodic"] and d == 1:
        raise ConfigError(f"{cfg.source}: a 1D mesh has no y axis")
    if cfg.kind != "couette" and v["dg.degree"] < 1:
        raise ConfigError(f"{cfg.source}: Cahn-Hilliard runs need dg.degree >= 1")
    for key in ("ch.mobility", "ch.gamma", "time.dt", "dg.penalty"):
        if v[key] <= 0:
            raise ConfigError(f"{cfg.source}: {key} must be positive")
    if v["ns.viscosity"] < 0:
        raise ConfigError(f"{cfg.source}: ns.viscosity must be non-negative")
    if cfg.kind == "ch_convergence" and len(v["study.resolutions"]) < 3:
        raise ConfigError(f"{cfg.source}: a convergence study needs at least 3 resolutions")
    if v["ch.splitting"] not in ("eyre_convex_split", "full_newton"):
        raise ConfigError(f"{cfg.source}: unknown ch.splitting {v['ch.splitting']!r}")
    if v["ch.linear_solver"] not in ("direct", "sparse_direct", "bicgstab"):
        raise ConfigError(f"{cfg.source}: unknown ch.linear_solver {v['ch.linear_solver']!r}")
    if v["init.c"] not in ("sgn", "tanh", "droplet", "random", "uniform"):
        raise ConfigError(f"{cfg.source}: unknown init.c {v['init.c']!r}")
    if v["init.U"] not in ("zero", "couette"):
        raise ConfigError(f"{cfg.source}: unknown init.U {v['init.U']!r}")
    names = patch_names(cfg)
    for (fld, patch), text in cfg.boundary.items():
        if patch not in names:
            raise ConfigError(f"{cfg.source}: bc.{fld}.{patch} names an unknown patch; have {names}")
        try:
            parse_condition(fld, text)
        except ValueError as exc:
            raise ConfigError(f"{cfg.source}: bc.{fld}.{patch}: {exc}") from None


def patch_names(cfg):
    """Patch names of the case mesh: one per open side, one per periodic axis."""
    d = cfg.dimension
    periodic = cfg.values["mesh.periodic"]
    names = []
    for axis, (lo, hi) in zip("xy"[:d], (("left", "right"), ("bottom", "top"))):
        if axis in periodic:
            names.append(f"periodic_{axis}")
        else:
            names += [lo, hi]
    return names


def parse_condition(fld, text):
    """Decode ``kind[:numbers]`` into a ``(kind, values)`` pair."""
    kind, _, rest = text.partition(":")
    kind = kind.strip().lower()
    nums = _floats(rest) if rest.strip() else ()
    if fld in ("c", "mu"):
        if kind not in ("neumann", "dirichlet") or len(nums) > 1:
            raise ValueError(f"expected neumann[:g] or dirichlet[:g], got {text!r}")
        return kind, nums[0] if nums else 0.0
    if kind == "wall":
        return kind, nums or (0.0, 0.0)
    if kind == "zero_gradient" and not nums:
        return kind, ()
    raise ValueError(f"expected wall[:ux,uy] or zero_gradient, got {text!r}")


def load_config(path, overrides=None):
    with open(path, encoding="utf-8") as fh:
        raw = parse_text(fh.read(), str(path))
    if overrides:
        raw.update(overrides)
    return build_config(raw, str(path))


def parse_overrides(items):
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out
