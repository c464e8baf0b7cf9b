"""Configuration files, material and climate data, and simulation output.

Config grammar
--------------
A config is plain text, one statement per line::

    # comment
    [section.sub]            # section header, dotted names allowed
    key = <JSON value>       # numbers, strings, true/false, lists, objects

``Infinity`` is accepted as a number. Keys must be unique inside a section.
Relative file paths are resolved against the directory of the file that
mentions them.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assembly import BoundaryDrive, ClimateSeries, Field, SegmentDrive
from .domain import LayerRect, build_domain, triangulate
from .errors import BadColumnCount, NonMonotoneTime, ParseError, ValidationError
from .materials import KiesslParams, KunzelParams, LinearParams, MonotoneCurve, Surface2

DATA_DIR = Path(__file__).parent / "data"
_HEADER = re.compile(r"^\[([A-Za-z0-9_.\-]+)\]$")
_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_\-]*$")


# grammar ------------------------------------------------------------------

def _strip_comment(line):
    quoted = False
    esc = False
    for k, ch in enumerate(line):
        if esc:
            esc = False
        elif ch == "\\" and quoted:
            esc = True
        elif ch == '"':
            quoted = not quoted
        elif ch == "#" and not quoted:
            return line[:k]
    return line


def parse_config_text(text) -> dict:
    """Parse config text into ``{section: {key: value}}``."""
    out: dict = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        m = _HEADER.match(line)
        if m:
            section = m.group(1)
            if section in out:
                raise ParseError(f"duplicate section [{section}]", lineno)
            out[section] = {}
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {line!r}", lineno)
        if section is None:
            raise ParseError("statement before the first section header", lineno)
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not _KEY.match(key):
            raise ParseError(f"invalid key {key!r}", lineno)
        if key in out[section]:
            raise ParseError(f"duplicate key {key!r} in [{section}]", lineno)
        try:
            out[section][key] = json.loads(value)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid value for {key!r}: {e.msg}", lineno) from None
    return out


def format_config(sections: dict) -> str:
    lines = []
    for name, body in sections.items():
        if lines:
            lines.append("")
        lines.append(f"[{name}]")
        for k, v in body.items():
            lines.append(f"{k} = {json.dumps(v)}")
    return "\n".join(lines) + "\n"


def read_config_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ParseError(f"cannot read {path}: {e}") from None
    return parse_config_text(text)


# data files -----------------------------------------------------------------

def _rows(path, ncol):
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise BadColumnCount(f"{path}: empty file")
    data = []
    for k, r in enumerate(rows):
        if ncol is not None and len(r) != ncol:
            raise BadColumnCount(f"{path}: row {k + 1} has {len(r)} columns, expected {ncol}")
        try:
            data.append([float(v) for v in r])
        except ValueError:
            if k == 0:
                continue  # header
            raise BadColumnCount(f"{path}: non-numeric entry in row {k + 1}") from None
    return data


def load_climate_csv(path) -> ClimateSeries:
    """Rows ``t_s, sigma1, sigma2`` with strictly increasing times."""
    data = np.array(_rows(path, 3), dtype=float).reshape(-1, 3)
    if len(data) == 0:
        raise BadColumnCount(f"{path}: no data rows")
    if np.any(np.diff(data[:, 0]) <= 0):
        raise NonMonotoneTime(f"{path}: time column must be strictly increasing")
    return ClimateSeries(data[:, 0], data[:, 1:])


def load_curve_csv(path, name="") -> MonotoneCurve:
    data = np.array(_rows(path, 2), dtype=float).reshape(-1, 2)
    return MonotoneCurve(data[:, 0], data[:, 1], name=name or Path(path).stem)


def load_surface_csv(path, name="") -> Surface2:
    """Matrix CSV: first row is a label then the theta axis, first column the m axis."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if len(rows) < 3:
        raise BadColumnCount(f"{path}: surface needs a header row and >= 2 data rows")
    width = len(rows[0])
    for k, r in enumerate(rows):
        if len(r) != width:
            raise BadColumnCount(f"{path}: row {k + 1} has {len(r)} columns, expected {width}")
    theta = [float(v) for v in rows[0][1:]]
    m = [float(r[0]) for r in rows[1:]]
    vals = [[float(v) for v in r[1:]] for r in rows[1:]]
    return Surface2(m, theta, vals, name=name or path.stem)


def write_curve_csv(path, x, y, header=("x", "y")):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for a, b in zip(x, y):
            w.writerow([repr(float(a)), repr(float(b))])


def write_surface_csv(path, m_axis, theta_axis, values, label="m/theta"):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([label] + [repr(float(t)) for t in theta_axis])
        for mv, row in zip(m_axis, values):
            w.writerow([repr(float(mv))] + [repr(float(v)) for v in row])


# materials --------------------------------------------------------------------

_SCALARS = {
    "kunzel": ("rho0", "c0", "rho_w", "c_w", "L_v", "mu", "alpha1", "alpha2"),
    "kiessl": ("rho0", "c0", "rho_w", "c_w", "e", "L_v", "alpha1", "alpha2"),
}
_CURVES = {"kunzel": ("h_curve", "p_s", "delta"), "kiessl": ("f", "g", "rho_ps")}
_SURFACES = {"kunzel": ("lam", "D_phi_hat"), "kiessl": ("lam", "D_w", "D_phi", "D_theta")}


def build_material(spec: dict, base_dir, key="material"):
    """Material model from a config section (see module docstring for paths)."""
    base_dir = Path(base_dir)
    if "file" in spec:
        path = base_dir / spec["file"]
        if not path.is_file():
            raise ValidationError(f"{key}.file", f"file not found: {path}")
        inner = read_config_file(path)
        if "material" not in inner:
            raise ValidationError(f"{key}.file", "material file lacks a [material] section")
        return build_material(inner["material"], path.parent, key)
    model = spec.get("model")
    if model == "linear":
        try:
            return LinearParams(spec["beta"], spec["kappa"], tuple(spec.get("nu", (0.0, 0.0))),
                                tuple(spec.get("alpha", (0.0, 0.0))))
        except KeyError as e:
            raise ValidationError(f"{key}.{e.args[0]}", "required for linear model") from None
        except Exception as e:
            raise ValidationError(key, str(e)) from None
    if model not in _SCALARS:
        raise ValidationError(f"{key}.model", f"unknown model {model!r}")
    kw = {}
    for name in _SCALARS[model]:
        if name not in spec:
            raise ValidationError(f"{key}.{name}", "missing")
        kw[name] = float(spec[name])
    for name in _CURVES[model] + _SURFACES[model]:
        if name not in spec:
            raise ValidationError(f"{key}.{name}", "missing data file")
        path = base_dir / spec[name]
        if not path.is_file():
            raise ValidationError(f"{key}.{name}", f"file not found: {path}")
        loader = load_curve_csv if name in _CURVES[model] else load_surface_csv
        kw[name] = loader(path, name)
    try:
        return (KunzelParams if model == "kunzel" else KiesslParams)(**kw)
    except Exception as e:
        raise ValidationError(key, str(e)) from None


def demo_material(name):
    """Bundled demo materials: 'kunzel_brick', 'kunzel_insulation', 'kiessl_brick'."""
    path = DATA_DIR / f"mat_{name}.cfg"
    if not path.is_file():
        raise KeyError(name)
    return build_material(read_config_file(path)["material"], DATA_DIR, name)


# run configuration ---------------------------------------------------------------

SIDES = ("south", "east", "north", "west")


@dataclass
class LayerSpec:
    name: str
    rect: tuple
    material: str
    initial: tuple


@dataclass
class BoundarySpec:
    side: str
    alpha: tuple | None = None
    climate: str | None = None
    sigma: tuple | None = None


@dataclass
class MmsSpec:
    case: str
    h_list: list
    ht_list: list


@dataclass
class RunConfig:
    layers: list
    materials: dict
    boundaries: dict
    h_target: float = 0.02
    h_t: float = 60.0
    t_end: float = 3600.0
    strategy: str = "semi_implicit"
    eps_fp: float = 1e-8
    k_max: int = 50
    solver_tol: float = 1e-10
    output_dir: str = "out"
    snapshot_times: list = field(default_factory=list)
    probes: dict = field(default_factory=dict)
    write_vtk: bool = True
    figures: bool = True
    mms: MmsSpec | None = None
    base_dir: str = "."

    def path(self, rel):
        return Path(self.base_dir) / rel

    def to_sections(self) -> dict:
        s = {
            "run": {
                "h_target": self.h_target, "h_t": self.h_t, "t_end": self.t_end,
                "strategy": self.strategy, "eps_fp": self.eps_fp, "k_max": self.k_max,
                "solver_tol": self.solver_tol, "snapshot_times": list(self.snapshot_times),
            }
        }
        for L in self.layers:
            s[f"layer.{L.name}"] = {"rect": list(L.rect), "material": L.material,
                                    "initial": list(L.initial)}
        for name, spec in self.materials.items():
            s[f"material.{name}"] = dict(spec)
        for side, b in self.boundaries.items():
            body = {}
            if b.alpha is not None:
                body["alpha"] = list(b.alpha)
            if b.climate is not None:
                body["climate"] = b.climate
            if b.sigma is not None:
                body["sigma"] = list(b.sigma)
            s[f"boundary.{side}"] = body
        s["output"] = {"dir": self.output_dir, "vtk": self.write_vtk, "figures": self.figures,
                       "probes": {k: list(v) for k, v in self.probes.items()}}
        if self.mms is not None:
            s["mms"] = {"case": self.mms.case, "h_list": list(self.mms.h_list),
                        "ht_list": list(self.mms.ht_list)}
        return s

    def to_text(self):
        return format_config(self.to_sections())


def _num(sec, key, full, default=None, positive=True, allow_inf=False):
    if key not in sec:
        if default is None:
            raise ValidationError(full, "missing")
        return default
    v = sec[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError(full, "must be a number")
    v = float(v)
    if math.isnan(v) or (math.isinf(v) and not allow_inf):
        raise ValidationError(full, "must be finite")
    if positive and not v > 0:
        raise ValidationError(full, "must be positive")
    return v


def _pair(v, full, nonneg=False):
    if not (isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v)):
        raise ValidationError(full, "must be a list of two numbers")
    if nonneg and min(v) < 0:
        raise ValidationError(full, "entries must be non-negative")
    return tuple(float(x) for x in v)


def config_from_sections(sections: dict, base_dir=".") -> RunConfig:
    base = Path(base_dir)
    known = ("run", "output", "mms")
    for name in sections:
        if name not in known and not name.startswith(("layer.", "material.", "boundary.")):
            raise ValidationError(name, "unknown section")
    run = sections.get("run", {})
    h_target = _num(run, "h_target", "run.h_target", 0.02)
    h_t = _num(run, "h_t", "run.h_t", 60.0)
    t_end = _num(run, "t_end", "run.t_end", 3600.0, positive=False)
    if t_end < 0:
        raise ValidationError("run.t_end", "must be non-negative")
    strategy = run.get("strategy", "semi_implicit")
    if strategy not in ("semi_implicit", "picard"):
        raise ValidationError("run.strategy", "must be 'semi_implicit' or 'picard'")
    eps_fp = _num(run, "eps_fp", "run.eps_fp", 1e-8)
    k_max = run.get("k_max", 50)
    if not isinstance(k_max, int) or isinstance(k_max, bool) or k_max < 1:
        raise ValidationError("run.k_max", "must be a positive integer")
    solver_tol = _num(run, "solver_tol", "run.solver_tol", 1e-10)
    n_steps = t_end / h_t
    if abs(n_steps - round(n_steps)) > 1e-9 * max(1.0, n_steps):
        raise ValidationError("run.t_end", "must be a multiple of run.h_t")
    snaps = run.get("snapshot_times", [])
    if not isinstance(snaps, list):
        raise ValidationError("run.snapshot_times", "must be a list")
    for t in snaps:
        if not isinstance(t, (int, float)) or not 0 <= t <= t_end:
            raise ValidationError("run.snapshot_times", f"time {t} outside [0, t_end]")
        q = t / h_t
        if abs(q - round(q)) > 1e-9 * max(1.0, q):
            raise ValidationError("run.snapshot_times", f"time {t} is not a multiple of h_t")

    materials = {}
    for name, sec in sections.items():
        if name.startswith("material."):
            mname = name.split(".", 1)[1]
            if "file" in sec and not (base / sec["file"]).is_file():
                raise ValidationError(f"{name}.file", f"file not found: {base / sec['file']}")
            materials[mname] = dict(sec)

    layers = []
    for name, sec in sections.items():
        if not name.startswith("layer."):
            continue
        lname = name.split(".", 1)[1]
        rect = sec.get("rect")
        if not (isinstance(rect, list) and len(rect) == 4):
            raise ValidationError(f"{name}.rect", "must be [x0, y0, x1, y1]")
        mat = sec.get("material")
        if mat not in materials:
            raise ValidationError(f"{name}.material", f"unknown material {mat!r}")
        init = _pair(sec.get("initial", [0.0, 0.0]), f"{name}.initial")
        layers.append(LayerSpec(lname, tuple(float(v) for v in rect), mat, init))
    if not layers:
        raise ValidationError("layer", "at least one [layer.<name>] section is required")

    boundaries = {}
    for name, sec in sections.items():
        if not name.startswith("boundary."):
            continue
        side = name.split(".", 1)[1]
        if side not in SIDES:
            raise ValidationError(name, f"side must be one of {SIDES}")
        alpha = _pair(sec["alpha"], f"{name}.alpha", nonneg=True) if "alpha" in sec else None
        climate = sec.get("climate")
        sigma = _pair(sec["sigma"], f"{name}.sigma") if "sigma" in sec else None
        if climate is not None:
            if not isinstance(climate, str) or not (base / climate).is_file():
                raise ValidationError(f"{name}.climate", f"file not found: {base / str(climate)}")
            if sigma is not None:
                raise ValidationError(name, "give either climate or sigma, not both")
        elif sigma is None:
            raise ValidationError(f"{name}.climate", "boundary needs a climate file or sigma")
        boundaries[side] = BoundarySpec(side, alpha, climate, sigma)

    out = sections.get("output", {})
    probes = out.get("probes", {})
    if not isinstance(probes, dict):
        raise ValidationError("output.probes", "must be an object of name: [x, y]")
    probes = {k: _pair(v, f"output.probes.{k}") for k, v in probes.items()}

    mms = None
    if "mms" in sections:
        m = sections["mms"]
        from .mms import CASES

        if m.get("case") not in CASES:
            raise ValidationError("mms.case", f"must be one of {sorted(CASES)}")
        for key in ("h_list", "ht_list"):
            v = m.get(key)
            if not (isinstance(v, list) and v and all(isinstance(x, (int, float)) and x > 0 for x in v)):
                raise ValidationError(f"mms.{key}", "must be a non-empty list of positive numbers")
        mms = MmsSpec(m["case"], [float(x) for x in m["h_list"]], [float(x) for x in m["ht_list"]])

    return RunConfig(
        layers=layers, materials=materials, boundaries=boundaries, h_target=h_target,
        h_t=h_t, t_end=t_end, strategy=strategy, eps_fp=eps_fp, k_max=k_max,
        solver_tol=solver_tol, output_dir=str(out.get("dir", "out")),
        snapshot_times=[float(t) for t in snaps], probes=probes,
        write_vtk=bool(out.get("vtk", True)), figures=bool(out.get("figures", True)),
        mms=mms, base_dir=str(base),
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    return config_from_sections(read_config_file(path), path.parent)


def build_problem(cfg: RunConfig, h_target=None):
    """Mesh, per-layer models, boundary drive and initial field for a config."""
    from .stepper import Problem

    rects = [LayerRect(*L.rect, material_id=L.material, name=L.name) for L in cfg.layers]
    domain = build_domain(rects)
    mesh = triangulate(domain, h_target or cfg.h_target)
    cache = {}
    for name, spec in cfg.materials.items():
        cache[name] = build_material(spec, cfg.base_dir, f"material.{name}")
    models = [cache[L.material] for L in cfg.layers]

    x0 = min(r.x0 for r in rects)
    x1 = max(r.x1 for r in rects)
    y0 = min(r.y0 for r in rects)
    y1 = max(r.y1 for r in rects)
    on_side = {
        "west": lambda s: s.p0[0] == s.p1[0] == x0,
        "east": lambda s: s.p0[0] == s.p1[0] == x1,
        "south": lambda s: s.p0[1] == s.p1[1] == y0,
        "north": lambda s: s.p0[1] == s.p1[1] == y1,
    }
    drive = {}
    for side, b in cfg.boundaries.items():
        series = load_climate_csv(cfg.path(b.climate)) if b.climate else ClimateSeries.constant(*b.sigma)
        for k, seg in enumerate(domain.exterior_segments):
            if on_side[side](seg):
                drive[k] = SegmentDrive(series, b.alpha)
    problem = Problem(mesh, models, BoundaryDrive(drive), solver_tol=cfg.solver_tol)

    init = np.empty((mesh.n_nodes, 2))
    for k, L in enumerate(cfg.layers):
        init[np.unique(mesh.triangles[mesh.tri_layer == k])] = L.initial
    return problem, Field(init.ravel())


# output ---------------------------------------------------------------------------

def _g17(v):
    return "%.17g" % v


def write_vtk(mesh, field: Field, path):
    """Legacy ASCII VTK unstructured grid with 'theta' and 'moisture' point data."""
    nn, nt = mesh.n_nodes, mesh.n_triangles
    out = ["# vtk DataFile Version 3.0", "hygrofem field", "ASCII",
           "DATASET UNSTRUCTURED_GRID", f"POINTS {nn} double"]
    out += [f"{_g17(x)} {_g17(y)} 0" for x, y in mesh.nodes]
    out.append(f"CELLS {nt} {4 * nt}")
    out += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    out.append(f"CELL_TYPES {nt}")
    out += ["5"] * nt
    out.append(f"POINT_DATA {nn}")
    for c, name in enumerate(("theta", "moisture")):
        out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        out += [_g17(v) for v in field.component(c)]
    Path(path).write_text("\n".join(out) + "\n")


def read_vtk(path):
    """Parse a file written by :func:`write_vtk`: (nodes, triangles, {name: values})."""
    tok = Path(path).read_text().split("\n")
    k = 0
    nodes = tris = None
    data = {}
    while k < len(tok):
        line = tok[k].split()
        if not line:
            k += 1
            continue
        if line[0] == "POINTS":
            n = int(line[1])
            nodes = np.array([[float(v) for v in tok[k + 1 + i].split()[:2]] for i in range(n)])
            k += n + 1
        elif line[0] == "CELLS":
            n = int(line[1])
            tris = np.array([[int(v) for v in tok[k + 1 + i].split()[1:]] for i in range(n)])
            k += n + 1
        elif line[0] == "SCALARS":
            name = line[1]
            n = len(nodes)
            data[name] = np.array([float(tok[k + 2 + i]) for i in range(n)])
            k += n + 2
        else:
            k += 1
    return nodes, tris, data


def write_probe_csv(times, series: dict, path):
    """One row per time sample; two columns (theta, moisture) per probe."""
    names = list(series)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_s"] + [f"{n}_{c}" for n in names for c in ("theta", "moisture")])
        for k, t in enumerate(times):
            row = [_g17(t)]
            for n in names:
                row += [_g17(v) for v in series[n][k]]
            w.writerow(row)


def write_convergence_report(table, path):
    """Rows (h, h_t, error) with observed orders against the previous coarser level."""
    rows = sorted(table.rows, key=lambda r: (-r[1], -r[0]))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["h", "h_t", "error", "order_h", "order_t"])
        for h, ht, e in rows:
            coarse_h = [r for r in table.rows if r[1] == ht and r[0] > h]
            coarse_t = [r for r in table.rows if r[0] == h and r[1] > ht]
            oh = ot = ""
            if coarse_h:
                c = min(coarse_h, key=lambda r: r[0])
                if c[2] > 0 and e > 0:
                    oh = "%.6f" % (math.log(c[2] / e) / math.log(c[0] / h))
            if coarse_t:
                c = min(coarse_t, key=lambda r: r[1])
                if c[2] > 0 and e > 0:
                    ot = "%.6f" % (math.log(c[2] / e) / math.log(c[1] / ht))
            w.writerow([_g17(h), _g17(ht), "%.12e" % e, oh, ot])
