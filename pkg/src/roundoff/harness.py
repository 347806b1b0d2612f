"""Experiment driver: (n, a) sweeps, convergence toward the polygon, plots."""

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import finite_width_estimate, normal_reach_estimate
from .errors import EmptyTable, RoundoffError
from .fem import SOURCE_NAMES, assemble_poisson, evaluate, solve_dirichlet, source_preset, weighted_eigen_min
from .geometry import (
    Polygon,
    RoundingParams,
    construct_rounded_domain,
    polygon_validate,
    preset,
    select_default_params,
)
from .mesh import SizingField, mesh_domain, mesh_quality
from .norms import ratio_report
from .weights import EtaProfile, WeightFunction, curvature_profile

__all__ = [
    "ExperimentConfig",
    "ResultRow",
    "ResultTable",
    "ConvergenceRow",
    "ConvergenceTable",
    "make_polygon",
    "make_source",
    "run_sweep",
    "convergence_study",
    "emit_plots",
]


@dataclass
class ExperimentConfig:
    polygon: object = "square"
    rho: object = "auto"
    rho_prime: object = "auto"
    n_list: list = field(default_factory=lambda: [1, 2, 4, 8, 16])
    a_list: list = field(default_factory=lambda: [0.3])
    source: str = "sine"
    h_max: float = 0.1
    h_min: float = 0.0
    beta: float = 0.5
    order: int = 2
    seed: int = 0
    output: str = "out"
    eigen: bool = True
    diagnose: bool = False
    samples: int = 64
    width_resolution: float = 0.1
    gagliardo_s: object = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        n = list(self.n_list)
        if not n or any(int(v) != v or v < 1 for v in n):
            raise ValueError("n_list must hold positive integers")
        if any(b <= a for a, b in zip(n, n[1:])):
            raise ValueError("n_list must be strictly increasing")
        if not self.a_list or any(abs(a) > 1 for a in self.a_list):
            raise ValueError("a_list values must satisfy |a| <= 1")
        if self.order not in (1, 2):
            raise ValueError("order must be 1 or 2")
        if not (self.h_max > 0 and 0 <= self.h_min <= self.h_max):
            raise ValueError("need 0 <= h_min <= h_max and h_max > 0")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.source != "random" and self.source not in SOURCE_NAMES:
            raise ValueError(f"unknown source {self.source!r}")

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_json(self, path=None):
        text = json.dumps(asdict(self), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    def digest(self):
        """Hash of every setting that affects results (the output directory does not)."""
        data = asdict(self)
        data.pop("output")
        canon = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def replace(self, **kw):
        data = asdict(self)
        data.update(kw)
        return ExperimentConfig(**data)


def make_polygon(source):
    if isinstance(source, str):
        return preset(source)
    if isinstance(source, Polygon):
        return source
    return polygon_validate(source)


def rounding_params(config, polygon=None):
    polygon = make_polygon(config.polygon) if polygon is None else polygon
    rho, rho_p = config.rho, config.rho_prime
    if rho == "auto" or rho_p == "auto":
        base = select_default_params(polygon) if rho == "auto" else select_default_params(polygon, rho_fraction=rho / polygon.R0)
        rho = base.rho if rho == "auto" else rho
        rho_p = base.rho_prime if rho_p == "auto" else rho_p
    return RoundingParams(float(rho), float(rho_p), 1)


@dataclass(frozen=True)
class _RandomBumps:
    centers: np.ndarray
    widths: np.ndarray
    amps: np.ndarray
    name: str = "random"

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d2 = ((x[:, None] - self.centers[None]) ** 2).sum(axis=-1)
        return (self.amps * np.exp(-d2 / (2 * self.widths**2))).sum(axis=1)


def make_source(config, polygon=None):
    """Source preset by name; ``random`` draws seeded Gaussian bumps inside the polygon."""
    if config.source != "random":
        return source_preset(config.source)
    polygon = make_polygon(config.polygon) if polygon is None else polygon
    rng = np.random.default_rng(config.seed)
    lo, hi = polygon.vertices.min(axis=0), polygon.vertices.max(axis=0)
    centers = []
    while len(centers) < 5:
        p = rng.uniform(lo, hi)
        if polygon.contains(p[None])[0]:
            centers.append(p)
    scale = float((hi - lo).max())
    return _RandomBumps(np.array(centers), rng.uniform(0.05, 0.2, 5) * scale, rng.uniform(-1.0, 1.0, 5))


# ---------------------------------------------------------------------------
# sweep

ROW_COLUMNS = [
    "n", "a", "status", "h", "dofs", "l2_f", "k21a", "h1", "ratio", "gagliardo",
    "lambda_min", "sup_kappa_0", "sup_kappa_1", "sup_kappa_2", "width_sup", "reach_min",
]  # fmt: skip

_NAN = float("nan")


@dataclass
class ResultRow:
    n: int
    a: float
    status: str = "ok"
    h: float = _NAN
    dofs: int = 0
    l2_f: float = _NAN
    k21a: float = _NAN
    h1: float = _NAN
    ratio: float = _NAN
    gagliardo: float = _NAN
    lambda_min: float = _NAN
    sup_kappa_0: float = _NAN
    sup_kappa_1: float = _NAN
    sup_kappa_2: float = _NAN
    width_sup: float = _NAN
    reach_min: float = _NAN

    @property
    def ok(self):
        return self.status == "ok"


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


@dataclass
class ResultTable:
    rows: list
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.rows)

    @property
    def errored(self):
        return any(not r.ok for r in self.rows)

    def column(self, name, a=None):
        return np.array([getattr(r, name) for r in self.rows if a is None or r.a == a], dtype=float)

    def a_values(self):
        return sorted({r.a for r in self.rows})

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            for k in sorted(self.metadata):
                fh.write(f"# {k}={self.metadata[k]}\n")
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(ROW_COLUMNS)
            for r in self.rows:
                wr.writerow([_fmt(getattr(r, c)) for c in ROW_COLUMNS])

    @classmethod
    def from_csv(cls, path):
        meta, body = {}, []
        for line in Path(path).read_text().splitlines():
            if line.startswith("# "):
                k, _, v = line[2:].partition("=")
                meta[k] = v
            else:
                body.append(line)
        rows = []
        for rec in csv.DictReader(body):
            kw = {}
            for c in ROW_COLUMNS:
                v = rec[c]
                kw[c] = v if c == "status" else (int(v) if c in ("n", "dofs") else float(v))
            rows.append(ResultRow(**kw))
        return cls(rows, meta)


def _error_code(exc):
    return getattr(exc, "code", type(exc).__name__)


def _sweep_cell(config, polygon, params, f, n):
    """All rows for one family member; any failure marks every row of that n."""
    rows = [ResultRow(int(n), float(a)) for a in config.a_list]
    try:
        domain = construct_rounded_domain(polygon, params.at(n))
        w = WeightFunction.for_domain(domain)
        sizing = SizingField(config.h_max, config.h_min, config.beta, w)
        mesh = mesh_domain(domain, sizing, order=config.order)
        system = assemble_poisson(mesh, config.order, w)
        sol = solve_dirichlet(mesh, config.order, f, system=system)
        shared = {}
        if config.eigen:
            shared["lambda_min"] = weighted_eigen_min(mesh, config.order, w, system=system)
        sup = curvature_profile(domain, w, k=2).sup()
        shared.update({f"sup_kappa_{k}": float(sup[k]) for k in range(3)})
        if config.diagnose:
            shared["width_sup"] = finite_width_estimate(domain, w, resolution=config.width_resolution).sup
            shared["reach_min"] = normal_reach_estimate(domain, w, samples=config.samples)
        for row in rows:
            rep = ratio_report(domain, mesh, sol, f, w, row.a, config.gagliardo_s)
            for c in ("h", "dofs", "l2_f", "k21a", "h1", "ratio", "gagliardo"):
                setattr(row, c, getattr(rep, c))
            for c, v in shared.items():
                setattr(row, c, v)
    except (RoundoffError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        code = _error_code(exc)
        rows = [ResultRow(int(n), float(a), status=code) for a in config.a_list]
    return rows


def run_sweep(config, write=True):
    """One row per (n, a); rows that fail carry the error code in ``status``."""
    polygon = make_polygon(config.polygon)
    params = rounding_params(config, polygon)
    f = make_source(config, polygon)
    rows = []
    for n in config.n_list:
        rows.extend(_sweep_cell(config, polygon, params, f, n))
    meta = {
        "config_hash": config.digest(),
        "version": __version__,
        "rho": repr(params.rho),
        "rho_prime": repr(params.rho_prime),
    }
    table = ResultTable(rows, meta)
    if write:
        out = Path(config.output)
        out.mkdir(parents=True, exist_ok=True)
        table.to_csv(out / "results.csv")
    return table


# ---------------------------------------------------------------------------
# convergence toward the polygon


@dataclass
class ConvergenceRow:
    n: int
    l2_diff: float
    floor: bool
    status: str = "ok"


@dataclass
class ConvergenceTable:
    rows: list
    l2_inf: float
    metadata: dict = field(default_factory=dict)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            for k in sorted(self.metadata):
                fh.write(f"# {k}={self.metadata[k]}\n")
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["n", "l2_diff", "floor", "status"])
            for r in self.rows:
                wr.writerow([r.n, repr(float(r.l2_diff)), int(r.floor), r.status])


def polygon_mesh(polygon, config, a=None):
    """Mesh of the polygon itself, graded toward its vertices with exponent 1 - a."""
    a = config.a_list[0] if a is None else a
    grade = max(1.0 - a, 0.1)
    w = WeightFunction(EtaProfile(polygon.R), polygon.vertices)
    h_min = config.h_min if config.h_min > 0 else config.h_max / 400.0
    return mesh_domain(polygon, SizingField(config.h_max, h_min, config.beta, w, grade), order=config.order)


def convergence_study(config, write=True):
    """||u_n - u_inf||_{L2(polygon)} with u_n evaluated at the polygon mesh nodes."""
    polygon = make_polygon(config.polygon)
    params = rounding_params(config, polygon)
    f = make_source(config, polygon)
    mesh_inf = polygon_mesh(polygon, config)
    sys_inf = assemble_poisson(mesh_inf, config.order)
    u_inf = solve_dirichlet(mesh_inf, config.order, f, system=sys_inf)
    M = sys_inf.mass
    nodes = mesh_inf.nodes[: len(u_inf.values)]
    h_floor = config.h_min if config.h_min > 0 else mesh_quality(mesh_inf)["h_min"]
    rows = []
    for n in config.n_list:
        domain = construct_rounded_domain(polygon, params.at(n))
        w = WeightFunction.for_domain(domain)
        mesh = mesh_domain(domain, SizingField(config.h_max, config.h_min, config.beta, w), order=config.order)
        u_n = solve_dirichlet(mesh, config.order, f)
        e = evaluate(u_n, nodes) - u_inf.values
        rows.append(ConvergenceRow(int(n), math.sqrt(max(float(e @ (M @ e)), 0.0)), params.rho / n < h_floor))
    table = ConvergenceTable(rows, math.sqrt(float(u_inf.values @ (M @ u_inf.values))), {"config_hash": config.digest()})
    if write:
        out = Path(config.output)
        out.mkdir(parents=True, exist_ok=True)
        table.to_csv(out / "convergence.csv")
    return table


# ---------------------------------------------------------------------------
# plots


def _line_plot(path, series, xlabel, ylabel, logy=False):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "roundoff", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for label, x, y in series:
            ax.plot(x, y, marker="o", label=label)
        ax.set_xscale("log", base=2)
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if len(series) > 1:
            ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def emit_plots(table, out_dir, config=None):
    """ratio vs n per a, lambda_min vs n, sup|kappa| vs n, and outline overlays if ``config`` is given."""
    if table is None or len(table) == 0:
        raise EmptyTable("nothing to plot")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ok = [r for r in table.rows if r.ok]
    written = []

    series = []
    for a in sorted({r.a for r in ok}):
        sel = [r for r in ok if r.a == a]
        series.append((f"a = {a:g}", [r.n for r in sel], [r.ratio for r in sel]))
    _line_plot(out / "ratio_vs_n.svg", series, "n", "||u||_K / ||f||")
    written.append(out / "ratio_vs_n.svg")

    per_n = {}
    for r in ok:
        per_n.setdefault(r.n, r)
    ns = sorted(per_n)
    _line_plot(out / "lambda_vs_n.svg", [("lambda_min", ns, [per_n[n].lambda_min for n in ns])], "n", "lambda_min")
    written.append(out / "lambda_vs_n.svg")
    kap = [(f"k = {k}", ns, [abs(getattr(per_n[n], f"sup_kappa_{k}")) for n in ns]) for k in range(3)]
    _line_plot(out / "kappa_vs_n.svg", kap, "n", "sup |d^k kappa / ds^k|")
    written.append(out / "kappa_vs_n.svg")

    if config is not None:
        from .geometry import write_svg

        polygon = make_polygon(config.polygon)
        params = rounding_params(config, polygon)
        domains = [construct_rounded_domain(polygon, params.at(n)) for n in config.n_list]
        write_svg(domains, out / "outlines.svg")
        written.append(out / "outlines.svg")
    return written
