"""Bounded-geometry checks for a rounded domain in the metric r^-2 dx^2.

Three quantities are measured per family member: suprema of the boundary
curvature and its arc-length derivatives, the largest distance from an
interior point to the boundary (finite width), and how far normal geodesics
travel before they meet the boundary again (normal reach).
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra
from shapely import Polygon as _ShapelyPolygon
from shapely import contains_xy, prepare

from .errors import AtPuncture, MeshMissing, OdeStep
from .geometry import construct_rounded_domain
from .mesh import SizingField, mesh_domain
from .weights import WeightFunction, _hat_length, curvature_profile

__all__ = [
    "WidthEstimate",
    "BgRow",
    "BgReport",
    "finite_width_estimate",
    "corner_ball_width",
    "graph_distance",
    "shoot_normals",
    "normal_reach_estimate",
    "bg_report",
]

_GL5 = np.polynomial.legendre.leggauss(5)


@dataclass
class WidthEstimate:
    sup: float
    distance: np.ndarray  # per mesh vertex
    mesh: object


def _edge_lengths(nodes, edges, w):
    """Length of straight edges in r^-2 dx^2 by 5-point Gauss."""
    gl, gw = _GL5
    a = nodes[edges[:, 0]]
    b = nodes[edges[:, 1]]
    t = 0.5 * (gl + 1.0)
    pts = a[:, None] + t[None, :, None] * (b - a)[:, None]
    r = w(pts.reshape(-1, 2)).reshape(pts.shape[:2])
    return 0.5 * np.linalg.norm(b - a, axis=1) * ((1.0 / r) @ gw)


def _metric_graph(mesh, w, rings=2):
    """Vertex graph of the mesh with r^-2 dx^2 edge lengths; ``rings=2`` adds second neighbours."""
    nv = mesh.n_vertex_nodes
    E = mesh.edges()
    A = sp.coo_matrix((np.ones(len(E)), (E[:, 0], E[:, 1])), shape=(nv, nv))
    A = ((A + A.T) > 0).astype(float).tocsr()
    if rings >= 2:
        A2 = ((A @ A + A) > 0).astype(float).tocoo()
        keep = A2.row < A2.col
        E = np.stack([A2.row[keep], A2.col[keep]], axis=1)
    weights = _edge_lengths(mesh.nodes, E, w)
    return sp.coo_matrix((weights, (E[:, 0], E[:, 1])), shape=(nv, nv)).tocsr()


def finite_width_estimate(domain, w, resolution=None, mesh=None, beta=0.3, rings=2):
    """sup over mesh vertices of the graph distance to the boundary.

    Edge weights integrate ds / r along straight edges; ``rings=2`` also links
    vertices two edges apart, which reduces the zig-zag overestimate of graph
    paths.  The estimate is biased upward.
    """
    if mesh is None:
        if resolution is None:
            raise MeshMissing("pass a mesh or a resolution to build one")
        mesh = mesh_domain(domain, SizingField(resolution, 0.0, beta, w))
    nv = mesh.n_vertex_nodes
    G = _metric_graph(mesh, w, rings)
    bnodes = mesh.boundary_nodes[mesh.boundary_nodes < nv]
    dist = dijkstra(G, directed=False, indices=bnodes, min_only=True)
    return WidthEstimate(float(dist.max()), dist, mesh)


def graph_distance(mesh, w, x, y, rings=2, links=6):
    """Graph approximation of the r^-2 dx^2 distance between two interior points.

    Each point is joined by straight edges to its ``links`` nearest mesh vertices.
    """
    from scipy.spatial import cKDTree

    nv = mesh.n_vertex_nodes
    G = _metric_graph(mesh, w, rings).tocoo()
    P = mesh.nodes[:nv]
    tree = cKDTree(P)
    rows, cols, vals = [G.row], [G.col], [G.data]
    for k, p in enumerate((x, y)):
        _, idx = tree.query(np.asarray(p, dtype=float), k=links)
        seg = np.stack([np.full(links, nv + k), idx], axis=1)
        nodes = np.vstack([P, np.asarray(x, dtype=float), np.asarray(y, dtype=float)])
        rows.append(seg[:, 0])
        cols.append(seg[:, 1])
        vals.append(_edge_lengths(nodes, seg, w))
    H = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nv + 2, nv + 2)
    ).tocsr()
    return float(dijkstra(H, directed=False, indices=nv)[nv + 1])


def corner_ball_width(estimate, domain, radius=None):
    """Largest sampled boundary distance among vertices within ``radius`` of a puncture."""
    radius = domain.R / 8.0 if radius is None else radius
    nodes = estimate.mesh.nodes[: len(estimate.distance)]
    d = np.linalg.norm(nodes[:, None] - np.asarray(domain.punctures)[None], axis=-1).min(axis=1)
    inside = d <= radius
    return float(estimate.distance[inside].max()) if np.any(inside) else 0.0


def _boundary_samples(domain, w, samples, fine=2048):
    """Points and outward normals equally spaced in r^-2 dx^2 arc length."""
    pid, ts, cum = [], [], [0.0]
    u = np.linspace(0.0, 1.0, fine + 1)
    for k, piece in enumerate(domain.pieces):
        seg = _hat_length(piece, w, u[:-1], u[1:])
        pid.append(np.full(fine, k))
        ts.append(u[:-1])
        cum.extend(cum[-1] + np.cumsum(seg))
    pid = np.concatenate(pid)
    ts = np.concatenate(ts)
    cum = np.array(cum)
    total = cum[-1]
    target = total * np.arange(samples) / samples
    idx = np.clip(np.searchsorted(cum, target, side="right") - 1, 0, len(ts) - 1)
    frac = (target - cum[idx]) / (cum[idx + 1] - cum[idx])
    pts = np.empty((samples, 2))
    nrm = np.empty((samples, 2))
    for i, (k, t0, f) in enumerate(zip(pid[idx], ts[idx], frac)):
        piece = domain.pieces[k]
        t = t0 + f / fine
        pts[i] = piece.point(np.array([t]))[0]
        th = float(piece.tangent_angle(np.array([t]))[0])
        nrm[i] = (math.sin(th), -math.cos(th))
    return pts, nrm, total


def _geodesic_rhs(x, v, w):
    try:
        r, g = w.value_and_grad(x)
    except AtPuncture as exc:
        raise OdeStep("geodesic reached a puncture") from exc
    if np.any(~np.isfinite(r)) or np.any(r <= 0):
        raise OdeStep("geodesic reached a puncture")
    gphi = -g / r[:, None]
    vdot = (gphi * v).sum(axis=1)
    acc = -2.0 * vdot[:, None] * v + (v * v).sum(axis=1)[:, None] * gphi
    return v, acc


def shoot_normals(domain, w, points, normals, step=1e-3, cap=10.0, sides=(-1.0, 1.0)):
    """r^-2 dx^2 length travelled by normal geodesics from boundary points until they re-cross.

    ``normals`` are outward unit normals; the result has shape (len(sides), len(points)).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    nrm = np.atleast_2d(np.asarray(normals, dtype=float))
    m = len(pts)
    poly = _ShapelyPolygon(domain.boundary_polygon(per_arc=512))
    prepare(poly)
    # all sides in one batch: row i * m + k is point k shot along sides[i]
    side = np.repeat(np.asarray(sides, dtype=float), m)
    x = np.tile(pts, (len(sides), 1))
    try:
        r0 = w(pts)
    except AtPuncture as exc:
        raise OdeStep("geodesic starts at a puncture") from exc
    v = side[:, None] * np.tile(nrm * r0[:, None], (len(sides), 1))
    start_inside = side < 0
    result = np.full(len(side), float(cap))
    active = np.ones(len(side), dtype=bool)
    nsteps = int(round(cap / step))
    for k in range(1, nsteps + 1):
        ia = np.nonzero(active)[0]
        if len(ia) == 0:
            break
        xa, va = x[ia], v[ia]
        k1x, k1v = _geodesic_rhs(xa, va, w)
        k2x, k2v = _geodesic_rhs(xa + 0.5 * step * k1x, va + 0.5 * step * k1v, w)
        k3x, k3v = _geodesic_rhs(xa + 0.5 * step * k2x, va + 0.5 * step * k2v, w)
        k4x, k4v = _geodesic_rhs(xa + step * k3x, va + step * k3v, w)
        x[ia] = xa + step / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        v[ia] = va + step / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        if k > 1:
            crossed = contains_xy(poly, x[ia, 0], x[ia, 1]) != start_inside[ia]
            hit = ia[crossed]
            result[hit] = k * step
            active[hit] = False
    return result.reshape(len(sides), m)


def normal_reach_estimate(domain, w, samples=64, step=1e-3, cap=10.0, sides=(-1.0, 1.0), return_all=False):
    """Min over boundary samples of the r^-2 dx^2 length a normal geodesic travels before re-crossing.

    ``sides`` selects inward (-1) and/or outward (+1) normals.  Geodesics are
    integrated with RK4 in the conformal metric's arc length and stopped at
    ``cap``.
    """
    if samples < 64:
        raise ValueError("need at least 64 samples")
    pts, nrm, _ = _boundary_samples(domain, w, samples)
    result = shoot_normals(domain, w, pts, nrm, step, cap, sides)
    reach = float(result.min())
    return (reach, result) if return_all else reach


@dataclass
class BgRow:
    n: int
    sup_kappa: list
    width_sup: float
    reach_min: float
    flags: list = field(default_factory=list)


@dataclass
class BgReport:
    rows: list

    def uniformity(self):
        """max/min across rows for each metric."""
        out = {}
        ks = len(self.rows[0].sup_kappa)
        for k in range(ks):
            col = np.array([r.sup_kappa[k] for r in self.rows])
            out[f"sup_kappa_{k}"] = float(col.max() / col.min()) if col.min() > 0 else math.inf
        for name in ("width_sup", "reach_min"):
            col = np.array([getattr(r, name) for r in self.rows])
            out[name] = float(col.max() / col.min()) if col.min() > 0 else math.inf
        return out

    @property
    def clean(self):
        return all(not r.flags for r in self.rows)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["n", "k", "sup_kappa_k", "width_sup", "reach_min", "flags"])
            for r in self.rows:
                for k, s in enumerate(r.sup_kappa):
                    wr.writerow([r.n, k, repr(float(s)), repr(float(r.width_sup)), repr(float(r.reach_min)), ";".join(r.flags)])

    @classmethod
    def from_csv(cls, path):
        rows = {}
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                n = int(rec["n"])
                if n not in rows:
                    flags = [f for f in rec["flags"].split(";") if f]
                    rows[n] = BgRow(n, [], float(rec["width_sup"]), float(rec["reach_min"]), flags)
                rows[n].sup_kappa.append(float(rec["sup_kappa_k"]))
        return cls([rows[n] for n in rows])


def bg_report(polygon, params, n_list, k_max=4, resolution=0.1, beta=0.3, samples=64, profile_samples=128):
    """Per-n curvature suprema, finite width and normal reach."""
    rows = []
    for n in n_list:
        domain = construct_rounded_domain(polygon, params.at(n))
        w = WeightFunction.for_domain(domain)
        prof = curvature_profile(domain, w, k=k_max, samples_per_piece=profile_samples)
        sup = [float(v) for v in prof.sup()]
        width = finite_width_estimate(domain, w, resolution=resolution, beta=beta).sup
        reach = normal_reach_estimate(domain, w, samples=samples)
        flags = []
        if not all(math.isfinite(v) for v in sup + [width, reach]):
            flags.append("nonfinite")
        if reach <= 0:
            flags.append("reach")
        rows.append(BgRow(int(n), sup, width, reach, flags))
    return BgReport(rows)
