"""Corner-graded triangulations of rounded domains.

Boundary samples are placed on the exact curves.  Interior refinement is
delegated to Shewchuk's Triangle (quality constrained Delaunay refinement);
any Steiner point it puts on a boundary chord is moved onto the true curve and
the domain is re-triangulated, so every boundary node lies on the boundary.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import triangle as _triangle

from .errors import EncroachmentLoop, RefinementStalled

__all__ = [
    "SizingField",
    "BoundaryPolyline",
    "Mesh",
    "discretize_boundary",
    "triangulate",
    "mesh_domain",
    "mesh_quality",
    "read_mesh",
    "write_mesh",
]

_MIN_ANGLE = 20.0
_AREA_FACTOR = 0.8 * math.sqrt(3.0) / 4.0  # target area for local size h
_ARC_TURN = math.pi / 16  # max tangent turn per boundary chord on arcs


@dataclass(frozen=True, eq=False)
class SizingField:
    """h(x) = clamp(h_min, beta * r(x) * (r(x)/r_far)^(grade-1), h_max).

    Without a weight the size is uniform ``h_max``.
    """

    h_max: float
    h_min: float = 0.0
    beta: float = 0.5
    weight: object = None
    grade: float = 1.0

    def __post_init__(self):
        if not (self.h_max > 0 and 0 <= self.h_min <= self.h_max):
            raise ValueError("need 0 <= h_min <= h_max and h_max > 0")
        if self.beta <= 0:
            raise ValueError("beta must be positive")

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.weight is None:
            return np.full(len(x), self.h_max)
        r = self.weight(x)
        if self.grade != 1.0:
            far = getattr(getattr(self.weight, "eta", None), "R", 6.0) / 6.0
            r = r * (r / far) ** (self.grade - 1.0)
        return np.clip(self.beta * r, max(self.h_min, 1e-300), self.h_max)


@dataclass(frozen=True, eq=False)
class BoundaryPolyline:
    """Closed boundary samples: point k lies on piece ``piece_id[k]`` at parameter ``t[k]``."""

    points: np.ndarray
    piece_id: np.ndarray
    t: np.ndarray
    domain: object

    def __len__(self):
        return len(self.points)

    def length(self):
        return float(np.linalg.norm(np.roll(self.points, -1, axis=0) - self.points, axis=1).sum())

    def chord_end(self, k):
        """(piece, t) of the far end of chord k measured on chord k's own piece."""
        k1 = (k + 1) % len(self)
        if self.piece_id[k1] != self.piece_id[k]:
            return int(self.piece_id[k]), 1.0
        return int(self.piece_id[k]), float(self.t[k1])

    def insert(self, items):
        """New polyline with extra (piece, t) samples."""
        pid = np.concatenate([self.piece_id, [p for p, _ in items]])
        t = np.concatenate([self.t, [s for _, s in items]])
        order = np.lexsort((t, pid))
        pid, t = pid[order], t[order]
        keep = np.ones(len(t), dtype=bool)
        keep[1:] = (pid[1:] != pid[:-1]) | (np.diff(t) > 1e-14)
        pid, t = pid[keep], t[keep]
        pts = _points_on(self.domain, pid, t)
        return BoundaryPolyline(pts, pid, t, self.domain)


def _points_on(domain, pid, t):
    out = np.empty((len(t), 2))
    for k in np.unique(pid):
        m = pid == k
        out[m] = domain.pieces[k].point(t[m])
    return out


def _piece_samples(piece, sizing, fine=512):
    """Parameters equidistributing int ds / h(x) on one piece (start included, end excluded)."""
    u = np.linspace(0.0, 1.0, fine + 1)
    mid = 0.5 * (u[1:] + u[:-1])
    h = sizing(piece.point(mid))
    dens = piece.length / fine / h
    if piece.kind != "segment":
        # also resolve the tangent turn
        dens = np.maximum(dens, np.abs(np.diff(piece.tangent_angle(u))) / _ARC_TURN)
    cum = np.concatenate([[0.0], np.cumsum(dens)])
    m = max(1, math.ceil(cum[-1] - 1e-9))
    targets = np.linspace(0.0, cum[-1], m + 1)[:-1]
    return np.interp(targets, cum, u)


def discretize_boundary(domain, sizing):
    """Sample every piece with local spacing at most h(x), arcs also by turning angle."""
    pids, ts = [], []
    for k, piece in enumerate(domain.pieces):
        t = _piece_samples(piece, sizing)
        pids.append(np.full(len(t), k))
        ts.append(t)
    pid = np.concatenate(pids)
    t = np.concatenate(ts)
    return BoundaryPolyline(_points_on(domain, pid, t), pid, t, domain)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangulation; P2 elements store midpoints as columns 3..5 (edges 01, 12, 20)."""

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_piece: np.ndarray
    boundary_nodes: np.ndarray
    order: int = 1
    domain: object = None
    boundary_param: dict = field(default_factory=dict)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_elements(self):
        return len(self.triangles)

    @property
    def vertices(self):
        return self.triangles[:, :3]

    @property
    def n_vertex_nodes(self):
        return int(self.vertices.max()) + 1

    def areas(self):
        p = self.nodes[self.vertices]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edges(self):
        """Unique vertex edges (sorted pairs)."""
        T = self.vertices
        e = np.sort(np.concatenate([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]]), axis=1)
        return np.unique(e, axis=0)

    def to_p2(self):
        """Quadratic mesh: edge midpoints, boundary ones moved onto the curve."""
        if self.order == 2:
            return self
        T = self.vertices
        nv = len(self.nodes)
        local = np.concatenate([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]])
        key = np.sort(local, axis=1)
        uniq, inv = np.unique(key, axis=0, return_inverse=True)
        inv = inv.ravel()
        mids = 0.5 * (self.nodes[uniq[:, 0]] + self.nodes[uniq[:, 1]])
        bmask = np.zeros(len(uniq), dtype=bool)
        params = dict(self.boundary_param)
        if self.domain is not None and len(self.boundary_edges):
            bkey = np.sort(self.boundary_edges, axis=1)
            lookup = {tuple(e): i for i, e in enumerate(uniq)}
            for (a, b), pid in zip(bkey, self.boundary_piece):
                i = lookup[(a, b)]
                bmask[i] = True
                pa, ta = self.boundary_param[int(a)]
                pb, tb = self.boundary_param[int(b)]
                # an endpoint on the following piece sits at the end of this one
                ta = ta if pa == pid else 1.0
                tb = tb if pb == pid else 1.0
                tm = 0.5 * (ta + tb)
                mids[i] = self.domain.pieces[int(pid)].point(tm)
                params[nv + i] = (int(pid), tm)
        nt = len(T)
        mid_idx = nv + inv.reshape(3, nt).T
        nodes = np.vstack([self.nodes, mids])
        bnodes = np.concatenate([self.boundary_nodes, nv + np.nonzero(bmask)[0]])
        return Mesh(
            nodes=nodes,
            triangles=np.hstack([T, mid_idx]),
            boundary_edges=self.boundary_edges,
            boundary_piece=self.boundary_piece,
            boundary_nodes=np.sort(bnodes),
            order=2,
            domain=self.domain,
            boundary_param=params,
        )


def _triangle_angles(P):
    """Interior angles (degrees) of triangles P (M, 3, 2)."""
    out = np.empty(P.shape[:2])
    for i in range(3):
        a = P[:, (i + 1) % 3] - P[:, i]
        b = P[:, (i + 2) % 3] - P[:, i]
        cos = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        out[:, i] = np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))
    return out


def _refine(tri, sizing, rounds):
    for _ in range(rounds):
        P = tri["vertices"][tri["triangles"]]
        c = P.mean(axis=1)
        d1 = P[:, 1] - P[:, 0]
        d2 = P[:, 2] - P[:, 0]
        area = 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        target = _AREA_FACTOR * sizing(c) ** 2
        big = area > target
        if not np.any(big):
            return tri
        limits = np.where(big, target, -1.0)
        tri = _triangle.triangulate(
            dict(
                vertices=tri["vertices"],
                vertex_markers=tri["vertex_markers"],
                triangles=tri["triangles"],
                segments=tri["segments"],
                segment_markers=tri["segment_markers"],
                triangle_max_area=limits,
            ),
            f"rpq{_MIN_ANGLE}aQ",
        )
    raise RefinementStalled(f"size targets not met after {rounds} refinement rounds")


def triangulate(polyline, sizing, order=1, max_rounds=60, max_snaps=30):
    """Quality triangulation of the region bounded by ``polyline``."""
    domain = polyline.domain
    for _ in range(max_snaps):
        M = len(polyline)
        seg = np.stack([np.arange(M), (np.arange(M) + 1) % M], axis=1)
        tri = _triangle.triangulate(
            dict(vertices=polyline.points, segments=seg, segment_markers=(np.arange(M) + 2)[:, None]),
            f"pq{_MIN_ANGLE}Q",
        )
        tri = _refine(tri, sizing, max_rounds)
        marks = tri["vertex_markers"].ravel()
        new = np.nonzero((np.arange(len(marks)) >= M) & (marks >= 2))[0]
        if len(new) == 0:
            break
        items = []
        for v in new:
            k = int(marks[v]) - 2
            a = polyline.points[k]
            b = polyline.points[(k + 1) % M]
            lam = float(np.clip(np.dot(tri["vertices"][v] - a, b - a) / np.dot(b - a, b - a), 0.0, 1.0))
            pid, t_end = polyline.chord_end(k)
            items.append((pid, polyline.t[k] + lam * (t_end - polyline.t[k])))
        polyline = polyline.insert(items)
    else:
        raise EncroachmentLoop("boundary Steiner points kept appearing")

    nodes = tri["vertices"]
    T = tri["triangles"].astype(np.int64)
    M = len(polyline)
    # input vertices keep their indices
    if not np.allclose(nodes[:M], polyline.points, rtol=0, atol=0):
        nodes[:M] = polyline.points
    edges = np.stack([np.arange(M), (np.arange(M) + 1) % M], axis=1)
    params = {k: (int(polyline.piece_id[k]), float(polyline.t[k])) for k in range(M)}
    P = nodes[T]
    d1 = P[:, 1] - P[:, 0]
    d2 = P[:, 2] - P[:, 0]
    neg = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] < 0
    T[neg] = T[neg][:, [0, 2, 1]]
    mesh = Mesh(
        nodes=nodes,
        triangles=T,
        boundary_edges=edges,
        boundary_piece=polyline.piece_id.copy(),
        boundary_nodes=np.arange(M),
        order=1,
        domain=domain,
        boundary_param=params,
    )
    return mesh.to_p2() if order == 2 else mesh


def mesh_domain(domain, sizing, order=1):
    """discretize_boundary followed by triangulate."""
    return triangulate(discretize_boundary(domain, sizing), sizing, order=order)


def mesh_quality(mesh):
    """Summary statistics of a mesh's vertex triangles."""
    P = mesh.nodes[mesh.vertices]
    ang = _triangle_angles(P)
    e = np.stack([np.linalg.norm(P[:, (i + 1) % 3] - P[:, i], axis=1) for i in range(3)], axis=1)
    area = np.abs(mesh.areas())
    longest = e.max(axis=1)
    min_alt = 2 * area / longest
    counts, bins = np.histogram(longest, bins=10)
    return {
        "min_angle": float(ang.min()),
        "max_angle": float(ang.max()),
        "max_aspect": float((longest / min_alt).max()),
        "n_nodes": int(mesh.n_nodes),
        "n_elements": int(mesh.n_elements),
        "h_max": float(longest.max()),
        "h_min": float(longest.min()),
        "h_hist": (counts, bins),
    }


def write_mesh(mesh, path):
    """Text format: header ``N_nodes N_tris order``, node lines ``x y marker``, element lines."""
    marker = np.zeros(mesh.n_nodes, dtype=int)
    marker[mesh.boundary_nodes] = 1
    lines = [f"{mesh.n_nodes} {mesh.n_elements} {mesh.order}"]
    lines += [f"{x:.17g} {y:.17g} {m}" for (x, y), m in zip(mesh.nodes, marker)]
    lines += [" ".join(str(int(i)) for i in tri) for tri in mesh.triangles]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path):
    """Inverse of :func:`write_mesh`; boundary edges are recovered from the topology."""
    rows = Path(path).read_text().split("\n")
    nn, nt, order = (int(v) for v in rows[0].split())
    node_rows = np.array([r.split() for r in rows[1 : 1 + nn]], dtype=float)
    tris = np.array([r.split() for r in rows[1 + nn : 1 + nn + nt]], dtype=np.int64)
    nodes = node_rows[:, :2]
    marker = node_rows[:, 2].astype(int)
    T = tris[:, :3]
    e = np.sort(np.concatenate([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]]), axis=1)
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    bedges = uniq[counts == 1]
    return Mesh(
        nodes=nodes,
        triangles=tris,
        boundary_edges=bedges,
        boundary_piece=np.full(len(bedges), -1),
        boundary_nodes=np.nonzero(marker == 1)[0],
        order=order,
    )
