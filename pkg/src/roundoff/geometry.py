"""Straight polygons and their families of rounded smooth domains.

A :class:`Polygon` is validated once and then rounded at every corner.  The
rounding for index ``n`` is the homothetic image (center ``p_j``, ratio
``1/n``) of the ``n = 1`` construction near each vertex, so every member of the
family shares one set of arc templates.

Boundary pieces (:class:`Segment`, :class:`SmoothArc`) share a small interface:
``point(t)``, ``velocity(t)``, ``tangent_angle(t)``, ``theta_jet(t0, K)``,
``start``, ``end`` and ``length``, with ``t`` in ``[0, 1]``.
"""

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from . import _jets as J
from ._smooth import smoothstep, smoothstep_jet
from .errors import (
    ContainmentViolated,
    DegenerateAngle,
    DuplicateVertex,
    Infeasible,
    NoFeasibleRhoPrime,
    NonSimple,
    SelfIntersection,
    SeparationViolated,
    ShootingDiverged,
)

__all__ = [
    "Polygon",
    "RoundingParams",
    "Segment",
    "SmoothArc",
    "RoundedDomain",
    "CurveDomain",
    "PRESETS",
    "preset",
    "polygon_from_json",
    "polygon_validate",
    "exterior_bisectrix",
    "rounding_centers",
    "junction_points",
    "junction_curve",
    "construct_rounded_domain",
    "select_default_params",
    "homothety",
    "points_in_polygon",
    "boundary_svg_path",
    "write_svg",
    "write_polyline",
]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)
_ARC_PANELS = 32
_MIN_ARC_SAMPLES = 256


# ---------------------------------------------------------------------------
# planar helpers


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _point_segment_distance(P, A, B):
    """Distances (M, E) from points P to segments [A_e, B_e], and foot params."""
    P = np.atleast_2d(P)[:, None, :]
    d = B - A
    dd = np.einsum("ij,ij->i", d, d)
    t = np.einsum("mij,ij->mi", P - A, d) / np.where(dd > 0, dd, 1.0)
    tc = np.clip(t, 0.0, 1.0)
    foot = A + tc[..., None] * d
    return np.linalg.norm(P - foot, axis=-1), t


def points_in_polygon(P, V):
    """Crossing-number test of points P (M, 2) against closed polygon V (E, 2)."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    V = np.asarray(V, dtype=float)
    xi, yi = V[:, 0], V[:, 1]
    xj, yj = np.roll(xi, -1), np.roll(yi, -1)
    inside = np.zeros(len(P), dtype=bool)
    chunk = max(1, 2_000_000 // max(len(V), 1))
    for s in range(0, len(P), chunk):
        px = P[s : s + chunk, 0:1]
        py = P[s : s + chunk, 1:2]
        cond = (yi > py) != (yj > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = xi + (py - yi) * (xj - xi) / (yj - yi)
        crossings = np.count_nonzero(cond & (px < xint), axis=1)
        inside[s : s + chunk] = crossings % 2 == 1
    return inside


def _segments_intersect(p1, p2, q1, q2, eps=0.0):
    """Closed-segment intersection test (scalar)."""

    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    def on_seg(a, b, c):
        return (
            min(a[0], b[0]) - eps <= c[0] <= max(a[0], b[0]) + eps
            and min(a[1], b[1]) - eps <= c[1] <= max(a[1], b[1]) + eps
        )

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    if ((d1 > eps and d2 < -eps) or (d1 < -eps and d2 > eps)) and (
        (d3 > eps and d4 < -eps) or (d3 < -eps and d4 > eps)
    ):
        return True
    if abs(d1) <= eps and on_seg(q1, q2, p1):
        return True
    if abs(d2) <= eps and on_seg(q1, q2, p2):
        return True
    if abs(d3) <= eps and on_seg(p1, p2, q1):
        return True
    if abs(d4) <= eps and on_seg(p1, p2, q2):
        return True
    return False


def _segment_segment_distance(p1, p2, q1, q2):
    if _segments_intersect(p1, p2, q1, q2):
        return 0.0
    d1, _ = _point_segment_distance(np.array([p1, p2]), q1[None], q2[None])
    d2, _ = _point_segment_distance(np.array([q1, q2]), p1[None], p2[None])
    return float(min(d1.min(), d2.min()))


def _polyline_self_intersects(P):
    """True when the closed polyline P (M, 2) has two non-adjacent crossing edges."""
    A = P
    B = np.roll(P, -1, axis=0)
    M = len(P)
    lo = np.minimum(A, B)
    hi = np.maximum(A, B)
    for i in range(M):
        # bounding-box prefilter, then exact orientation tests
        cand = np.nonzero(
            (lo[:, 0] <= hi[i, 0]) & (hi[:, 0] >= lo[i, 0]) & (lo[:, 1] <= hi[i, 1]) & (hi[:, 1] >= lo[i, 1])
        )[0]
        for k in cand:
            if k <= i or k == (i + 1) % M or (k + 1) % M == i:
                continue
            if _segments_intersect(A[i], B[i], A[k], B[k]):
                return True
    return False


def homothety(center, ratio, x):
    """Image of ``x`` under the homothety ``q -> center + ratio (q - center)``."""
    if ratio <= 0:
        raise ValueError("homothety ratio must be positive")
    center = np.asarray(center, dtype=float)
    return center + ratio * (np.asarray(x, dtype=float) - center)


# ---------------------------------------------------------------------------
# boundary pieces


@dataclass(frozen=True, eq=False)
class Segment:
    """Straight boundary piece from ``start`` to ``end``."""

    start: np.ndarray
    end: np.ndarray
    kind = "segment"

    @property
    def length(self):
        return float(np.linalg.norm(self.end - self.start))

    @property
    def direction(self):
        d = self.end - self.start
        return d / np.linalg.norm(d)

    def point(self, t):
        t = np.asarray(t, dtype=float)
        return self.start + t[..., None] * (self.end - self.start)

    def velocity(self, t):
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(self.end - self.start, t.shape + (2,)).copy()

    def tangent_angle(self, t):
        d = self.end - self.start
        return np.full(np.shape(t), math.atan2(d[1], d[0]))

    def theta_jet(self, t0, K):
        t0 = np.asarray(t0, dtype=float)
        return J.constant(self.tangent_angle(t0), K)

    def scaled(self, center, ratio):
        return Segment(homothety(center, ratio, self.start), homothety(center, ratio, self.end))


@dataclass(frozen=True, eq=False)
class SmoothArc:
    """C-infinity arc whose tangent angle ramps by a smoothstep.

    The tangent angle as a function of the normalized parameter ``u`` is
    ``theta0 + dtheta * S(u**exp(shape))``.  The arc is stored as an ``n = 1``
    template (start ``q``, length ``template_length``) together with a
    homothety (``center``, ``ratio``) that is applied on evaluation.
    """

    q: np.ndarray
    template_length: float
    theta0: float
    dtheta: float
    shape: float = 0.0
    center: np.ndarray = field(default_factory=lambda: np.zeros(2))
    ratio: float = 1.0
    kind = "arc"
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        edges = np.linspace(0.0, 1.0, _ARC_PANELS + 1)
        cum = np.zeros(_ARC_PANELS + 1, dtype=complex)
        for k in range(_ARC_PANELS):
            cum[k + 1] = cum[k] + self._panel(edges[k], edges[k + 1])
        object.__setattr__(self, "_cum", cum)

    # template quantities
    def _theta_u(self, u):
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        return self.theta0 + self.dtheta * smoothstep(u ** math.exp(self.shape))

    def _panel(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        half = 0.5 * (b - a)
        mid = 0.5 * (b + a)
        x = mid[..., None] + half[..., None] * _GL_NODES
        return half * (np.exp(1j * self._theta_u(x)) @ _GL_WEIGHTS)

    def _offset(self, u):
        """Complex integral of exp(i theta) over [0, u]."""
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        k = np.minimum((u * _ARC_PANELS).astype(int), _ARC_PANELS - 1)
        a = k / _ARC_PANELS
        return self._cum[k] + self._panel(a, u)

    def _template_point(self, t):
        z = self.template_length * self._offset(t)
        return self.q + np.stack([z.real, z.imag], axis=-1)

    # public interface
    @property
    def length(self):
        return self.ratio * self.template_length

    @property
    def start(self):
        return homothety(self.center, self.ratio, self.q)

    @property
    def end(self):
        return self.point(1.0)

    def point(self, t):
        return homothety(self.center, self.ratio, self._template_point(t))

    def tangent_angle(self, t):
        return self._theta_u(t)

    def velocity(self, t):
        th = self._theta_u(t)
        return self.length * np.stack([np.cos(th), np.sin(th)], axis=-1)

    def curvature(self, t):
        """Signed Euclidean curvature d(theta)/ds (positive for left turns)."""
        jet = self.theta_jet(np.asarray(t, dtype=float), 1)
        return jet[1] / self.length

    def theta_jet(self, t0, K):
        """Taylor coefficients of the tangent angle in the normalized parameter."""
        t0 = np.asarray(t0, dtype=float)
        gamma = math.exp(self.shape)
        inner = (t0 > 0.0) & (t0 < 1.0)
        u0 = np.where(inner, t0, 0.5)
        u = J.variable(u0, K)
        v = u if gamma == 1.0 else J.jpow(u, gamma)
        s = J.compose(smoothstep_jet(v[0], K), v)
        jet = self.dtheta * s
        jet[0] += self.theta0
        const = J.constant(self._theta_u(t0), K)
        return np.where(inner, jet, const)

    def scaled(self, center, ratio):
        """Homothetic image; composes with any homothety already applied."""
        center = np.asarray(center, dtype=float)
        if self.ratio != 1.0 and not np.array_equal(center, self.center):
            raise ValueError("nested homotheties must share a center")
        return replace(self, center=center, ratio=self.ratio * ratio)


# ---------------------------------------------------------------------------
# polygons


@dataclass(frozen=True, eq=False)
class Polygon:
    """Validated straight polygon, counterclockwise."""

    vertices: np.ndarray
    angles: np.ndarray
    R0: float

    @property
    def N(self):
        return len(self.vertices)

    @property
    def R(self):
        return 0.5 * self.R0

    @property
    def alpha_max(self):
        return float(self.angles.max())

    @property
    def alpha_min(self):
        return float(self.angles.min())

    @property
    def punctures(self):
        return self.vertices

    @property
    def n(self):
        return math.inf

    @property
    def pieces(self):
        V = self.vertices
        return tuple(Segment(V[j], V[(j + 1) % self.N]) for j in range(self.N))

    def edge(self, j):
        return self.vertices[j % self.N], self.vertices[(j + 1) % self.N]

    def area(self):
        x, y = self.vertices.T
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def contains(self, points):
        return points_in_polygon(points, self.vertices)

    def distance(self, points):
        """Euclidean distance to the closed polygon (zero inside)."""
        P = np.atleast_2d(np.asarray(points, dtype=float))
        A = self.vertices
        B = np.roll(A, -1, axis=0)
        d, _ = _point_segment_distance(P, A, B)
        return np.where(self.contains(P), 0.0, d.min(axis=1))

    def boundary_polygon(self):
        return self.vertices


def polygon_validate(vertices):
    """Check a vertex list and return a counterclockwise :class:`Polygon`."""
    V = np.asarray(vertices, dtype=float)
    if V.ndim != 2 or V.shape[1] != 2 or len(V) < 3:
        raise ValueError("need at least 3 vertices given as (x, y) pairs")
    if not np.all(np.isfinite(V)):
        raise ValueError("vertex coordinates must be finite")
    N = len(V)
    scale = float(np.ptp(V, axis=0).max())
    diff = np.linalg.norm(V[:, None, :] - V[None, :, :], axis=-1)
    diff[np.diag_indices(N)] = np.inf
    if diff.min() <= 1e-14 * scale:
        raise DuplicateVertex("two vertices coincide")
    x, y = V.T
    signed = 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
    if signed == 0.0:
        raise NonSimple("polygon has zero area")
    if signed < 0:
        V = V[::-1].copy()

    a_in = V - np.roll(V, 1, axis=0)  # p_j - p_{j-1}
    b_out = np.roll(V, -1, axis=0) - V  # p_{j+1} - p_j
    # interior angle sweeps counterclockwise from the outgoing edge to the reversed incoming one
    back = -a_in
    angles = np.mod(np.arctan2(_cross(b_out, back), np.einsum("ij,ij->i", b_out, back)), 2 * np.pi)
    tol = 1e-12
    if np.any(angles <= tol) or np.any(angles >= 2 * np.pi - tol):
        raise DegenerateAngle("interior angle is 0 or 2*pi")

    R0 = math.inf
    for i in range(N):
        for k in range(i + 1, N):
            adjacent = k == i + 1 or (i == 0 and k == N - 1)
            p1, p2 = V[i], V[(i + 1) % N]
            q1, q2 = V[k], V[(k + 1) % N]
            if adjacent:
                continue
            d = _segment_segment_distance(p1, p2, q1, q2)
            if d <= 1e-14 * scale:
                raise NonSimple(f"edges {i} and {k} intersect")
            R0 = min(R0, d)
    if N == 3:
        # no pair of disjoint edges: use the smallest height instead
        for j in range(3):
            d, _ = _point_segment_distance(V[j : j + 1], V[(j + 1) % 3][None], V[(j + 2) % 3][None])
            R0 = min(R0, float(d[0, 0]))
    return Polygon(vertices=V, angles=angles, R0=float(R0))


PRESETS = {
    "square": [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)],
    "lshape": [(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, 1.0), (1.0, 2.0), (0.0, 2.0)],
    "star5": [
        (
            (1.0 if k % 2 == 0 else 0.5) * math.cos(math.pi / 2 + k * math.pi / 5),
            (1.0 if k % 2 == 0 else 0.5) * math.sin(math.pi / 2 + k * math.pi / 5),
        )
        for k in range(10)
    ],
}


def preset(name):
    """Polygon preset by name: ``square``, ``lshape`` or ``star5``."""
    try:
        return polygon_validate(PRESETS[name])
    except KeyError:
        raise ValueError(f"unknown polygon preset {name!r}; choose from {sorted(PRESETS)}") from None


def polygon_from_json(source):
    """Polygon from a JSON array of ``[x, y]`` pairs (text or file path)."""
    text = str(source)
    if not text.lstrip().startswith("["):
        text = Path(source).read_text()
    return polygon_validate(json.loads(text))


# ---------------------------------------------------------------------------
# rounding construction


@dataclass(frozen=True)
class RoundingParams:
    rho: float
    rho_prime: float
    n: int = 1

    def validate(self, polygon):
        if not 0.0 < self.rho < 0.5 * polygon.R0:
            raise ValueError(f"rho={self.rho} must lie in (0, R0/2) with R0={polygon.R0}")
        if not 0.0 < self.rho_prime <= 0.25 * self.rho:
            raise ValueError("rho_prime must lie in (0, rho/4]")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")

    def at(self, n):
        return replace(self, n=int(n))


def exterior_bisectrix(polygon, j):
    """Unit direction bisecting the exterior angle at vertex ``j``."""
    if not -polygon.N <= j < polygon.N:
        raise IndexError(j)
    j %= polygon.N
    p = polygon.vertices[j]
    nxt = polygon.vertices[(j + 1) % polygon.N]
    b = (nxt - p) / np.linalg.norm(nxt - p)
    half = 0.5 * polygon.angles[j]
    c, s = math.cos(half), math.sin(half)
    interior = np.array([c * b[0] - s * b[1], s * b[0] + c * b[1]])
    return -interior


def rounding_centers(polygon, params):
    """Puncture set V_n: p_jn = p_j + rho/(2n) * bisectrix_j."""
    params.validate(polygon)
    P = np.array(
        [polygon.vertices[j] + params.rho / (2 * params.n) * exterior_bisectrix(polygon, j) for j in range(polygon.N)]
    )
    if polygon.N > 1:
        D = np.linalg.norm(P[:, None] - P[None], axis=-1)
        D[np.diag_indices(polygon.N)] = np.inf
        if D.min() < polygon.R:
            raise SeparationViolated(f"punctures {D.min():.3g} apart, need >= R={polygon.R:.3g}")
    return P


def _circle_point(center, radius, b, phi):
    bp = np.array([-b[1], b[0]])
    phi = np.asarray(phi, dtype=float)
    return center + radius * (np.cos(phi)[..., None] * b + np.sin(phi)[..., None] * bp)


def junction_points(polygon, params, j):
    """The two points of the circle about p_jn at distance rho'/n from the polygon.

    Returns ``(q, q_prime)`` with ``q`` on the side of the bisectrix holding the
    previous vertex.
    """
    params.validate(polygon)
    N = polygon.N
    j %= N
    n = params.n
    p = polygon.vertices[j]
    b = exterior_bisectrix(polygon, j)
    radius = params.rho / (2 * n)
    center = p + radius * b
    target = params.rho_prime / n

    def g(phi):
        return polygon.distance(_circle_point(center, radius, b, phi)) - target

    prev_side = math.copysign(1.0, float(_cross(b, polygon.vertices[(j - 1) % N] - p)))
    found = {}
    for side in (1.0, -1.0):
        grid = side * np.linspace(1e-9, np.pi - 1e-9, 4097)
        vals = g(grid)
        flips = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
        exact = np.nonzero(vals == 0.0)[0]
        if len(flips) + len(exact) != 1:
            raise Infeasible(f"vertex {j}: {len(flips) + len(exact)} junction candidates on one side, need 1")
        if len(exact):
            phi = grid[exact[0]]
        else:
            i = flips[0]
            phi = brentq(lambda t: float(g(np.array([t]))[0]), grid[i], grid[i + 1], xtol=1e-16, rtol=1e-15)
        found[side] = _circle_point(center, radius, b, phi)

    q = found[prev_side]
    qp = found[-prev_side]
    # the nearest point of the polygon must be an interior foot on the adjacent edge
    A = polygon.vertices
    B = np.roll(A, -1, axis=0)
    for point, edge in ((q, (j - 1) % N), (qp, j)):
        d, t = _point_segment_distance(point, A, B)
        k = int(np.argmin(d[0]))
        if not (0.0 < t[0, edge] < 1.0) or d[0, edge] > d[0, k] * (1 + 1e-9):
            raise Infeasible(f"vertex {j}: nearest polygon point is not a foot on edge {edge}")
    return q, qp


def _edge_angle(polygon, j):
    a, b = polygon.edge(j)
    return math.atan2(b[1] - a[1], b[0] - a[0])


def _shoot_arc(q, qp, theta0, dtheta, max_iter=100):
    chord = complex(*(qp - q))

    def integral(shape):
        arc = SmoothArc(q=q, template_length=1.0, theta0=theta0, dtheta=dtheta, shape=shape)
        return complex(arc._cum[-1]), arc

    def miss(shape):
        total, _ = integral(shape)
        return math.remainder(np.angle(total / chord), 2 * np.pi)

    s0, s1 = 0.0, 0.05
    h0 = miss(s0)
    if abs(h0) > 1e-15:
        h1 = miss(s1)
        for _ in range(max_iter):
            if h1 == h0:
                break
            s0, s1, h0 = s1, s1 - h1 * (s1 - s0) / (h1 - h0), h1
            h1 = miss(s1)
            if abs(h1) < 1e-15 or not math.isfinite(s1):
                break
        else:
            raise ShootingDiverged("secant iteration on the arc shape did not converge")
        if not math.isfinite(s1) or abs(h1) > 1e-12:
            raise ShootingDiverged("secant iteration on the arc shape did not converge")
        s0 = s1
    total, _ = integral(s0)
    length = abs(chord) / abs(total)
    return SmoothArc(q=q, template_length=length, theta0=theta0, dtheta=dtheta, shape=s0)


def _arc_template(polygon, params, j):
    base = params.at(1)
    q, qp = junction_points(polygon, base, j)
    theta0 = _edge_angle(polygon, j - 1)
    dtheta = math.pi - float(polygon.angles[j % polygon.N])
    arc = _shoot_arc(q, qp, theta0, dtheta)
    if np.linalg.norm(arc.end - qp) > 1e-12 * max(arc.length, 1e-300):
        raise ShootingDiverged("arc endpoint misses the junction point")
    return arc


def _check_arc(polygon, params, j, arc):
    n = params.n
    p = polygon.vertices[j % polygon.N]
    radius = params.rho / (2 * n)
    center = p + radius * exterior_bisectrix(polygon, j)
    t = np.linspace(0.0, 1.0, _MIN_ARC_SAMPLES + 1)
    pts = arc.point(t)
    dist = np.linalg.norm(pts - center, axis=1)
    if np.any(dist > radius * (1 + 1e-10)) or np.any(dist[1:-1] >= radius):
        raise ContainmentViolated(f"arc at vertex {j} leaves its ball")
    # close the arc with the far side of the circle and test both centers
    a0 = math.atan2(*(pts[-1] - center)[::-1])
    a1 = math.atan2(*(pts[0] - center)[::-1])
    ap = math.atan2(*(p - center)[::-1])
    sweep = np.mod(a1 - a0, 2 * np.pi)
    if np.mod(ap - a0, 2 * np.pi) < sweep:
        sweep -= 2 * np.pi
    ang = a0 + np.linspace(0.0, sweep, _MIN_ARC_SAMPLES)[1:-1]
    far = center + radius * np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    loop = np.vstack([pts, far])
    inside = points_in_polygon(np.array([center, p]), loop)
    if not inside[0] or inside[1]:
        raise SeparationViolated(f"arc at vertex {j} does not separate p_j from its puncture")


def junction_curve(polygon, params, j):
    """Smooth arc c_jn joining q_jn to q'_jn (homothetic image of c_j1)."""
    params.validate(polygon)
    arc = _arc_template(polygon, params, j)
    if params.n != 1:
        arc = arc.scaled(polygon.vertices[j % polygon.N], 1.0 / params.n)
    _check_arc(polygon, params, j, arc)
    return arc


@dataclass(frozen=True, eq=False)
class RoundedDomain:
    """One family member: pieces c_1, l_1, c_2, l_2, ... and punctures V_n."""

    n: int
    pieces: tuple
    punctures: np.ndarray
    params: RoundingParams
    parent: Polygon

    @property
    def arcs(self):
        return self.pieces[0::2]

    @property
    def segments(self):
        return self.pieces[1::2]

    @property
    def R(self):
        return self.parent.R

    def sample(self, per_piece=64):
        """Boundary samples (closed, each piece's end omitted): points, piece ids, params."""
        pts, ids, ts = [], [], []
        t = np.linspace(0.0, 1.0, per_piece + 1)[:-1]
        for k, piece in enumerate(self.pieces):
            pts.append(piece.point(t))
            ids.append(np.full(len(t), k))
            ts.append(t)
        return np.vstack(pts), np.concatenate(ids), np.concatenate(ts)

    def boundary_polygon(self, per_arc=256):
        pts = []
        for piece in self.pieces:
            m = per_arc if piece.kind != "segment" else 1
            pts.append(piece.point(np.linspace(0.0, 1.0, m + 1)[:-1]))
        return np.vstack(pts)

    def contains(self, points):
        return points_in_polygon(points, self.boundary_polygon())

    def length(self):
        return sum(p.length for p in self.pieces)

    def area(self):
        """Area by Green's theorem with Gauss-Legendre on each piece."""
        total = 0.0
        edges = np.linspace(0.0, 1.0, 17)
        for piece in self.pieces:
            for a, b in zip(edges[:-1], edges[1:]):
                t = 0.5 * (a + b) + 0.5 * (b - a) * _GL_NODES
                x = piece.point(t)
                v = piece.velocity(t)
                total += 0.5 * (b - a) * float(_cross(x, v) @ _GL_WEIGHTS)
        return 0.5 * total


@dataclass(frozen=True, eq=False)
class CurveDomain:
    """Region bounded by arbitrary counterclockwise pieces (e.g. a disk), with optional punctures."""

    pieces: tuple
    R: float
    punctures: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    n: float = math.inf

    boundary_polygon = RoundedDomain.boundary_polygon
    contains = RoundedDomain.contains
    length = RoundedDomain.length
    area = RoundedDomain.area
    sample = RoundedDomain.sample


def construct_rounded_domain(polygon, params):
    """Assemble Omega_n; raises if any family invariant fails."""
    params.validate(polygon)
    N = polygon.N
    n = params.n
    punctures = rounding_centers(polygon, params)
    arcs = []
    for j in range(N):
        arc = _arc_template(polygon, params, j)
        if n != 1:
            arc = arc.scaled(polygon.vertices[j], 1.0 / n)
        _check_arc(polygon, params, j, arc)
        arcs.append(arc)
    pieces = []
    for j in range(N):
        seg = Segment(arcs[j].end, arcs[(j + 1) % N].start)
        a, b = polygon.edge(j)
        e = (b - a) / np.linalg.norm(b - a)
        if seg.length <= 0 or float(np.dot(seg.end - seg.start, e)) <= 0:
            raise Infeasible(f"segment l_{j} has non-positive length")
        if abs(float(_cross(seg.direction, e))) > 1e-9:
            raise Infeasible(f"segment l_{j} is not parallel to its edge")
        pieces += [arcs[j], seg]
    domain = RoundedDomain(n=n, pieces=tuple(pieces), punctures=punctures, params=params, parent=polygon)

    loop = domain.boundary_polygon(per_arc=64)
    if _polyline_self_intersects(loop):
        raise SelfIntersection("rounded boundary crosses itself")
    dense = domain.boundary_polygon()
    if not np.all(points_in_polygon(polygon.vertices, dense)):
        raise ContainmentViolated("rounded domain does not contain the polygon")
    if np.any(polygon.distance(dense) <= 0.0):
        raise ContainmentViolated("rounded boundary touches the polygon")
    if np.any(points_in_polygon(punctures, dense)):
        raise ContainmentViolated("a puncture lies inside the rounded domain")
    return domain


def select_default_params(polygon, rho_fraction=0.25, halvings=40):
    """rho = rho_fraction * R0; rho' halved from rho/4 until every corner is feasible."""
    rho = rho_fraction * polygon.R0
    rho_prime = rho / 4
    for _ in range(halvings + 1):
        params = RoundingParams(rho, rho_prime, 1)
        try:
            construct_rounded_domain(polygon, params)
            return params
        except (Infeasible, ContainmentViolated, SeparationViolated, SelfIntersection, ShootingDiverged):
            rho_prime /= 2
    raise NoFeasibleRhoPrime(f"no feasible rho' after {halvings} halvings")


# ---------------------------------------------------------------------------
# export


def boundary_svg_path(domain, samples_per_arc=64):
    """SVG path data; arcs as cubic Hermite pieces through exact samples."""
    parts = []
    start = domain.pieces[0].start
    parts.append(f"M {start[0]:.10g} {start[1]:.10g}")
    for piece in domain.pieces:
        if piece.kind == "segment":
            e = piece.end
            parts.append(f"L {e[0]:.10g} {e[1]:.10g}")
            continue
        t = np.linspace(0.0, 1.0, samples_per_arc + 1)
        x = piece.point(t)
        v = piece.velocity(t)
        dt = t[1] - t[0]
        for k in range(samples_per_arc):
            c1 = x[k] + v[k] * dt / 3
            c2 = x[k + 1] - v[k + 1] * dt / 3
            e = x[k + 1]
            parts.append(f"C {c1[0]:.10g} {c1[1]:.10g} {c2[0]:.10g} {c2[1]:.10g} {e[0]:.10g} {e[1]:.10g}")
    parts.append("Z")
    return " ".join(parts)


def write_svg(domains, path, stroke_width=None):
    """Write one or more domain outlines to an SVG file (y axis flipped up)."""
    if not isinstance(domains, (list, tuple)):
        domains = [domains]
    pts = np.vstack([d.boundary_polygon() for d in domains])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = 0.05 * float((hi - lo).max())
    lo, hi = lo - pad, hi + pad
    w, h = hi - lo
    sw = stroke_width or 0.003 * float(max(w, h))
    body = []
    for d in domains:
        body.append(f'<path d="{boundary_svg_path(d)}" fill="none" stroke="black" stroke-width="{sw:.6g}"/>')
        for p in np.atleast_2d(d.punctures):
            body.append(f'<circle cx="{p[0]:.10g}" cy="{p[1]:.10g}" r="{2 * sw:.6g}" fill="red"/>')
    svg = (
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{lo[0]:.10g} {-hi[1]:.10g} {w:.10g} {h:.10g}">\n'
        f'<g transform="scale(1,-1)">\n' + "\n".join(body) + "\n</g>\n</svg>\n"
    )
    Path(path).write_text(svg)
    return svg


def write_polyline(domain, path, per_piece=64):
    """Sampled boundary as text lines ``x y piece_id``."""
    pts, ids, _ = domain.sample(per_piece)
    lines = [f"{x:.17g} {y:.17g} {k}" for (x, y), k in zip(pts, ids)]
    Path(path).write_text("\n".join(lines) + "\n")
