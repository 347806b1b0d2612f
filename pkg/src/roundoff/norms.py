"""Weighted (Kondratiev) and plain Sobolev norms of finite element fields."""

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import beta as beta_fn

from . import _jets as J
from .errors import OrderUnavailable, TooManyElements
from .fem import FemSolution, RULES, _basis, quad_data
from .weights import ConstantWeight

__all__ = [
    "AnalyticField",
    "NormReport",
    "field_at_quadrature",
    "kondratiev_norm",
    "sobolev_norm",
    "shift_ratio",
    "gagliardo_seminorm",
    "ratio_report",
    "CSV_COLUMNS",
]

_ONE = ConstantWeight(1.0)


@dataclass(frozen=True)
class AnalyticField:
    """Closed-form field with value, gradient and Hessian callables of points (M, 2)."""

    value: object
    grad: object = None
    hess: object = None

    @property
    def max_order(self):
        return 2 if self.hess is not None else (1 if self.grad is not None else 0)


def field_at_quadrature(field, groups, m):
    """Values, gradients and Hessians of ``field`` at the points of each quadrature group."""
    out = []
    for g in groups:
        E, Q = g.x.shape[:2]
        if isinstance(field, FemSolution):
            c = field.values[g.dofs]  # (E, nb)
            u = c @ g.phi.T
            du = np.einsum("ei,eqik->eqk", c, g.grad) if m >= 1 else None
            hu = np.einsum("ei,eqikl->eqkl", c, g.hess) if m >= 2 else None
        else:
            x = g.x.reshape(-1, 2)
            u = np.asarray(field.value(x), dtype=float).reshape(E, Q)
            du = np.asarray(field.grad(x), dtype=float).reshape(E, Q, 2) if m >= 1 else None
            hu = np.asarray(field.hess(x), dtype=float).reshape(E, Q, 2, 2) if m >= 2 else None
        out.append((u, du, hu))
    return out


def _check_order(field, m):
    if m not in (0, 1, 2):
        raise ValueError("m must be 0, 1 or 2")
    if isinstance(field, FemSolution):
        if m == 2 and field.order < 2:
            raise OrderUnavailable("second derivatives need order-2 elements")
    elif m > field.max_order:
        raise OrderUnavailable(f"field provides derivatives up to order {field.max_order}")


def _groups_for(field, w, m, mesh, groups):
    if groups is not None:
        return groups
    if isinstance(field, FemSolution):
        return quad_data(field.mesh, field.order, w, want_hess=m >= 2)
    if mesh is None:
        raise ValueError("an analytic field needs a mesh")
    return quad_data(mesh, mesh.order, w, want_hess=False)


def _weighted_sum(vals, groups, w, m, a):
    total = 0.0
    for (u, du, hu), g in zip(vals, groups):
        r = w(g.x.reshape(-1, 2)).reshape(g.x.shape[:2])
        dens = r ** (-2.0 * a) * u**2
        if m >= 1:
            dens = dens + r ** (2.0 * (1 - a)) * (du**2).sum(axis=-1)
        if m >= 2:
            # each multi-index once: xx, xy, yy
            h2 = hu[..., 0, 0] ** 2 + hu[..., 0, 1] ** 2 + hu[..., 1, 1] ** 2
            dens = dens + r ** (2.0 * (2 - a)) * h2
        total += float((dens * g.wdet).sum())
    return total


def kondratiev_norm(field, w, m, a, mesh=None, groups=None):
    """(sum_{|alpha|<=m} int r^(2(|alpha|-a)) |d^alpha u|^2 dx)^(1/2)."""
    _check_order(field, m)
    groups = _groups_for(field, w, m, mesh, groups)
    return math.sqrt(_weighted_sum(field_at_quadrature(field, groups, m), groups, w, m, a))


def sobolev_norm(field, m, mesh=None, groups=None, weight=None):
    """Unweighted H^m norm with the same quadrature (``weight`` only picks the rule split)."""
    _check_order(field, m)
    groups = _groups_for(field, weight, m, mesh, groups)
    return math.sqrt(_weighted_sum(field_at_quadrature(field, groups, m), groups, _ONE, m, 0.0))


def _times_power(vals, groups, w, b):
    """Quadrature values of r^b u and its first two derivatives."""
    out = []
    for (u, du, hu), g in zip(vals, groups):
        shape = g.x.shape[:2]
        rj = w.jet(g.x.reshape(-1, 2), 2)
        pj = J.bcompose(J.pow_coeffs(rj[0, 0], b, 2), rj)
        p = pj[0, 0].reshape(shape)
        dp = np.stack([pj[1, 0], pj[0, 1]], axis=-1).reshape(shape + (2,))
        hp = np.stack([np.stack([2 * pj[2, 0], pj[1, 1]], -1), np.stack([pj[1, 1], 2 * pj[0, 2]], -1)], -2)
        hp = hp.reshape(shape + (2, 2))
        v = p * u
        dv = p[..., None] * du + u[..., None] * dp
        hv = (
            p[..., None, None] * hu
            + dp[..., :, None] * du[..., None, :]
            + du[..., :, None] * dp[..., None, :]
            + u[..., None, None] * hp
        )
        out.append((v, dv, hv))
    return out


def shift_ratio(field, w, b, a, m=2, groups=None):
    """||r^b u||_{K^m_{a+b}} / ||u||_{K^m_a}."""
    _check_order(field, m)
    groups = _groups_for(field, w, 2, None, groups)
    vals = field_at_quadrature(field, groups, 2)
    top = _weighted_sum(_times_power(vals, groups, w, b), groups, w, m, a + b)
    bottom = _weighted_sum(vals, groups, w, m, a)
    return math.sqrt(top / bottom)


# ---------------------------------------------------------------------------
# Gagliardo seminorm of a piecewise linear vector field


def _element_linear_fields(solution):
    """Per element: gradient field g(x) = g0 + G x (exact for P1/P2 on straight elements)."""
    mesh = solution.mesh
    T = mesh.vertices
    X = mesh.nodes[T]
    E = len(T)
    # evaluate the gradient at the three vertices and fit the linear map
    xi = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    order = solution.order
    dofs = mesh.triangles if order == 2 else T
    c = solution.values[dofs]
    _, dref, _ = _basis(order, xi)
    A = np.stack([X[:, 1] - X[:, 0], X[:, 2] - X[:, 0]], axis=-1)  # (E, 2, 2) columns
    inv = np.linalg.inv(A)
    gv = np.einsum("ei,qil,elk->eqk", c, dref, inv)  # (E, 3, 2) gradient at vertices
    # g(x) = gv0 + D (x - X0), D from the two edge differences
    dg = np.stack([gv[:, 1] - gv[:, 0], gv[:, 2] - gv[:, 0]], axis=-1)  # (E, comp, 2)
    G = np.einsum("ecl,elk->eck", dg, inv)
    g0 = gv[:, 0] - np.einsum("eck,ek->ec", G, X[:, 0])
    return X, g0, G, E


def _self_pair(X, G, s, nphi=24):
    """int_T int_T |G (x - y)|^2 / |x - y|^(2+2s) via the triangle covariogram."""
    gl, gw = np.polynomial.legendre.leggauss(nphi)
    E = len(X)
    area = 0.5 * np.abs(
        (X[:, 1, 0] - X[:, 0, 0]) * (X[:, 2, 1] - X[:, 0, 1]) - (X[:, 1, 1] - X[:, 0, 1]) * (X[:, 2, 0] - X[:, 0, 0])
    )
    A = np.stack([X[:, 1] - X[:, 0], X[:, 2] - X[:, 0]], axis=-1)
    inv = np.linalg.inv(A)  # barycentric l1, l2 linear parts are rows
    L = np.concatenate([-(inv[:, 0:1] + inv[:, 1:2]), inv[:, 0:1], inv[:, 1:2]], axis=1)  # (E, 3, 2)
    const = area * beta_fn(2 - 2 * s, 3)
    total = np.zeros(E)
    # breakpoints where some l_i(e) changes sign
    for e in range(E):
        br = []
        for i in range(3):
            a0 = math.atan2(-L[e, i, 0], L[e, i, 1])
            br += [a0 % (2 * np.pi), (a0 + np.pi) % (2 * np.pi)]
        br = np.sort(np.array(br + [0.0, 2 * np.pi]))
        acc = 0.0
        for lo, hi in zip(br[:-1], br[1:]):
            if hi - lo < 1e-15:
                continue
            phi = 0.5 * (hi + lo) + 0.5 * (hi - lo) * gl
            ev = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
            lv = ev @ L[e].T  # (n, 3)
            c = np.maximum(lv, 0.0).sum(axis=1)
            ge = ev @ G[e].T
            acc += 0.5 * (hi - lo) * float(((ge**2).sum(axis=1) * c ** (2 * s - 2)) @ gw)
        total[e] = const[e] * acc
    return total


def _antider(rho, p):
    return np.log(rho) if p == 0 else rho**p / p


def _ray_exit(x, e, tri):
    """Entry/exit distances of rays x + t e through triangle ``tri`` by half-plane clipping."""
    d1 = tri[..., 1, :] - tri[..., 0, :]
    d2 = tri[..., 2, :] - tri[..., 0, :]
    orient = np.sign(d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0])
    lo = np.zeros(np.broadcast_shapes(x.shape[:-1], e.shape[:-1], tri.shape[:-2]))
    hi = np.full(lo.shape, np.inf)
    for i in range(3):
        a = tri[..., i, :]
        d = tri[..., (i + 1) % 3, :] - a
        # outward normal of edge i
        nx = orient * d[..., 1]
        ny = -orient * d[..., 0]
        num = -(nx * (x[..., 0] - a[..., 0]) + ny * (x[..., 1] - a[..., 1]))
        den = nx * e[..., 0] + ny * e[..., 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = num / den
        hi = np.where(den > 0, np.minimum(hi, t), hi)
        lo = np.where(den < 0, np.maximum(lo, t), lo)
        hi = np.where((den == 0) & (num < 0), -np.inf, hi)
    return lo, hi


_GL16 = np.polynomial.legendre.leggauss(16)


def _near_pairs(xq, gx, tri, g0, G, s):
    """Batched over pairs p: int_tri |gx_q - g(y)|^2 |x_q - y|^-(2+2s) dy at each outer point.

    Shapes: xq (P, Q, 2), gx (P, Q, c), tri (P, 3, 2), g0 (P, c), G (P, c, 2).
    The radial integral along each ray is done in closed form.
    """
    gl, gw = _GL16
    ang = np.arctan2(tri[:, None, :, 1] - xq[..., 1:2], tri[:, None, :, 0] - xq[..., 0:1])  # (P, Q, 3)
    ref = ang[..., :1]
    rel = np.sort(np.mod(ang - ref + np.pi, 2 * np.pi) - np.pi, axis=-1)
    total = np.zeros(xq.shape[:2])
    trib = tri[:, None, None]
    for k in range(2):
        lo = ref[..., 0] + rel[..., k]
        hi = ref[..., 0] + rel[..., k + 1]
        phi = 0.5 * (hi + lo)[..., None] + 0.5 * (hi - lo)[..., None] * gl
        ev = np.stack([np.cos(phi), np.sin(phi)], axis=-1)  # (P, Q, n, 2)
        xx = np.broadcast_to(xq[:, :, None], ev.shape)
        t0, t1 = _ray_exit(xx, ev, trib)
        valid = t1 > t0
        t0 = np.where(valid, np.maximum(t0, 1e-300), 1.0)
        t1 = np.where(valid, t1, 1.0)
        A = gx[:, :, None, :] - (g0[:, None, None, :] + np.einsum("pqnk,pck->pqnc", xx, G))
        B = -np.einsum("pqnk,pck->pqnc", ev, G)
        a0 = (A**2).sum(-1)
        a1 = 2 * (A * B).sum(-1)
        a2 = (B**2).sum(-1)
        rad = (
            a0 * (_antider(t1, -2 * s) - _antider(t0, -2 * s))
            + a1 * (_antider(t1, 1 - 2 * s) - _antider(t0, 1 - 2 * s))
            + a2 * (_antider(t1, 2 - 2 * s) - _antider(t0, 2 - 2 * s))
        )
        rad = np.where(valid, rad, 0.0)
        total += 0.5 * (hi - lo) * (rad @ gw)
    return total


def _subdivided_reference(levels):
    """Degree-4 points and weights on the reference triangle split uniformly 4^levels times."""
    rule = RULES[4]
    n = 2**levels
    pts, wts = [], []
    for i in range(n):
        for j in range(n - i):
            cells = [np.array([[i, j], [i + 1, j], [i, j + 1]], dtype=float)]
            if i + j + 1 < n:
                cells.append(np.array([[i + 1, j], [i + 1, j + 1], [i, j + 1]], dtype=float))
            for v in cells:
                v = v / n
                pts.append(v[0] + rule.points @ np.stack([v[1] - v[0], v[2] - v[0]]))
                wts.append(rule.weights / n**2)
    return np.concatenate(pts), np.concatenate(wts)


def gagliardo_seminorm(solution, s, max_elements=2000, near_levels=1):
    """Gagliardo W^{s,2} seminorm of the gradient of a finite element solution.

    Uses the straight-sided element geometry.  Element pairs are split into the
    element with itself (exact covariogram formula), neighbouring pairs (exact
    radial integration from each outer point) and well separated pairs
    (tensor Gauss rules).
    """
    if not 0.05 < s < 0.95:
        raise ValueError("s must lie in (0.05, 0.95)")
    X, g0, G, E = _element_linear_fields(solution)
    if E > max_elements:
        raise TooManyElements(f"{E} elements exceed the limit {max_elements}")
    total = float(_self_pair(X, G, s).sum())

    rule = RULES[4]
    bary = np.column_stack([1 - rule.points.sum(axis=1), rule.points])
    qx = np.einsum("qi,eik->eqk", bary, X)  # (E, Q, 2)
    area = 0.5 * np.abs(np.linalg.det(np.stack([X[:, 1] - X[:, 0], X[:, 2] - X[:, 0]], axis=-1)))
    qw = 2 * area[:, None] * rule.weights[None]
    qg = g0[:, None] + np.einsum("eck,eqk->eqc", G, qx)
    cent = X.mean(axis=1)
    diam = np.linalg.norm(X - cent[:, None], axis=-1).max(axis=1)

    near_pairs = []
    for e in range(E):
        d = np.linalg.norm(cent - cent[e], axis=1)
        near = d < 1.5 * (diam + diam[e])
        near[e] = False
        far = np.nonzero(~near)[0]
        far = far[far != e]
        if len(far):
            diff = qx[e][:, None, None, :] - qx[far][None]  # (Q, F, Q, 2)
            dist2 = (diff**2).sum(-1)
            num = ((qg[e][:, None, None, :] - qg[far][None]) ** 2).sum(-1)
            total += float(np.einsum("q,fp,qfp->", qw[e], qw[far], num / dist2 ** (1 + s)))
        near_pairs += [(e, int(k)) for k in np.nonzero(near)[0]]

    if near_pairs:
        pairs = np.array(near_pairs)
        T = solution.mesh.vertices
        shared = (T[pairs[:, 0]][:, :, None] == T[pairs[:, 1]][:, None, :]).any(axis=(1, 2))
        # pairs meeting at a vertex or edge get a finer outer rule
        for sel, levels in ((shared, near_levels), (~shared, 0)):
            ref_pts, ref_w = _subdivided_reference(levels)
            chunk = max(1, 24576 // len(ref_w))
            sub = pairs[sel]
            for lo in range(0, len(sub), chunk):
                e, k = sub[lo : lo + chunk].T
                Ae = np.stack([X[e, 1] - X[e, 0], X[e, 2] - X[e, 0]], axis=-1)
                xq = X[e, 0][:, None] + np.einsum("qj,pkj->pqk", ref_pts, Ae)
                wq = ref_w * (2 * area[e])[:, None]
                gx = g0[e][:, None] + np.einsum("pck,pqk->pqc", G[e], xq)
                total += float(np.einsum("pq,pq->", wq, _near_pairs(xq, gx, X[k], g0[k], G[k], s)))
    return math.sqrt(max(total, 0.0))


# ---------------------------------------------------------------------------
# reports

CSV_COLUMNS = ["n", "a", "m", "h", "dofs", "l2_f", "k21a", "h1", "ratio", "gagliardo"]


@dataclass
class NormReport:
    n: float
    a: float
    m: int
    h: float
    dofs: int
    l2_f: float
    k21a: float
    h1: float
    ratio: float
    gagliardo: float = float("nan")
    a_max: float = float("nan")

    @property
    def ratio_defined(self):
        return math.isfinite(self.ratio)

    def csv_row(self):
        d = asdict(self)
        return ",".join(_fmt(d[c]) for c in CSV_COLUMNS)

    def as_dict(self):
        return asdict(self)


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def ratio_report(domain, mesh, solution, f, w, a, gagliardo_s=None):
    """NormReport with ratio = ||u||_{K^2_{1+a}} / ||f||_{L^2}."""
    groups = quad_data(solution.mesh, solution.order, w, want_hess=True)
    l2_f = 0.0
    for g in groups:
        fv = np.asarray(f(g.x.reshape(-1, 2)), dtype=float).reshape(g.x.shape[:2])
        l2_f += float((fv**2 * g.wdet).sum())
    l2_f = math.sqrt(l2_f)
    k = kondratiev_norm(solution, w, 2, 1 + a, groups=groups)
    h1 = sobolev_norm(solution, 1, groups=groups)
    ratio = k / l2_f if l2_f > 0 else float("nan")
    P = mesh.nodes[mesh.vertices]
    h = float(np.linalg.norm(P - np.roll(P, 1, axis=1), axis=-1).max())
    alpha_max = getattr(getattr(domain, "parent", domain), "alpha_max", None)
    gag = float("nan")
    if gagliardo_s is not None:
        gag = gagliardo_seminorm(solution, gagliardo_s)
    return NormReport(
        n=getattr(domain, "n", float("inf")),
        a=a,
        m=2,
        h=h,
        dofs=int((~solution.dirichlet).sum()),
        l2_f=l2_f,
        k21a=k,
        h1=h1,
        ratio=ratio,
        gagliardo=gag,
        a_max=math.pi / alpha_max if alpha_max else float("nan"),
    )
