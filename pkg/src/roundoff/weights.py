"""Corner weight r_n, the conformal metric r^-2 dx^2 and boundary curvature in it.

All derivatives are exact: the weight is expanded as a bivariate Taylor jet by
composing the jet of ``eta`` with the jet of the distance to the nearest
puncture.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.special import binom

from . import _jets as J
from ._smooth import smoothstep, smoothstep_integral, smoothstep_jet
from .errors import AtPuncture, NegativeT, NonPositiveT

__all__ = [
    "EtaProfile",
    "WeightFunction",
    "ConstantWeight",
    "Curve",
    "CurvatureProfile",
    "eta_eval",
    "weight_eval",
    "log_derivative_A",
    "admissibility_grid",
    "admissibility_scan",
    "leibniz_bound",
    "conformal_curvature",
    "curvature_profile",
    "geodesic_length",
]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


@dataclass(frozen=True)
class EtaProfile:
    """eta(t) = t near 0, R/6 far away, with a smoothstep ramp of eta' between."""

    R: float
    K: int = 5

    @property
    def t0(self):
        return 7.0 * self.R / 48.0

    @property
    def w(self):
        return self.R / 24.0

    @property
    def flat_from(self):
        """Beyond this distance eta is constant."""
        return self.t0 + self.w

    def value(self, t):
        t = np.asarray(t, dtype=float)
        out = np.where(t <= self.t0, t, self.R / 6.0)
        mid = (t > self.t0) & (t < self.flat_from)
        if np.any(mid):
            u = (t[mid] - self.t0) / self.w
            out[mid] = self.t0 + self.w * (u - smoothstep_integral(u))
        return out

    def slope(self, t):
        """eta'(t)."""
        t = np.asarray(t, dtype=float)
        return 1.0 - smoothstep((t - self.t0) / self.w)

    def jet(self, t, K=None):
        """Taylor coefficients of eta at ``t`` (shape (K+1, *t.shape))."""
        K = self.K if K is None else K
        t = np.asarray(t, dtype=float)
        u0 = (t - self.t0) / self.w
        slope = J.constant(np.ones_like(t), K) - smoothstep_jet(u0, K, 1.0 / self.w)
        return J.integrate(slope, self.value(t))


def eta_eval(profile, t, k=0):
    """k-th derivative of eta at ``t``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise NegativeT("eta is defined for t >= 0")
    if not 0 <= k <= profile.K:
        raise ValueError(f"derivative order {k} outside 0..{profile.K}")
    if k == 0:
        return profile.value(t)
    return profile.jet(t, k)[k] * math.factorial(k)


def log_derivative_A(profile, t):
    """A(t) = t eta'(t) / eta(t)."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise NonPositiveT("A is defined for t > 0")
    return t * eta_eval(profile, t, 1) / profile.value(t)


@dataclass(frozen=True, eq=False)
class WeightFunction:
    """r(x) = eta(dist(x, punctures)); an empty puncture set gives r = R/6."""

    eta: EtaProfile
    punctures: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def __post_init__(self):
        object.__setattr__(self, "punctures", np.asarray(self.punctures, dtype=float).reshape(-1, 2))

    @classmethod
    def for_domain(cls, domain, K=5):
        return cls(EtaProfile(domain.R, K), np.asarray(domain.punctures))

    @property
    def K(self):
        return self.eta.K

    def nearest(self, x):
        """Index of and distance to the nearest puncture for each point."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if len(self.punctures) == 0:
            return np.zeros(len(x), dtype=int), np.full(len(x), np.inf)
        d = np.linalg.norm(x[:, None, :] - self.punctures[None], axis=-1)
        k = np.argmin(d, axis=1)
        return k, d[np.arange(len(x)), k]

    def __call__(self, x):
        _, d = self.nearest(x)
        if np.any(d == 0.0):
            raise AtPuncture("r vanishes at a puncture")
        return np.where(np.isfinite(d), self.eta.value(np.where(np.isfinite(d), d, 0.0)), self.eta.R / 6.0)

    def jet(self, x, K=None):
        """Bivariate Taylor jet of r at each point: shape (K+1, K+1, M)."""
        K = self.K if K is None else K
        x = np.atleast_2d(np.asarray(x, dtype=float))
        k, d = self.nearest(x)
        if np.any(d == 0.0):
            raise AtPuncture("r is singular at a puncture")
        out = np.zeros((K + 1, K + 1, len(x)))
        out[0, 0] = self.eta.R / 6.0
        near = np.nonzero(d < self.eta.flat_from)[0]
        if len(near):
            rel = x[near] - self.punctures[k[near]]
            dx = J.bivariate_variable(rel[:, 0], 0, K)
            dy = J.bivariate_variable(rel[:, 1], 1, K)
            sq = J.bmul(dx, dx) + J.bmul(dy, dy)
            rho = J.bcompose(J.pow_coeffs(sq[0, 0], 0.5, K), sq)
            out[..., near] = J.bcompose(self.eta.jet(rho[0, 0], K), rho)
        return out

    def grad(self, x):
        return self.value_and_grad(x)[1]

    def value_and_grad(self, x):
        """r and its gradient, without building jets."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        k, d = self.nearest(x)
        if np.any(d == 0.0):
            raise AtPuncture("r is singular at a puncture")
        r = np.full(len(x), self.eta.R / 6.0)
        g = np.zeros((len(x), 2))
        near = np.nonzero(d < self.eta.flat_from)[0]
        if len(near):
            dn = d[near]
            r[near] = self.eta.value(dn)
            g[near] = (self.eta.slope(dn) / dn)[:, None] * (x[near] - self.punctures[k[near]])
        return r, g


@dataclass(frozen=True)
class ConstantWeight:
    """r identically equal to ``value``."""

    value: float
    punctures: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    K: int = 5

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.full(len(x), float(self.value))

    def jet(self, x, K=None):
        K = self.K if K is None else K
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.zeros((K + 1, K + 1, len(x)))
        out[0, 0] = self.value
        return out

    def grad(self, x):
        return np.zeros((len(np.atleast_2d(x)), 2))

    def value_and_grad(self, x):
        return self(x), self.grad(x)


def _power_jet(w, x, b, K):
    r = w.jet(x, K)
    return J.bcompose(J.pow_coeffs(r[0, 0], b, K), r)


def weight_eval(w, x, alpha=(0, 0)):
    """Partial derivative d^alpha r at ``x`` (scalar or array of points)."""
    alpha = tuple(int(a) for a in alpha)
    order = sum(alpha)
    if order > w.K:
        raise ValueError(f"|alpha| = {order} exceeds K = {w.K}")
    scalar = np.asarray(x).ndim == 1
    val = J.bderivative(w.jet(x, max(order, 1)), alpha)
    return float(val[0]) if scalar else val


def _multi_indices(m):
    return [(i, k - i) for k in range(m + 1) for i in range(k, -1, -1)]


def admissibility_grid(w, rays=64):
    """Scan points around every puncture at the distances probed by admissibility_scan."""
    R = w.eta.R
    radii = R * np.array([1 / 100, 1 / 20, 1 / 10, 1 / 8, 1 / 7, 0.16, 1 / 6, 0.175, 1 / 5.5, 1 / 5, 1 / 4])
    phi = 2 * np.pi * (np.arange(rays) + 0.5) / rays
    ring = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    offsets = (radii[:, None, None] * ring[None]).reshape(-1, 2)
    return np.concatenate([p + offsets for p in w.punctures]) if len(w.punctures) else offsets


def admissibility_scan(w, b, alpha, grid=None, per_puncture=False):
    """sup over grid of |r^(|alpha| - b) d^alpha (r^b)|.

    With ``per_puncture`` the supremum is returned separately for the grid
    points closest to each puncture.
    """
    grid = admissibility_grid(w) if grid is None else np.atleast_2d(grid)
    alpha = tuple(alpha)
    order = sum(alpha)
    rb = _power_jet(w, grid, b, max(order, 1))
    r = w(grid)
    vals = np.abs(r ** (order - b) * J.bderivative(rb, alpha))
    if not per_puncture:
        return float(vals.max())
    k, _ = w.nearest(grid)
    return np.array([vals[k == j].max() if np.any(k == j) else 0.0 for j in range(max(len(w.punctures), 1))])


def leibniz_bound(w, b, m=2, grid=None):
    """Upper bound C for ||r^b u||_{K^m_{a+b}} <= C ||u||_{K^m_a}.

    Combines the scanned suprema M_gamma = sup |r^(|gamma|-b) d^gamma r^b| with
    the Leibniz rule: C^2 = sum_alpha (sum_{beta<=alpha} binom(alpha, beta) M_{alpha-beta})^2.
    """
    idx = _multi_indices(m)
    M = {g: admissibility_scan(w, b, g, grid) for g in idx}
    total = 0.0
    for a1, a2 in idx:
        row = 0.0
        for b1 in range(a1 + 1):
            for b2 in range(a2 + 1):
                row += binom(a1, b1) * binom(a2, b2) * M[(a1 - b1, a2 - b2)]
        total += row**2
    return math.sqrt(total)


# ---------------------------------------------------------------------------
# curves


@dataclass(frozen=True, eq=False)
class Curve:
    """Constant-speed parametrized curve on t in [0, 1] given by its tangent angle.

    ``start``, ``length`` and the tangent-angle function fully describe it; the
    factories cover circles and segments.  Boundary pieces of a rounded domain
    expose the same interface and can be passed wherever a Curve is accepted.
    """

    start: np.ndarray
    length: float
    theta0: float
    turn: float = 0.0
    kind = "curve"

    @classmethod
    def circle(cls, center, radius, clockwise=False, phase=0.0):
        center = np.asarray(center, dtype=float)
        sign = -1.0 if clockwise else 1.0
        start = center + radius * np.array([math.cos(phase), math.sin(phase)])
        return cls(start, 2 * math.pi * radius, phase + sign * math.pi / 2, sign * 2 * math.pi)

    @classmethod
    def segment(cls, a, b):
        a = np.asarray(a, dtype=float)
        d = np.asarray(b, dtype=float) - a
        return cls(a, float(np.hypot(*d)), math.atan2(d[1], d[0]), 0.0)

    def tangent_angle(self, t):
        return self.theta0 + self.turn * np.asarray(t, dtype=float)

    def theta_jet(self, t0, K):
        t0 = np.asarray(t0, dtype=float)
        c = J.constant(self.tangent_angle(t0), K)
        if K >= 1:
            c[1] = self.turn
        return c

    def point(self, t):
        t = np.asarray(t, dtype=float)
        if self.turn == 0.0:
            d = np.array([math.cos(self.theta0), math.sin(self.theta0)])
            return self.start + self.length * t[..., None] * d
        k = self.turn / self.length
        th = self.tangent_angle(t)
        dx = (np.sin(th) - math.sin(self.theta0)) / k
        dy = -(np.cos(th) - math.cos(self.theta0)) / k
        return self.start + np.stack([dx, dy], axis=-1)

    def velocity(self, t):
        th = self.tangent_angle(t)
        return self.length * np.stack([np.cos(th), np.sin(th)], axis=-1)

    @property
    def end(self):
        return self.point(1.0)

    def scaled(self, center, ratio):
        center = np.asarray(center, dtype=float)
        return Curve(center + ratio * (self.start - center), ratio * self.length, self.theta0, self.turn)


def _curve_jets(piece, t, K):
    """Jets in Euclidean arc length of the tangent angle and the position."""
    t = np.asarray(t, dtype=float)
    L = piece.length
    th = piece.theta_jet(t, K + 1)
    th = th / L ** np.arange(K + 2).reshape((-1,) + (1,) * t.ndim)
    x0 = piece.point(t)
    x = J.integrate(J.jcos(th[: K + 1]), x0[..., 0])
    y = J.integrate(J.jsin(th[: K + 1]), x0[..., 1])
    return th, x, y


def _along(bjet, dx, dy):
    """Univariate jet of F(x(s)) from F's bivariate jet and displacement jets."""
    K = dx.shape[0] - 1
    out = np.zeros_like(dx)
    px = [J.constant(np.ones_like(dx[0]), K)]
    py = [J.constant(np.ones_like(dx[0]), K)]
    for _ in range(K):
        px.append(J.mul(px[-1], dx))
        py.append(J.mul(py[-1], dy))
    for i in range(K + 1):
        for j in range(K + 1 - i):
            out = out + bjet[i, j] * J.mul(px[i], py[j])
    return out


def _kappa_jets(piece, t, w, K):
    """Jets in Euclidean arc length of kappa (conformal curvature) and r."""
    th, x, y = _curve_jets(piece, t, K)
    pts = np.stack([x[0], y[0]], axis=-1).reshape(-1, 2)
    shape = x[0].shape
    bj = w.jet(pts, K + 1).reshape((K + 2, K + 2) + shape)
    dx = x.copy()
    dy = y.copy()
    dx[0] = 0.0
    dy[0] = 0.0
    r = _along(bj[: K + 1, : K + 1], dx, dy)
    # gradient jets: shift the bivariate coefficients
    gx = np.zeros((K + 1, K + 1) + shape)
    gy = np.zeros((K + 1, K + 1) + shape)
    for i in range(K + 1):
        for j in range(K + 1 - i):
            gx[i, j] = (i + 1) * bj[i + 1, j]
            gy[i, j] = (j + 1) * bj[i, j + 1]
    rx = _along(gx, dx, dy)
    ry = _along(gy, dx, dy)
    # outward normal for a counterclockwise boundary is (sin th, -cos th)
    nx = J.jsin(th[: K + 1])
    ny = -J.jcos(th[: K + 1])
    dth = J.deriv(th)[: K + 1]
    kappa = -J.mul(r, dth) + J.mul(rx, nx) + J.mul(ry, ny)
    return kappa, r


def conformal_curvature(piece, s, w):
    """Geodesic curvature in r^-2 dx^2 at Euclidean arc length ``s`` along ``piece``.

    Sign convention: positive when the boundary bends toward the outward normal
    side relative to the metric, with the domain on the left of the
    parametrization.
    """
    t = np.asarray(s, dtype=float) / piece.length
    kappa, _ = _kappa_jets(piece, np.atleast_1d(t), w, 0)
    out = kappa[0]
    return float(out[0]) if np.ndim(s) == 0 else out


def _hat_derivatives(kappa, r, k):
    """d^j kappa / d s_hat^j for j <= k, where d/ds_hat = r d/ds."""
    out = [kappa[0]]
    cur = kappa
    for _ in range(k):
        cur = J.mul(r, J.deriv(cur))
        out.append(cur[0])
    return np.array(out)


def _hat_length(piece, w, ta, tb):
    """Length in r^-2 dx^2 of piece between parameters ta and tb (arrays)."""
    ta = np.asarray(ta, dtype=float)
    tb = np.asarray(tb, dtype=float)
    half = 0.5 * (tb - ta)
    mid = 0.5 * (tb + ta)
    tt = mid[..., None] + half[..., None] * _GL_NODES
    pts = piece.point(tt.ravel())
    speed = np.linalg.norm(piece.velocity(tt.ravel()), axis=-1)
    f = (speed / w(pts)).reshape(tt.shape)
    return half * (f @ _GL_WEIGHTS)


@dataclass
class CurvatureProfile:
    piece_id: np.ndarray
    t: np.ndarray
    s_hat: np.ndarray
    r: np.ndarray
    derivatives: np.ndarray  # (k+1, M): d^j kappa / d s_hat^j

    @property
    def kappa(self):
        return self.derivatives[0]

    def sup(self, k=None, pieces=None):
        """sup |d^k kappa| overall (k=None gives all orders), optionally on given pieces."""
        mask = np.ones(len(self.t), dtype=bool) if pieces is None else np.isin(self.piece_id, list(pieces))
        vals = np.abs(self.derivatives[:, mask]).max(axis=1)
        return vals if k is None else float(vals[k])

    def to_csv(self, path):
        d1 = self.derivatives[1] if len(self.derivatives) > 1 else np.full(len(self.t), np.nan)
        lines = ["piece_id,s_hat,kappa,dkappa_ds,r"]
        for row in zip(self.piece_id, self.s_hat, self.kappa, d1, self.r):
            lines.append(f"{int(row[0])},{row[1]:.17g},{row[2]:.17g},{row[3]:.17g},{row[4]:.17g}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def _fd_derivatives(piece, w, t, k, step):
    """Central differences in s_hat with s_hat step ``step`` (Euclidean step step*r)."""
    L = piece.length
    offsets = np.arange(-(k // 2 + 1), k // 2 + 2)
    # locate parameters at the requested s_hat offsets by Newton on the hat length
    tt = np.empty((len(offsets), len(t)))
    for i, m in enumerate(offsets):
        cur = t.copy()
        for _ in range(30):
            g = _hat_length(piece, w, t, cur) - m * step
            upd = g * w(piece.point(cur)) / L
            cur = cur - upd
            if np.all(np.abs(upd) < 1e-15):
                break
        tt[i] = cur
    vals = conformal_curvature(piece, (tt * L).ravel(), w).reshape(tt.shape)
    out = [vals[len(offsets) // 2]]
    for j in range(1, k + 1):
        coeffs = _fd_weights(offsets * step, j)
        out.append(coeffs @ vals)
    return np.array(out)


def _fd_weights(x, m):
    """Fornberg finite-difference weights at 0 for the m-th derivative on nodes x."""
    n = len(x)
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = x[0]
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i]
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


def curvature_profile(domain, w, k=2, samples_per_piece=128, method="jet", fd_step=1e-3, pieces=None):
    """Sample d^j kappa / d s_hat^j (j <= k) along the boundary.

    ``method="jet"`` uses exact Taylor arithmetic; ``method="fd"`` uses central
    differences with s_hat step ``fd_step`` and keeps samples whose stencil
    stays on the piece.
    """
    if not 0 <= k <= 4:
        raise ValueError("k must lie in 0..4")
    ids, ts, ders, rs, sh = [], [], [], [], []
    offset = 0.0
    which = range(len(domain.pieces)) if pieces is None else pieces
    for pid in which:
        piece = domain.pieces[pid]
        t = (np.arange(samples_per_piece) + 0.5) / samples_per_piece
        if method == "jet":
            kappa, r = _kappa_jets(piece, t, w, k)
            d = _hat_derivatives(kappa, r, k)
            rr = r[0]
        elif method == "fd":
            rr = w(piece.point(t))
            reach = (k // 2 + 1) * fd_step * rr / piece.length * 1.5
            keep = (t - reach > 0) & (t + reach < 1)
            t, rr = t[keep], rr[keep]
            d = _fd_derivatives(piece, w, t, k, fd_step)
        else:
            raise ValueError(f"unknown method {method!r}")
        s_hat = offset + _hat_length(piece, w, np.zeros_like(t), t)
        offset += float(_hat_length(piece, w, np.zeros(1), np.ones(1))[0])
        ids.append(np.full(len(t), pid))
        ts.append(t)
        ders.append(d)
        rs.append(rr)
        sh.append(s_hat)
    return CurvatureProfile(
        piece_id=np.concatenate(ids),
        t=np.concatenate(ts),
        s_hat=np.concatenate(sh),
        r=np.concatenate(rs),
        derivatives=np.concatenate(ders, axis=1),
    )


def geodesic_length(curve, w, epsrel=1e-10):
    """Length of ``curve`` in r^-2 dx^2 by adaptive quadrature."""

    def integrand(t):
        x = curve.point(np.array([t]))
        _, d = w.nearest(x)
        if d[0] == 0.0:
            raise AtPuncture("curve passes through a puncture")
        return float(np.linalg.norm(curve.velocity(np.array([t]))[0]) / w(x)[0])

    val, _ = quad(integrand, 0.0, 1.0, epsrel=epsrel, epsabs=0.0, limit=500)
    return val
