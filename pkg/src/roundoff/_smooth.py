"""The exp(-1/t) smoothstep and its Taylor coefficients."""

import numpy as np

from . import _jets as J

# below this the bump exp(-1/u) underflows to an exact 0.0 in double precision
_FLAT = 1e-3

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def _bump(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    pos = u > _FLAT
    out[pos] = np.exp(-1.0 / u[pos])
    return out


def smoothstep(u):
    """C-infinity step: 0 for u <= 0, 1 for u >= 1, symmetric about (1/2, 1/2)."""
    u = np.asarray(u, dtype=float)
    a = _bump(u)
    b = _bump(1.0 - u)
    return a / (a + b)


def _bump_jet(v):
    """Jet of exp(-1/v) where v is a jet; zero where v[0] is in the flat zone."""
    v0 = v[0]
    pos = v0 > _FLAT
    safe = np.where(pos, v0, 1.0)
    vs = v.copy()
    vs[0] = safe
    out = J.jexp(-J.recip(vs))
    return np.where(pos, out, 0.0)


def smoothstep_jet(u0, K, scale=1.0):
    """Taylor coefficients of ``t -> smoothstep(u0 + scale*t)`` at t = 0."""
    u0 = np.asarray(u0, dtype=float)
    u = J.variable(u0, K, scale)
    a = _bump_jet(u)
    b = _bump_jet(J.constant(np.ones_like(u0), K) - u)
    out = J.mul(a, J.recip(a + b))
    # outside (0, 1) the step is exactly constant
    out = np.where(u0 <= 0.0, 0.0, out)
    one = J.constant(np.ones_like(u0), K)
    return np.where(u0 >= 1.0, one, out)


def smoothstep_integral(u):
    """Integral of the smoothstep over [0, u], for u in [0, 1]."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    # 3 panels of 24-point Gauss-Legendre; integrand is analytic on (0, 1]
    total = np.zeros_like(u)
    edges = np.linspace(0.0, 1.0, 4)
    for lo, hi in zip(edges[:-1], edges[1:]):
        a = np.minimum(u, lo)
        b = np.minimum(u, hi)
        half = 0.5 * (b - a)
        mid = 0.5 * (b + a)
        x = mid[..., None] + half[..., None] * _GL_NODES
        total = total + half * (smoothstep(x) @ _GL_WEIGHTS)
    return total
