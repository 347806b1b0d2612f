"""Truncated Taylor arithmetic on numpy arrays.

A univariate jet of order K is an array ``c`` of shape ``(K+1, *batch)`` with
``c[k] = f^(k)(t0) / k!``.  A bivariate jet is an array of shape
``(K+1, K+1, *batch)`` with ``c[i, j] = d^i_x d^j_y f / (i! j!)`` and entries with
``i + j > K`` kept at zero.

Composition with a scalar function only needs that function's Taylor
coefficients at the base point, which is how the chain rule is applied in
closed form throughout the package.
"""

import numpy as np
from scipy.special import binom

__all__ = [
    "variable",
    "constant",
    "mul",
    "compose",
    "recip_coeffs",
    "exp_coeffs",
    "pow_coeffs",
    "sin_coeffs",
    "cos_coeffs",
    "recip",
    "jexp",
    "jpow",
    "jsin",
    "jcos",
    "deriv",
    "integrate",
    "bivariate_variable",
    "bmul",
    "bcompose",
    "bderivative",
]


def constant(value, K):
    value = np.asarray(value, dtype=float)
    c = np.zeros((K + 1,) + value.shape)
    c[0] = value
    return c


def variable(t0, K, scale=1.0):
    """Jet of ``t -> scale * t`` expanded at ``t0``."""
    c = constant(t0, K)
    if K >= 1:
        c[1] = scale
    return c


def mul(a, b):
    K = a.shape[0] - 1
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
    for k in range(K + 1):
        acc = a[0] * b[k]
        for i in range(1, k + 1):
            acc = acc + a[i] * b[k - i]
        out[k] = acc
    return out


def compose(g, a):
    """Return the jet of ``G(a)`` given ``g[k] = G^(k)(a[0]) / k!``."""
    K = a.shape[0] - 1
    delta = a.copy()
    delta[0] = 0.0
    out = np.zeros(np.broadcast_shapes(g.shape, a.shape))
    out[0] = g[0]
    power = None
    for k in range(1, K + 1):
        power = delta if power is None else mul(power, delta)
        out = out + g[k] * power
    return out


def recip_coeffs(x0, K):
    x0 = np.asarray(x0, dtype=float)
    k = np.arange(K + 1).reshape((-1,) + (1,) * x0.ndim)
    return (-1.0) ** k * x0 ** (-(k + 1.0))


def exp_coeffs(x0, K):
    x0 = np.asarray(x0, dtype=float)
    fact = np.cumprod(np.r_[1.0, np.arange(1, K + 1)]).reshape((-1,) + (1,) * x0.ndim)
    return np.exp(x0) / fact


def pow_coeffs(x0, b, K):
    x0 = np.asarray(x0, dtype=float)
    k = np.arange(K + 1).reshape((-1,) + (1,) * x0.ndim)
    return binom(b, k) * x0 ** (b - k)


def _trig_coeffs(x0, K, phase):
    x0 = np.asarray(x0, dtype=float)
    out = np.empty((K + 1,) + x0.shape)
    fact = 1.0
    for k in range(K + 1):
        if k:
            fact *= k
        out[k] = np.sin(x0 + phase + k * np.pi / 2) / fact
    return out


def sin_coeffs(x0, K):
    return _trig_coeffs(x0, K, 0.0)


def cos_coeffs(x0, K):
    return _trig_coeffs(x0, K, np.pi / 2)


def recip(a):
    return compose(recip_coeffs(a[0], a.shape[0] - 1), a)


def jexp(a):
    return compose(exp_coeffs(a[0], a.shape[0] - 1), a)


def jpow(a, b):
    return compose(pow_coeffs(a[0], b, a.shape[0] - 1), a)


def jsin(a):
    return compose(sin_coeffs(a[0], a.shape[0] - 1), a)


def jcos(a):
    return compose(cos_coeffs(a[0], a.shape[0] - 1), a)


def deriv(a):
    """d/dt of a jet; the top coefficient is lost and set to zero."""
    out = np.zeros_like(a)
    K = a.shape[0] - 1
    for k in range(K):
        out[k] = (k + 1) * a[k + 1]
    return out


def integrate(a, c0=0.0):
    """Antiderivative jet with constant term ``c0`` (top term truncated)."""
    out = np.zeros_like(a)
    out[0] = c0
    K = a.shape[0] - 1
    for k in range(K):
        out[k + 1] = a[k] / (k + 1)
    return out


# -- bivariate -------------------------------------------------------------


def bivariate_variable(x0, axis, K):
    """Jet of the coordinate function ``x_axis`` expanded at ``x0`` (batch)."""
    x0 = np.asarray(x0, dtype=float)
    c = np.zeros((K + 1, K + 1) + x0.shape)
    c[0, 0] = x0
    if K >= 1:
        if axis == 0:
            c[1, 0] = 1.0
        else:
            c[0, 1] = 1.0
    return c


def bmul(a, b):
    K = a.shape[0] - 1
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
    for i in range(K + 1):
        for j in range(K + 1 - i):
            acc = 0.0
            for p in range(i + 1):
                for q in range(j + 1):
                    acc = acc + a[p, q] * b[i - p, j - q]
            out[i, j] = acc
    return out


def bcompose(g, a):
    """Bivariate jet of ``G(a)`` given univariate coefficients ``g``."""
    K = a.shape[0] - 1
    delta = a.copy()
    delta[0, 0] = 0.0
    out = np.zeros((K + 1, K + 1) + np.broadcast_shapes(g.shape[1:], a.shape[2:]))
    out[0, 0] = g[0]
    power = None
    for k in range(1, K + 1):
        power = delta if power is None else bmul(power, delta)
        out = out + g[k] * power
    return out


def bderivative(c, alpha):
    """Partial derivative ``d^alpha`` at the base point from a bivariate jet."""
    i, j = alpha
    return c[i, j] * float(np.prod(np.arange(1, i + 1))) * float(np.prod(np.arange(1, j + 1)))
