"""Hot inner loops, each in a numba-compiled and a pure-numpy flavour.

The exported names (``cutoff_log_terms``, ``propagator_coefficients``,
``apply_propagator``, ``abs_pow``, ``second_difference_sum``) resolve to the
numba versions unless ``DAMPWAVE_NUMBA=0`` is set in the environment or numba
is not importable. Both flavours stay importable under ``*_numba`` /
``*_numpy`` so they can be compared directly.
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("DAMPWAVE_NUMBA", "1") != "0"

_SERIES_THRESHOLD = 1e-6


def _njit(func):
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True, fastmath=False)(func)


# ---------------------------------------------------------------------------
# smooth cutoff profile  exp(-(a/(1-r)) exp(-b/(r-1/2)))  in log form


def _cutoff_log_terms_loop(r, alpha, beta):
    m = r.shape[0]
    logphi = np.empty(m)
    d1 = np.empty(m)
    d2 = np.empty(m)
    for i in range(m):
        x = r[i]
        if x <= 0.5:
            logphi[i] = 0.0
            d1[i] = 0.0
            d2[i] = 0.0
        elif x >= 1.0:
            logphi[i] = -np.inf
            d1[i] = 0.0
            d2[i] = 0.0
        else:
            q = 1.0 - x
            w = x - 0.5
            # e^{-g} with g = log(q/alpha) + beta/w
            e = alpha / q * math.exp(-beta / w)
            g1 = -1.0 / q - beta / (w * w)
            g2 = -1.0 / (q * q) + 2.0 * beta / (w * w * w)
            logphi[i] = -e
            d1[i] = e * g1
            d2[i] = e * (e * g1 * g1 - g1 * g1 + g2)
    return logphi, d1, d2


cutoff_log_terms_numba = _njit(_cutoff_log_terms_loop)


def cutoff_log_terms_numpy(r, alpha, beta):
    r = np.asarray(r, dtype=float)
    logphi = np.zeros_like(r)
    d1 = np.zeros_like(r)
    d2 = np.zeros_like(r)
    logphi[r >= 1.0] = -np.inf
    mid = (r > 0.5) & (r < 1.0)
    x = r[mid]
    q = 1.0 - x
    w = x - 0.5
    e = alpha / q * np.exp(-beta / w)
    g1 = -1.0 / q - beta / w**2
    g2 = -1.0 / q**2 + 2.0 * beta / w**3
    logphi[mid] = -e
    d1[mid] = e * g1
    d2[mid] = e * (e * g1 * g1 - g1 * g1 + g2)
    return logphi, d1, d2


# ---------------------------------------------------------------------------
# exact flow of  u'' + a u' + b u = 0,  a = |xi|^{2 delta},  b = |xi|^2


def _propagator_loop(xi_abs, delta, dt):
    m = xi_abs.shape[0]
    m00 = np.empty(m)
    m01 = np.empty(m)
    m10 = np.empty(m)
    m11 = np.empty(m)
    for i in range(m):
        k = xi_abs[i]
        a = k ** (2.0 * delta) if k > 0.0 else 0.0
        b = k * k
        mu2 = 0.25 * a * a - b
        z = mu2 * dt * dt
        if abs(z) < _SERIES_THRESHOLD * _SERIES_THRESHOLD:
            env = math.exp(-0.5 * a * dt)
            c = env * (1.0 + z / 2.0 + z * z / 24.0 + z * z * z / 720.0)
            s = env * dt * (1.0 + z / 6.0 + z * z / 120.0 + z * z * z / 5040.0)
        elif mu2 > 0.0:
            mu = math.sqrt(mu2)
            lead = math.exp((mu - 0.5 * a) * dt)
            tail = math.exp(-2.0 * mu * dt)
            c = 0.5 * lead * (1.0 + tail)
            s = -lead * math.expm1(-2.0 * mu * dt) / (2.0 * mu)
        else:
            om = math.sqrt(-mu2)
            env = math.exp(-0.5 * a * dt)
            c = env * math.cos(om * dt)
            s = env * math.sin(om * dt) / om
        m00[i] = c + 0.5 * a * s
        m01[i] = s
        m10[i] = -b * s
        m11[i] = c - 0.5 * a * s
    return m00, m01, m10, m11


propagator_coefficients_numba = _njit(_propagator_loop)


def propagator_coefficients_numpy(xi_abs, delta, dt):
    k = np.asarray(xi_abs, dtype=float)
    a = np.where(k > 0.0, np.abs(k) ** (2.0 * delta), 0.0)
    b = k * k
    mu2 = 0.25 * a * a - b
    z = mu2 * dt * dt
    series = np.abs(z) < _SERIES_THRESHOLD**2
    over = (~series) & (mu2 > 0.0)
    osc = (~series) & (mu2 <= 0.0)
    c = np.empty_like(k)
    s = np.empty_like(k)

    env = np.exp(-0.5 * a[series] * dt)
    zs = z[series]
    c[series] = env * (1.0 + zs / 2.0 + zs**2 / 24.0 + zs**3 / 720.0)
    s[series] = env * dt * (1.0 + zs / 6.0 + zs**2 / 120.0 + zs**3 / 5040.0)

    mu = np.sqrt(mu2[over])
    lead = np.exp((mu - 0.5 * a[over]) * dt)
    c[over] = 0.5 * lead * (1.0 + np.exp(-2.0 * mu * dt))
    s[over] = -lead * np.expm1(-2.0 * mu * dt) / (2.0 * mu)

    om = np.sqrt(-mu2[osc])
    env = np.exp(-0.5 * a[osc] * dt)
    c[osc] = env * np.cos(om * dt)
    s[osc] = env * np.sin(om * dt) / om

    return c + 0.5 * a * s, s, -b * s, c - 0.5 * a * s


def _apply_loop(m00, m01, m10, m11, uh, vh):
    n = uh.shape[0]
    uo = np.empty_like(uh)
    vo = np.empty_like(vh)
    for i in range(n):
        uo[i] = m00[i] * uh[i] + m01[i] * vh[i]
        vo[i] = m10[i] * uh[i] + m11[i] * vh[i]
    return uo, vo


apply_propagator_numba = _njit(_apply_loop)


def apply_propagator_numpy(m00, m01, m10, m11, uh, vh):
    return m00 * uh + m01 * vh, m10 * uh + m11 * vh


# ---------------------------------------------------------------------------
# |u|^p as exp(p log|u|), with |u| < 1e-300 mapped to 0


def _abs_pow_loop(u, p):
    out = np.empty(u.shape[0])
    for i in range(u.shape[0]):
        a = abs(u[i])
        out[i] = 0.0 if a < 1e-300 else math.exp(p * math.log(a))
    return out


abs_pow_numba = _njit(_abs_pow_loop)


def abs_pow_numpy(u, p):
    a = np.abs(u)
    out = np.zeros_like(a)
    keep = a >= 1e-300
    out[keep] = np.exp(p * np.log(a[keep]))
    return out


# ---------------------------------------------------------------------------
# sum_j w_j (f(x + r_j w) + f(x - r_j w) - 2 f(x)), accumulated in node order


def _second_difference_loop(fplus, fminus, f0, weights):
    total = 0.0
    for j in range(weights.shape[0]):
        total += weights[j] * ((fplus[j] - f0) + (fminus[j] - f0))
    return total


second_difference_sum_numba = _njit(_second_difference_loop)


def second_difference_sum_numpy(fplus, fminus, f0, weights):
    return float(np.sum(weights * ((fplus - f0) + (fminus - f0))))


def _flat(fn_numba, fn_numpy):
    if USE_NUMBA:
        return fn_numba
    return fn_numpy


_cutoff_impl = _flat(cutoff_log_terms_numba, cutoff_log_terms_numpy)
_prop_impl = _flat(propagator_coefficients_numba, propagator_coefficients_numpy)
_apply_impl = _flat(apply_propagator_numba, apply_propagator_numpy)
_pow_impl = _flat(abs_pow_numba, abs_pow_numpy)
second_difference_sum = _flat(second_difference_sum_numba, second_difference_sum_numpy)


def cutoff_log_terms(r, alpha, beta):
    """Return ``(log phi, phi'/phi, phi''/phi)`` of the cutoff profile at ``r``."""
    r = np.asarray(r, dtype=float)
    shape = r.shape
    out = _cutoff_impl(np.ascontiguousarray(r.ravel()), float(alpha), float(beta))
    return tuple(o.reshape(shape) for o in out)


def propagator_coefficients(xi_abs, delta, dt):
    xi_abs = np.asarray(xi_abs, dtype=float)
    shape = xi_abs.shape
    out = _prop_impl(np.ascontiguousarray(xi_abs.ravel()), float(delta), float(dt))
    return tuple(o.reshape(shape) for o in out)


def apply_propagator(coeffs, uh, vh):
    shape = uh.shape
    flat = [np.ascontiguousarray(c.ravel()) for c in coeffs]
    uo, vo = _apply_impl(*flat, np.ascontiguousarray(uh.ravel()), np.ascontiguousarray(vh.ravel()))
    return uo.reshape(shape), vo.reshape(shape)


def abs_pow(u, p):
    u = np.asarray(u, dtype=float)
    return _pow_impl(np.ascontiguousarray(u.ravel()), float(p)).reshape(u.shape)
