"""Temporal and spatial cutoffs for the test-function argument.

The spatial profile is

    phi(r) = 1                                            r <= 1/2
             exp(-(a/(1-r)) exp(-b/(r-1/2)))              1/2 < r < 1
             0                                            r >= 1

evaluated through ``g(r) = log((1-r)/a) + b/(r-1/2)`` so that
``phi = exp(-e^{-g})``. Everything downstream works with ``log phi`` and the
log-derivatives ``phi'/phi``, ``phi''/phi``, which never overflow; ``phi``
itself may underflow to 0 near ``r = 1``. The temporal cutoff reuses the same
profile in one variable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline

from ._kernels import cutoff_log_terms
from .fractional_ops import CheckReport, QuadratureScheme, RadialProfile, frac_laplacian_quadrature

_LOG_MAX = math.log(np.finfo(float).max)


@dataclass(frozen=True)
class CutoffProfile:
    alpha: float = 0.05
    beta: float = 10.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("profile constants must be positive")

    @classmethod
    def from_epsilon(cls, eps: float) -> "CutoffProfile":
        """The choice ``alpha = eps/2``, ``beta = 1/eps``."""
        return cls(eps / 2.0, 1.0 / eps)

    @property
    def admissible(self) -> bool:
        """``alpha`` small (<= 1/2) and ``beta`` large (>= 1)."""
        return self.alpha <= 0.5 and self.beta >= 1.0

    def log_terms(self, r):
        return cutoff_log_terms(r, self.alpha, self.beta)

    def as_radial(self, power: float = 1.0) -> RadialProfile:
        """``phi^power`` as a quadrature-ready radial profile."""
        a, b = self.alpha, self.beta

        def func(r):
            logphi, _, _ = cutoff_log_terms(r, a, b)
            return np.exp(power * logphi)

        def d1(r):
            logphi, l1, _ = cutoff_log_terms(r, a, b)
            return np.exp(power * logphi) * power * l1

        def d2(r):
            logphi, l1, l2 = cutoff_log_terms(r, a, b)
            return np.exp(power * logphi) * (power * l2 + power * (power - 1) * l1 * l1)

        label = "phi" if power == 1 else f"phi^{power:g}"
        return RadialProfile(
            func, knots=(0.5, 0.75, 0.9, 1.0), support=1.0, d1=d1, d2=d2,
            name=f"{label}[a={a:g},b={b:g}]",
        )


DEFAULT_PROFILE = CutoffProfile()
# the smoothest admissible member of the family; its transition layer is
# resolvable on the grids used for simulation
SMOOTH_PROFILE = CutoffProfile(alpha=0.5, beta=1.0)


def eval_phi(r, profile: CutoffProfile = DEFAULT_PROFILE):
    logphi, _, _ = profile.log_terms(r)
    return np.exp(logphi)


def eval_phi_derivs(r, profile: CutoffProfile = DEFAULT_PROFILE):
    """Return ``(phi, phi', phi'')``."""
    logphi, l1, l2 = profile.log_terms(r)
    phi = np.exp(logphi)
    return phi, phi * l1, phi * l2


def eval_eta(t, profile: CutoffProfile = DEFAULT_PROFILE):
    """Temporal cutoff ``eta(t) = phi(t)`` with its first two derivatives."""
    return eval_phi_derivs(t, profile)


def clustered_grid(a: float, b: float, m: int = 2000, closest: float = 1e-14) -> np.ndarray:
    """Points on ``[a, b]`` with geometric clustering toward both endpoints."""
    k = m // 4
    d = np.geomspace(closest, 0.25 * (b - a), k)
    pts = np.concatenate([a + d, b - d, np.linspace(a, b, m - 2 * k)])
    return np.unique(pts)


def _power_log_derivs(l1, l2, k):
    """Log-derivatives of ``phi^k`` from those of ``phi``."""
    return k * l1, k * l2 + k * (k - 1) * l1 * l1


def _conj(p):
    if not p > 1:
        raise ValueError("p must exceed 1")
    return p / (p - 1.0)


def verify_condition_31(profile: CutoffProfile, p: float, t_grid=None) -> CheckReport:
    """sup of ``eta^{-p'/p} (|eta'|^{p'} + |eta''|^{p'})`` over ``[1/2, 1]``."""
    pc = _conj(p)
    t = clustered_grid(0.5, 1.0) if t_grid is None else np.asarray(t_grid, dtype=float)
    logeta, l1, l2 = profile.log_terms(t)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        # eta^{-p'/p} |eta'|^{p'} = eta^{p' - p'/p} |eta'/eta|^{p'} and p' - p'/p = 1
        inner = np.abs(l1) ** pc + np.abs(l2) ** pc
        logq = np.where(np.isfinite(logeta), logeta + np.log(inner), -np.inf)
    overflow = bool(np.any(logq > _LOG_MAX) or np.any(np.isnan(logq)))
    sup_log = float(np.max(logq[~np.isnan(logq)]))
    sup = math.inf if sup_log > _LOG_MAX else math.exp(sup_log)
    return CheckReport(
        "verify_condition_31",
        {"alpha": profile.alpha, "beta": profile.beta, "p": p, "grid_points": len(t)},
        {"sup": sup, "log_sup": sup_log, "argmax": float(t[np.nanargmax(logq)])},
        metric=sup,
        passed=not overflow and math.isfinite(sup),
        notes=["overflow detected"] if overflow else [],
    )


def verify_condition_32(profile: CutoffProfile, p: float, n: int, r_grid=None) -> CheckReport:
    """sup of ``phi^{1-p'^2} |Delta phi^{p'+1}|^{p'}`` over ``1/2 <= |x| <= 1``."""
    pc = _conj(p)
    k = pc + 1.0
    r = clustered_grid(0.5, 1.0) if r_grid is None else np.asarray(r_grid, dtype=float)
    logphi, l1, l2 = profile.log_terms(r)
    p1, p2 = _power_log_derivs(l1, l2, k)
    # Delta psi / psi in radial form, psi = phi^k
    lap_over = p2 + (n - 1) * p1 / r
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        logq = (1.0 + pc) * logphi + pc * np.log(np.abs(lap_over))
    logq = np.where(np.isfinite(logphi) & (lap_over != 0), logq, -np.inf)
    overflow = bool(np.any(logq > _LOG_MAX) or np.any(np.isnan(logq)))
    sup_log = float(np.max(logq[~np.isnan(logq)]))
    sup = math.inf if sup_log > _LOG_MAX else math.exp(sup_log)
    return CheckReport(
        "verify_condition_32",
        {"alpha": profile.alpha, "beta": profile.beta, "p": p, "n": n, "grid_points": len(r)},
        {"sup": sup, "log_sup": sup_log},
        metric=sup,
        passed=not overflow and math.isfinite(sup),
        notes=["overflow detected"] if overflow else [],
    )


def verify_condition_33(
    profile: CutoffProfile, p: float, n: int, delta: float, r_grid=None, window: float | None = None
) -> CheckReport:
    """max over ``(1/2, 1)`` of ``p' phi'^2 + phi (phi'' + (n - 2 delta + 1) phi'/r)``.

    A point counts as violating when the value exceeds ``1e-9`` times the
    largest of its three terms. ``window`` restricts the check to
    ``(1/2 + window, 1 - window)``.
    """
    pc = _conj(p)
    kk = n - 2.0 * delta + 1.0
    if r_grid is None:
        r = clustered_grid(0.5, 1.0)
        r = r[(r > 0.5) & (r < 1.0)]
    else:
        r = np.asarray(r_grid, dtype=float)
    if window is not None:
        r = r[(r > 0.5 + window) & (r < 1.0 - window)]
    logphi, l1, l2 = profile.log_terms(r)
    terms = np.stack([pc * l1 * l1, l2, kk * l1 / r])
    normalized = terms.sum(axis=0)
    scale = np.max(np.abs(terms), axis=0)
    phi2 = np.exp(2.0 * logphi)
    with np.errstate(over="ignore", invalid="ignore"):
        lhs = phi2 * normalized
    bad = normalized > 1e-9 * scale
    rel = np.where(scale > 0, normalized / np.where(scale > 0, scale, 1.0), 0.0)

    # the equivalent explicit inequality, divided through by e^{-g}
    inner = (r > 0.5) & (r < 1.0)
    ri = r[inner]
    q, w = 1.0 - ri, ri - 0.5
    big = 1.0 / q + profile.beta / w**2
    e = profile.alpha / q * np.exp(-profile.beta / w)
    ex_lhs = (1.0 + pc) * e * big**2 + 2.0 * profile.beta / w**3
    ex_rhs = big**2 + 1.0 / q**2 + kk / ri * big

    max_lhs = float(np.nanmax(lhs)) if len(lhs) else 0.0
    worst = int(np.argmax(rel)) if len(rel) else 0
    return CheckReport(
        "verify_condition_33",
        {"alpha": profile.alpha, "beta": profile.beta, "p": p, "n": n, "delta": delta,
         "grid_points": len(r), "window": window},
        {
            "max_lhs": max_lhs,
            "max_relative": float(rel[worst]) if len(rel) else 0.0,
            "r_at_max_relative": float(r[worst]) if len(r) else None,
            "violating_points": int(np.sum(bad)),
            "example_form_max_margin": float(np.max(ex_lhs - ex_rhs)) if len(ri) else 0.0,
            "example_form_violations": int(np.sum(ex_lhs > ex_rhs * (1 + 1e-12))),
        },
        metric=max_lhs,
        tolerance=1e-9,
        passed=not bool(np.any(bad)),
    )


@dataclass(frozen=True)
class CutoffBundle:
    profile: CutoffProfile = DEFAULT_PROFILE
    p: float = 2.0
    delta: float = 0.25
    n: int = 1
    R: float = 1.0

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if not 0 < self.delta <= 0.5:
            raise ValueError("delta must lie in (0, 1/2]")
        if not self.R > 0:
            raise ValueError("R must be positive")

    @property
    def p_conj(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def alpha_exp(self) -> float:
        return 2.0 - 2.0 * self.delta

    @property
    def power(self) -> float:
        return self.p_conj + 1.0


@dataclass(frozen=True, eq=False)
class ScaledTestFunction:
    """``Phi(t, x) = eta_R(t)^{p'+1} phi_R(x)^{p'+1}`` and the derivatives used in the weak form."""

    bundle: CutoffBundle
    table_size: int = 2048
    scheme: QuadratureScheme = field(default_factory=QuadratureScheme)

    @property
    def T(self) -> float:
        """Temporal support ``R^alpha``."""
        b = self.bundle
        return b.R**b.alpha_exp

    def _time_terms(self, t):
        b = self.bundle
        tt = np.asarray(t, dtype=float) / self.T
        logeta, l1, l2 = b.profile.log_terms(tt)
        p1, p2 = _power_log_derivs(l1, l2, b.power)
        return np.exp(b.power * logeta), p1, p2

    def eta_pow(self, t):
        return self._time_terms(t)[0]

    def d_eta_pow(self, t):
        """``d/dt eta_R^{p'+1}``; carries the factor ``R^{-alpha}``."""
        v, p1, _ = self._time_terms(t)
        return v * p1 / self.T

    def dd_eta_pow(self, t):
        """``d^2/dt^2 eta_R^{p'+1}``; carries the factor ``R^{-2 alpha}``."""
        v, _, p2 = self._time_terms(t)
        return v * p2 / self.T**2

    def _space_terms(self, r):
        b = self.bundle
        rr = np.asarray(r, dtype=float) / b.R
        logphi, l1, l2 = b.profile.log_terms(rr)
        p1, p2 = _power_log_derivs(l1, l2, b.power)
        return rr, np.exp(b.power * logphi), p1, p2

    def phi_pow(self, r):
        return self._space_terms(r)[1]

    def lap_phi_pow(self, r):
        """``Delta phi_R^{p'+1}`` in radial form; carries the factor ``R^{-2}``."""
        rr, v, p1, p2 = self._space_terms(r)
        n = self.bundle.n
        with np.errstate(invalid="ignore", divide="ignore"):
            radial = np.where(rr > 0, (n - 1) * p1 / np.where(rr > 0, rr, 1.0), 0.0)
        return v * (p2 + radial) / self.bundle.R**2

    def __call__(self, t, r):
        return self.eta_pow(t) * self.phi_pow(r)

    @cached_property
    def _frac_table(self):
        b = self.bundle
        radii = np.concatenate([[0.0], 64.0 * np.geomspace(1e-3, 1.0, self.table_size - 1)])
        pts = np.zeros((len(radii), b.n))
        pts[:, 0] = radii
        vals = frac_laplacian_quadrature(b.profile.as_radial(b.power), b.delta, pts, self.scheme, b.n)
        return CubicSpline(radii, vals)

    def frac_phi(self, r):
        """``(-Delta)^delta phi_R^{p'+1}`` on R^n via ``R^{-2 delta}`` times a cached unit-scale table."""
        b = self.bundle
        rr = np.asarray(r, dtype=float) / b.R
        return b.R ** (-2.0 * b.delta) * self._frac_table(np.minimum(rr, 64.0))


def build_scaled(bundle: CutoffBundle, **kwargs) -> ScaledTestFunction:
    return ScaledTestFunction(bundle, **kwargs)
