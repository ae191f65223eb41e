"""Verification suites for the fractional operators and the cutoff certificates.

Each suite returns a list of ``CheckReport``; the CLI serializes them and
the exit code follows ``all(r.passed)``.
"""

from __future__ import annotations

import numpy as np

from .cutoffs import (
    DEFAULT_PROFILE,
    SMOOTH_PROFILE,
    CutoffProfile,
    verify_condition_31,
    verify_condition_32,
    verify_condition_33,
)
from .fields import Grid
from .fractional_ops import (
    CheckReport,
    QuadratureScheme,
    algebraic_profile,
    check_decay,
    check_pointwise_inequality,
    check_radial_criterion,
    check_scaling,
    check_scaling_spectral,
    frac_laplacian_quadrature_periodic,
    frac_laplacian_spectral,
    gaussian_profile,
)

ADVERSARIAL_PROFILE = CutoffProfile(alpha=0.4, beta=1.0)


def probe_nodes(grid: Grid, count: int = 20, radius: float | None = None, seed: int = 0) -> np.ndarray:
    """``count`` distinct grid nodes with ``|x| <= radius`` (default ``L/2``), as an index array."""
    radius = grid.half_width / 2 if radius is None else radius
    rng = np.random.default_rng(seed)
    r = grid.radius()
    idx = np.argwhere(r <= radius)
    pick = rng.choice(len(idx), size=min(count, len(idx)), replace=False)
    return idx[np.sort(pick)]


def check_consistency(psi, s: float, grid: Grid, count: int = 20, radius=None, tol=1e-3, scheme=None) -> CheckReport:
    """Spectral operator on ``grid`` against whole-space quadrature plus the periodic image correction."""
    field = grid.sample(lambda *c: psi.radial(np.sqrt(sum(a * a for a in c))))
    spec = frac_laplacian_spectral(field, s).values
    nodes = probe_nodes(grid, count, radius)
    axis = grid.axis
    pts = axis[nodes]
    quad = frac_laplacian_quadrature_periodic(psi, s, pts, grid.half_width, scheme, grid.dimension)
    got = spec[tuple(nodes.T)]
    scale = float(np.max(np.abs(quad)))
    worst = float(np.max(np.abs(got - quad))) / scale
    return CheckReport(
        "check_consistency",
        {"profile": psi.name, "s": s, "grid": grid.to_dict(), "points": len(pts)},
        {"points": pts, "spectral": got, "quadrature": quad},
        metric=worst,
        tolerance=tol,
        passed=worst <= tol,
    )


def consistency_cases():
    """(profile, s, grid) triples: Gaussian and the smooth admissible cutoff at radius 4."""
    cutoff = SMOOTH_PROFILE.as_radial().scaled(4.0)
    out = []
    for s in (0.25, 0.5):
        out.append((gaussian_profile(1.0), s, Grid(1, 512, 20.0)))
        out.append((gaussian_profile(1.0), s, Grid(2, 256, 20.0)))
        out.append((cutoff, s, Grid(1, 2048, 20.0)))
        out.append((cutoff, s, Grid(2, 2048, 20.0)))
    return out


def operator_suite(scheme: QuadratureScheme | None = None, quick: bool = False) -> list[CheckReport]:
    reports = []
    cases = consistency_cases()
    if quick:
        cases = [c for c in cases if c[2].dimension == 1 or c[2].points_per_axis <= 256]
    for psi, s, grid in cases:
        reports.append(check_consistency(psi, s, grid, scheme=scheme))
    reports.extend(inequality_checks(scheme))
    reports.extend(positivity_checks(scheme))
    reports.extend(scaling_checks(scheme))
    reports.extend(decay_checks(scheme))
    return reports


def inequality_checks(scheme=None, p: float = 2.0) -> list[CheckReport]:
    pc = p / (p - 1.0)
    out = []
    profiles = (gaussian_profile(1.0), DEFAULT_PROFILE.as_radial())
    for psi in profiles:
        for n in (1, 2):
            x = np.linspace(0.0, 1.6 if psi.support else 3.0, 12)
            pts = np.zeros((len(x), n))
            pts[:, 0] = x
            if n == 2:
                pts[:, 1] = 0.3 * x
            for s in (0.25, 0.5):
                for l in (1.0, 2.0, pc + 1.0):
                    out.append(check_pointwise_inequality(psi, l, s, pts, n, scheme))
    return out


def positivity_checks(scheme=None, p: float = 2.0, count: int = 200) -> list[CheckReport]:
    """Implication checks: criterion holds on all samples => nonnegative values.

    Cutoff powers never satisfy the criterion on all of ``(1/2, 1)`` (the
    implication is then vacuous and reported as such); the algebraic profile
    ``(1 + r^2)^{-(n-2s)/2}`` satisfies it globally and serves as control.
    """
    pc = p / (p - 1.0)
    out = []
    for n, s in ((1, 0.25), (2, 0.25)):
        r = np.geomspace(1e-3, 50.0, count)
        rep = check_radial_criterion(algebraic_profile(n - 2 * s), n, s, r, scheme)
        out.append(rep)
        rc = np.linspace(0.0, 1.5, count + 1)[1:]
        psi = SMOOTH_PROFILE.as_radial(pc + 1.0)
        rep = check_radial_criterion(psi, n, s, rc, scheme, validate=False)
        out.append(rep)
    return out


def scaling_checks(scheme=None) -> list[CheckReport]:
    out = []
    for psi in (gaussian_profile(1.0), SMOOTH_PROFILE.as_radial()):
        for n in (1, 2):
            x = np.linspace(0.1, 1.5, 6)
            pts = np.zeros((len(x), n))
            pts[:, 0] = x
            for s in (0.25, 0.5):
                for R in (1.0, 4.0, 8.0):
                    out.append(check_scaling(psi, s, R, pts * R, n, scheme))
    for s in (0.25, 0.5):
        for R in (1.0, 4.0, 8.0):
            out.append(check_scaling_spectral(gaussian_profile(1.0), s, R, Grid(1, 2048, 20.0 * R)))
            out.append(check_scaling_spectral(SMOOTH_PROFILE.as_radial(), s, R, Grid(2, 256, 4.0 * R)))
    return out


def decay_checks(scheme=None) -> list[CheckReport]:
    out = []
    for psi in (gaussian_profile(1.0), DEFAULT_PROFILE.as_radial()):
        for n, s in ((1, 0.5), (2, 0.25)):
            out.append(check_decay(psi, s, np.geomspace(8.0, 64.0, 8), n, scheme))
    return out


def testfn_suite(profile: CutoffProfile = DEFAULT_PROFILE, cases=((2, 1, 0.25), (2, 2, 0.25), (2, 1, 0.5)), window=0.1):
    """Finite sups for the first two conditions, the third on the full interval and on a window, plus the adversarial control.

    The adversarial report is inverted: it passes when the condition fails.
    """
    out = []
    for p, n, delta in cases:
        out.append(verify_condition_31(profile, p))
        out.append(verify_condition_32(profile, p, n))
        out.append(verify_condition_33(profile, p, n, delta))
        windowed = verify_condition_33(profile, p, n, delta, window=window)
        windowed.operation = "verify_condition_33_window"
        out.append(windowed)
    for p, n, delta in cases:
        adv = verify_condition_33(ADVERSARIAL_PROFILE, p, n, delta)
        adv.operation = "verify_condition_33_adversarial"
        adv.notes.append("expected to fail; passed means the failure was detected")
        adv.passed = not adv.passed and adv.values["max_lhs"] > 0
        out.append(adv)
    return out
