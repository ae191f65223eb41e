import math

import mpmath
import numpy as np
import pytest
from scipy.special import gamma, hyp1f1

from dampwave.cutoffs import DEFAULT_PROFILE, SMOOTH_PROFILE
from dampwave.errors import DegenerateFit, DerivativeMismatch, GridMismatch
from dampwave.fields import Grid, RealField, forward_transform
from dampwave.fractional_ops import (
    RadialProfile,
    algebraic_profile,
    check_decay,
    check_pointwise_inequality,
    check_radial_criterion,
    check_scaling,
    check_scaling_spectral,
    frac_laplacian_quadrature,
    frac_laplacian_quadrature_periodic,
    frac_laplacian_spectral,
    gaussian_profile,
    normalization_constant,
    parseval_symmetry_check,
    periodic_image_correction,
    profile_moments,
)


def gaussian_oracle(r, n, s):
    """Closed form of (-Delta)^s exp(-|x|^2) via Kummer's function."""
    return 4**s * gamma(n / 2 + s) / gamma(n / 2) * hyp1f1(n / 2 + s, n / 2, -np.asarray(r) ** 2)


def algebraic_oracle(r, n, s):
    """(-Delta)^s (1 + r^2)^{-(n-2s)/2} = c (1 + r^2)^{-(n+2s)/2}."""
    c = 4**s * gamma((n + 2 * s) / 2) / gamma((n - 2 * s) / 2)
    return c * (1 + np.asarray(r) ** 2) ** (-(n + 2 * s) / 2)


def pts_on_axis(r, n):
    p = np.zeros((len(r), n))
    p[:, 0] = r
    return p


# ---------------------------------------------------------------------------
# normalization constant


def test_constant_n1_half():
    assert normalization_constant(1, 0.5) == pytest.approx(1 / math.pi, rel=1e-14)


def test_constant_matches_high_precision():
    for n, s in ((2, 0.25), (1, 0.3), (3, 0.75)):
        mpmath.mp.dps = 30
        ref = 4**s * mpmath.gamma(n / 2 + s) / (mpmath.pi ** (n / 2) * abs(mpmath.gamma(-s)))
        assert normalization_constant(n, s) == pytest.approx(float(ref), rel=1e-12)


def test_constant_vanishes_as_s_to_zero():
    vals = [normalization_constant(2, s) for s in (1e-2, 1e-4, 1e-6)]
    assert vals[0] > vals[1] > vals[2] > 0
    assert vals[2] < 1e-5


# ---------------------------------------------------------------------------
# spectral operator


def test_spectral_constant_and_mode():
    g = Grid(1, 64, 4.0)
    assert np.max(np.abs(frac_laplacian_spectral(RealField(g, np.full(64, 3.0)), 0.3).values)) < 1e-14
    xi = 5 * math.pi / 4.0
    f = g.sample(lambda x: np.cos(xi * x))
    out = frac_laplacian_spectral(f, 0.3).values
    assert np.max(np.abs(out - xi**0.6 * f.values)) < 1e-12


def test_spectral_gaussian_closed_form_with_images():
    psi = gaussian_profile(1.0)
    for n, N, s in ((1, 512, 0.25), (2, 256, 0.5)):
        g = Grid(n, N, 20.0)
        f = g.sample(lambda *c: np.exp(-sum(a * a for a in c)))
        out = frac_laplacian_spectral(f, s).values
        centre = tuple([N // 2] * n)
        origin = np.zeros((1, n))
        images = periodic_image_correction(profile_moments(psi, n), s, n, 20.0, origin)[0]
        assert out[centre] == pytest.approx(gaussian_oracle(0.0, n, s) + images, rel=1e-8)


def test_torus_gap_without_images():
    # the torus operator differs from the whole-space one by the image sum
    g = Grid(1, 512, 20.0)
    f = g.sample(lambda x: np.exp(-x * x))
    gap = abs(frac_laplacian_spectral(f, 0.25).values[256] / gaussian_oracle(0.0, 1, 0.25) - 1)
    assert 1e-3 < gap < 1e-2


def test_spectral_s_one_is_laplacian():
    g = Grid(1, 128, 10.0)
    f = g.sample(lambda x: np.exp(-x * x))
    lap = g.sample(lambda x: -(4 * x * x - 2) * np.exp(-x * x))
    assert np.max(np.abs(frac_laplacian_spectral(f, 1.0).values - lap.values)) < 1e-10


# ---------------------------------------------------------------------------
# quadrature against closed forms


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_quadrature_gaussian_closed_form(n, s):
    r = np.array([0.0, 0.4, 1.0, 2.2, 4.0])
    got = frac_laplacian_quadrature(gaussian_profile(1.0), s, pts_on_axis(r, n), n=n)
    ref = gaussian_oracle(r, n, s)
    assert np.max(np.abs(got - ref)) < 1e-8 * max(1.0, np.max(np.abs(ref)))


@pytest.mark.parametrize("n,s", [(1, 0.25), (2, 0.25), (2, 0.5), (3, 0.5)])
def test_quadrature_algebraic_closed_form(n, s):
    r = np.array([0.0, 0.7, 3.0, 12.0])
    got = frac_laplacian_quadrature(algebraic_profile(n - 2 * s), s, pts_on_axis(r, n), n=n)
    ref = algebraic_oracle(r, n, s)
    assert np.max(np.abs(got - ref) / np.abs(ref)) < 1e-7


def test_quadrature_constant_is_zero():
    const = RadialProfile(lambda r: np.full_like(r, 2.0), knots=(1.0,), support=None, name="const", limit=2.0)
    got = frac_laplacian_quadrature(const, 0.4, pts_on_axis(np.array([0.0, 1.0, 7.5]), 2), n=2)
    assert np.max(np.abs(got)) < 1e-14


def test_quadrature_limit_shift_invariance():
    g = gaussian_profile(1.0)
    shifted = RadialProfile(lambda r: g.func(r) + 3.0, g.knots, g.support, g.decay, name="g+3", limit=3.0)
    pts = pts_on_axis(np.array([0.0, 0.8, 2.5]), 1)
    a = frac_laplacian_quadrature(g, 0.3, pts, n=1)
    b = frac_laplacian_quadrature(shifted, 0.3, pts, n=1)
    assert np.max(np.abs(a - b)) < 1e-10


def test_cross_implementation_gaussian_origin():
    g = Grid(1, 512, 20.0)
    f = g.sample(lambda x: np.exp(-x * x))
    for s in (0.25, 0.5):
        spec = frac_laplacian_spectral(f, s).values[256]
        quad = frac_laplacian_quadrature_periodic(gaussian_profile(1.0), s, np.array([[0.0]]), 20.0, n=1)[0]
        assert spec == pytest.approx(quad, rel=1e-6)


def test_periodic_correction_closes_the_gap():
    g = Grid(2, 256, 20.0)
    f = g.sample(lambda x, y: np.exp(-x * x - y * y))
    spec = frac_laplacian_spectral(f, 0.5).values
    idx = [(128, 128), (140, 128), (160, 150), (128, 180)]
    pts = np.array([[g.axis[i], g.axis[j]] for i, j in idx])
    per = frac_laplacian_quadrature_periodic(gaussian_profile(1.0), 0.5, pts, 20.0, n=2)
    got = np.array([spec[i, j] for i, j in idx])
    assert np.max(np.abs(got - per)) < 1e-6 * np.max(np.abs(per))


# ---------------------------------------------------------------------------
# lemma checks


def test_inequality_identity_case():
    rep = check_pointwise_inequality(gaussian_profile(1.0), 1.0, 0.3, np.linspace(-2, 2, 5), n=1)
    assert rep.metric == 0.0 and rep.passed


def test_inequality_gaussian_square():
    rep = check_pointwise_inequality(gaussian_profile(1.0), 2.0, 0.5, np.linspace(-3, 3, 20), n=1)
    assert rep.passed


def test_inequality_cutoff_power():
    pts = pts_on_axis(np.linspace(0.0, 1.5, 16), 2)
    rep = check_pointwise_inequality(DEFAULT_PROFILE.as_radial(), 3.0, 0.25, pts, n=2)
    assert rep.passed


def test_inequality_rejects_small_exponent():
    with pytest.raises(ValueError):
        check_pointwise_inequality(gaussian_profile(1.0), 0.5, 0.3, [0.0], n=1)


def test_radial_criterion_gaussian_not_applicable():
    rep = check_radial_criterion(gaussian_profile(1.0), 1, 0.5, np.array([0.5, 1.0, 2.0]))
    assert rep.values["criterion_lhs"][2] > 0
    assert "criterion_holds=False" in rep.notes
    assert rep.passed  # nothing is claimed


def test_radial_criterion_algebraic_holds_and_positive():
    rep = check_radial_criterion(algebraic_profile(1.5), 2, 0.25, np.geomspace(1e-2, 30, 40))
    assert "criterion_holds=True" in rep.notes
    assert rep.values["min_frac"] > 0 and rep.passed


def test_radial_criterion_cutoff_uniform_vs_clustered():
    psi = DEFAULT_PROFILE.as_radial(3.0)
    uniform = np.linspace(0.5, 1.0, 1002)[1:-1]
    rep = check_radial_criterion(psi, 2, 0.25, uniform, quadrature=False)
    assert "criterion_holds=True" in rep.notes
    near_one = 1.0 - np.geomspace(1e-14, 1e-3, 400)
    rep = check_radial_criterion(psi, 2, 0.25, near_one, quadrature=False, validate=False)
    assert "criterion_holds=False" in rep.notes


def test_radial_criterion_wrong_derivative():
    g = gaussian_profile(1.0)
    bad = RadialProfile(g.func, g.knots, g.support, g.decay, d1=lambda r: -2.0 * r * np.exp(-r * r) * 1.01, d2=g.d2, name="bad")
    with pytest.raises(DerivativeMismatch):
        check_radial_criterion(bad, 1, 0.5, np.linspace(0.1, 3, 30))


def test_cutoff_sign_pattern():
    psi = DEFAULT_PROFILE.as_radial()
    inside = frac_laplacian_quadrature(psi, 0.25, pts_on_axis(np.linspace(0, 0.5, 6), 2), n=2)
    outside = frac_laplacian_quadrature(psi, 0.25, pts_on_axis(np.array([1.1, 1.5, 3.0]), 2), n=2)
    assert np.all(inside > 0)
    assert np.all(outside < 0)


def test_scaling_identity_and_examples():
    assert check_scaling(gaussian_profile(1.0), 0.5, 1.0, [0.0, 1.0], n=1).metric < 1e-12
    assert check_scaling(gaussian_profile(1.0), 0.5, 4.0, [0.0, 1.0, 2.0], n=1).passed
    pts = pts_on_axis(np.array([0.5, 3.0, 7.0]), 2)
    assert check_scaling(SMOOTH_PROFILE.as_radial(), 0.25, 8.0, pts, n=2).passed


def test_scaling_spectral():
    rep = check_scaling_spectral(gaussian_profile(1.0), 0.25, 4.0, Grid(1, 1024, 80.0))
    assert rep.passed


def test_decay_examples():
    g = gaussian_profile(1.0)
    radii = np.geomspace(5, 50, 8)
    half = check_decay(g, 0.5, radii, 1)
    quarter = check_decay(g, 0.25, radii, 1)
    assert half.metric == pytest.approx(-2.0, abs=0.1)
    assert half.metric - quarter.metric == pytest.approx(-0.5, abs=0.05)
    cut = check_decay(DEFAULT_PROFILE.as_radial(), 0.25, radii, 2)
    assert cut.metric <= -2.4


def test_decay_underflow():
    tiny = RadialProfile(lambda r: np.zeros_like(np.asarray(r, dtype=float)), knots=(1.0,), support=1.0, decay=None, name="zero")
    with pytest.raises(DegenerateFit):
        check_decay(tiny, 0.5, [5.0, 10.0], 1)


def test_parseval_examples():
    g = Grid(1, 256, 20.0)
    a = g.sample(lambda x: np.exp(-x * x))
    b = g.sample(lambda x: np.exp(-((x - 1.3) ** 2)))
    assert parseval_symmetry_check(a, a, 0.5) == 0.0
    assert parseval_symmetry_check(a, b, 0.25) <= 1e-10
    rng = np.random.default_rng(3)
    c = np.zeros(256, complex)
    c[1:20] = rng.normal(size=19) + 1j * rng.normal(size=19)
    v1 = RealField(g, np.fft.irfft(c[:129], 256))
    c[1:20] = rng.normal(size=19) + 1j * rng.normal(size=19)
    v2 = RealField(g, np.fft.irfft(c[:129], 256))
    assert parseval_symmetry_check(v1, v2, 0.5) <= 1e-10
    with pytest.raises(GridMismatch):
        parseval_symmetry_check(a, RealField(Grid(1, 256, 10.0), a.values), 0.5)


def test_report_serializes():
    rep = check_scaling(gaussian_profile(1.0), 0.5, 2.0, [0.0, 1.0], n=1)
    d = rep.to_dict()
    assert d["operation"] == "check_scaling" and isinstance(d["values"]["lhs"], list)
    assert '"passed": true' in rep.to_json()
