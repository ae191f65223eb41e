import math
import warnings

import numpy as np
import pytest
from scipy.linalg import expm

from dampwave.errors import (
    BlowupDetected,
    DegenerateFit,
    HypothesisViolated,
    NoBlowupObserved,
    SupportTooLarge,
    WindowTooShort,
)
from dampwave.fields import Grid, RealField, imaginary_residue, integrate
from dampwave.solver import (
    DataSpec,
    ResolutionWarning,
    SimConfig,
    State,
    Trajectory,
    estimate_lifespan,
    fit_decay_rate,
    initial_data,
    linear_propagator,
    run,
    step,
    verify_data_sign,
)
from dampwave.cutoffs import SMOOTH_PROFILE, CutoffBundle


def generator(xi, delta):
    return np.array([[0.0, 1.0], [-(xi**2), -(xi ** (2 * delta))]])


@pytest.mark.parametrize("xi", [0.0, 1e-4, 0.3, 1.0, 2.5, 40.0])
@pytest.mark.parametrize("delta", [0.1, 0.25, 0.5])
@pytest.mark.parametrize("dt", [1e-3, 0.05, 1.0])
def test_propagator_matches_expm(xi, delta, dt):
    got = linear_propagator(xi, delta, dt)
    ref = expm(generator(xi, delta) * dt)
    assert np.allclose(got, ref, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(ref).max()))


def test_propagator_free_drift():
    assert np.array_equal(linear_propagator(0.0, 0.25, 0.7), np.array([[1.0, 0.7], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        linear_propagator(1.0, 0.25, 0.0)


def test_propagator_continuous_across_repeated_root():
    # |xi|^{4 delta} = 4 |xi|^2 at |xi| = 4^{1/(4 delta - 2)}
    delta = 0.25
    xi0 = 4.0 ** (1.0 / (4 * delta - 2))
    for off in (-1e-7, -1e-9, 0.0, 1e-9, 1e-7):
        xi = xi0 * (1 + off)
        got = linear_propagator(xi, delta, 0.3)
        assert np.allclose(got, expm(generator(xi, delta) * 0.3), rtol=1e-10, atol=1e-12)


def test_oscillatory_decay_envelope():
    xi, delta, dt = 50.0, 0.25, 0.2
    ev = np.linalg.eigvals(generator(xi, delta))
    assert np.allclose(np.abs(ev.real), xi ** (2 * delta) / 2)
    m = linear_propagator(xi, delta, dt)
    assert np.linalg.norm(m, 2) <= math.exp(-(xi ** (2 * delta)) * dt / 2) * 4 * xi


def linear_config(**kw):
    base = dict(grid=Grid(1, 128, 40.0), delta=0.25, p=2.0, dt=0.05, t_max=1.0, nonlinear=False, truncation_tol=None)
    base.update(kw)
    return SimConfig(**base)


def test_zero_state_stays_zero():
    cfg = linear_config(nonlinear=True)
    g = cfg.grid
    z = RealField(g, np.zeros(g.shape))
    st = step(State.from_fields(0.0, z, z), cfg)
    assert np.all(st.u().values == 0) and np.all(st.v().values == 0)
    assert st.t == pytest.approx(0.05)


def test_single_mode_exact_over_1000_steps():
    g = Grid(1, 64, 2 * math.pi * 4)
    k = 3 * 2 * math.pi / (2 * g.half_width)
    x = g.axis
    cfg = linear_config(grid=g, dt=0.01, t_max=10.0)
    st = State.from_fields(0.0, RealField(g, np.cos(k * x)), RealField(g, 0.5 * np.cos(k * x)))
    for _ in range(1000):
        st = step(st, cfg)
    # closed form through the eigen decomposition of the mode generator
    lam = np.roots([1.0, k ** (2 * cfg.delta), k**2])
    c = np.linalg.solve(np.array([[1, 1], lam]), np.array([1.0, 0.5], dtype=complex))
    t = 10.0
    a = float(np.real(np.sum(c * np.exp(lam * t))))
    b = float(np.real(np.sum(c * lam * np.exp(lam * t))))
    assert np.allclose(st.u().values, a * np.cos(k * x), rtol=0, atol=1e-10 * abs(a) + 1e-14)
    assert np.allclose(st.v().values, b * np.cos(k * x), rtol=0, atol=1e-10 * abs(b) + 1e-14)


def smooth_state(g):
    x = g.axis
    return State.from_fields(0.0, RealField(g, 2 * np.exp(-x**2)), RealField(g, np.exp(-((x - 1) ** 2))))


def test_second_order_self_convergence():
    g = Grid(1, 256, 40.0)
    cfg = linear_config(grid=g, nonlinear=True, p=3.0)
    T = 0.8

    def integrate_to(dt):
        st = smooth_state(g)
        for _ in range(int(round(T / dt))):
            st = step(st, cfg, dt)
        return st.u().values

    a, b, c = integrate_to(0.1), integrate_to(0.05), integrate_to(0.025)
    ratio = np.linalg.norm(a - b) / np.linalg.norm(b - c)
    assert 3.5 <= ratio <= 4.5


def test_reality_preserved():
    g = Grid(2, 32, 20.0)
    cfg = linear_config(grid=g, nonlinear=True)
    st = State.from_fields(0.0, RealField(g, np.exp(-g.radius() ** 2)), RealField(g, np.zeros(g.shape)))
    for _ in range(20):
        st = step(st, cfg)
        assert imaginary_residue(st.u_hat) < 1e-10


def test_step_flags_blowup():
    g = Grid(1, 64, 20.0)
    cfg = linear_config(grid=g, nonlinear=True, blowup_threshold=1.5)
    st = smooth_state(g)
    with pytest.raises(BlowupDetected):
        step(st, cfg)


def test_linear_energy_nonincreasing():
    cfg = linear_config(grid=Grid(2, 64, 20.0), t_max=10.0, dt=0.1, data_spec=DataSpec({"kind": "gaussian"}, {"kind": "gaussian", "width": 1.5}))
    traj = run(cfg)
    E = traj.norms["ut_L2"] ** 2 + traj.norms["grad_L2"] ** 2
    assert np.all(np.diff(E) <= 1e-12 * E[:-1])


def test_run_is_deterministic():
    cfg = SimConfig(Grid(1, 256, 40.0), 0.25, 2.0, 0.05, 3.0, epsilon=0.3, truncation_tol=None)
    a, b = run(cfg), run(cfg)
    assert np.array_equal(a.times, b.times)
    for k in a.norms:
        assert np.array_equal(a.norms[k], b.norms[k])


def test_zero_data_decays_trivially():
    cfg = SimConfig(Grid(1, 128, 40.0), 0.25, 2.0, 0.1, 2.0, epsilon=0.0)
    traj = run(cfg)
    assert traj.outcome == "Decayed"
    assert np.all(traj.norms["H1"] == 0)
    with pytest.raises(DegenerateFit):
        fit_decay_rate(replace_times(traj), "L2", t_min=0.0)


def replace_times(traj):
    return Trajectory(traj.config, traj.times, traj.norms, traj.outcome)


def test_blowup_example():
    cfg = SimConfig(Grid(1, 1024, 40.0), 0.25, 2.0, 0.05, 60.0, epsilon=0.5, truncation_tol=None)
    traj = run(cfg)
    assert traj.outcome == "Blowup"
    assert 0 < traj.T_est < 60 and math.isfinite(traj.T_est)
    assert np.all(np.diff(traj.times) > 0)
    assert traj.T_est >= traj.times[-2]


def test_supercritical_small_data_decays():
    cfg = SimConfig(Grid(2, 64, 20.0), 0.25, 3.0, 0.1, 20.0, epsilon=0.01, truncation_tol=None, exclude_mean=True)
    traj = run(cfg)
    assert traj.outcome in ("Decayed", "MaxTimeReached")
    h = traj.norms["H1"][traj.times >= 5]
    assert h[-1] < h[0]


def test_lifespan_monotone_in_epsilon():
    base = SimConfig(Grid(1, 1024, 40.0), 0.25, 2.0, 0.05, 60.0, truncation_tol=None)
    T = [estimate_lifespan(SimConfig(**{**base.__dict__, "epsilon": e})) for e in (0.25, 0.5, 1.0)]
    assert T[0] > T[1] > T[2] > 0


def test_lifespan_needs_blowup_and_subcritical():
    base = SimConfig(Grid(1, 256, 40.0), 0.25, 2.0, 0.1, 1.0, epsilon=0.1, truncation_tol=None)
    with pytest.raises(NoBlowupObserved):
        estimate_lifespan(base)
    with pytest.raises(ValueError):
        estimate_lifespan(SimConfig(Grid(1, 256, 40.0), 0.25, 6.0, 0.1, 1.0))


def test_large_epsilon_short_lifespan():
    cfg = SimConfig(Grid(1, 1024, 40.0), 0.25, 2.0, 0.05, 20.0, epsilon=10.0, truncation_tol=None)
    T = estimate_lifespan(cfg)
    assert 0 < T < 2 * math.pi


def test_config_validation():
    g = Grid(1, 64, 20.0)
    with pytest.raises(ValueError):
        SimConfig(g, 0.0, 2.0, 0.1, 1.0)
    with pytest.raises(ValueError):
        SimConfig(g, 0.25, 1.0, 0.1, 1.0)
    with pytest.raises(ValueError):
        SimConfig(g, 0.25, 2.0, -0.1, 1.0)
    with pytest.raises(HypothesisViolated):
        SimConfig(g, 0.5, 2.0, 0.1, 1.0)


def test_initial_data_examples():
    g = Grid(1, 1024, 40.0)
    u0, u1 = initial_data(DataSpec(), g, 0.1)
    assert np.all(u0.values == 0)
    assert integrate(u1) == pytest.approx(0.1 * math.sqrt(math.pi), rel=1e-12)
    g2 = Grid(2, 256, 40.0)
    _, u1 = initial_data(DataSpec(u1={"kind": "gaussian", "width": 2.0}), g2, 0.1)
    assert integrate(u1) == pytest.approx(0.1 * (2 * math.sqrt(math.pi)) ** 2, rel=1e-12)
    with pytest.raises(SupportTooLarge):
        initial_data(DataSpec(u1={"kind": "gaussian", "width": 8.0}), g, 1.0)
    with pytest.raises(ValueError):
        initial_data(DataSpec(u1={"kind": "sphere"}), g, 1.0)


def test_data_sign_examples():
    g = Grid(1, 1024, 40.0)
    u0, u1 = initial_data(DataSpec(), g, 1.0)
    assert verify_data_sign(u0, u1, 0.25)["global"] > 0
    u0, u1 = initial_data(DataSpec({"kind": "gaussian"}, {"kind": "zero"}), g, 1.0)
    assert abs(verify_data_sign(u0, u1, 0.25)["global"]) < 1e-12
    u0, u1 = initial_data(DataSpec({"kind": "zero"}, {"kind": "dipole"}), g, 1.0)
    assert abs(verify_data_sign(u0, u1, 0.25)["global"]) < 1e-12
    u0, u1 = initial_data(DataSpec({"kind": "bump", "radius": 3.0}, {"kind": "bump", "radius": 3.0}), g, 0.01)
    res = verify_data_sign(u0, u1, 0.25, CutoffBundle(SMOOTH_PROFILE, p=2.0, delta=0.25, n=1, R=4.0))
    assert res["global"] == pytest.approx(integrate(u1), rel=1e-10) and res["global"] > 0
    assert res["localized"] > 0 and res["R"] == 4.0


def test_fit_decay_rate_on_synthetic_power_law():
    g = Grid(1, 64, 20.0)
    cfg = SimConfig(g, 0.25, 2.0, 0.1, 1.0)
    t = np.linspace(0, 50, 101)
    norms = {k: (1 + t) ** -0.7 for k in ("L1", "L2", "Linf", "H1", "ut_L2", "grad_L2")}
    traj = Trajectory(cfg, t, norms, "MaxTimeReached")
    assert fit_decay_rate(traj, "u_L2") == pytest.approx(-0.7, abs=1e-12)
    with pytest.raises(WindowTooShort):
        fit_decay_rate(Trajectory(cfg, t[:12], {k: v[:12] for k, v in norms.items()}, "MaxTimeReached"))


def test_resolution_warning_on_underresolved_run():
    cfg = SimConfig(Grid(1, 32, 40.0), 0.25, 2.0, 0.05, 1.0, data_spec=DataSpec(u1={"kind": "gaussian", "width": 0.3}), truncation_tol=None)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        traj = run(cfg)
    assert any(issubclass(w.category, ResolutionWarning) for w in caught)
    assert traj.warnings
