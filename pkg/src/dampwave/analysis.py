"""Test-function functionals on simulated solutions, scaling probes and parameter studies."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .cutoffs import CutoffBundle, build_scaled
from .errors import (
    CoverageError,
    DampwaveError,
    DegenerateFit,
    HypothesisViolated,
    NoBlowupObserved,
)
from .fields import RealField
from .fractional_ops import frac_laplacian_spectral
from .solver import SimConfig, Trajectory, estimate_lifespan, fit_decay_rate, initial_data, run

CRITICAL_TIE = 1e-12


def critical_exponent(n: int, delta: float) -> float:
    if not n > 2 * delta:
        raise HypothesisViolated(f"need n > 2 delta, got n={n}, delta={delta}")
    return 1.0 + 2.0 / (n - 2.0 * delta)


def classify_exponent(p: float, n: int, delta: float) -> str:
    if not p > 1:
        raise ValueError("p must exceed 1")
    pc = critical_exponent(n, delta)
    if abs(p - pc) <= CRITICAL_TIE:
        return "Critical"
    return "Subcritical" if p < pc else "Supercritical"


def lifespan_exponent(n: int, delta: float, p: float) -> float:
    """Exponent ``e`` of the upper bound ``T_eps <= C eps^e``."""
    critical_exponent(n, delta)
    return -2.0 * (1.0 - delta) * (p - 1.0) / (2.0 - (n - 2.0 * delta) * (p - 1.0))


def young_bound_check(A: float, gamma: float, y_samples) -> float:
    """Largest ``A y^gamma - y - A^{1/(1-gamma)}`` over the samples (nonpositive when the bound holds)."""
    if not A > 0 or not 0 < gamma < 1:
        raise ValueError("need A > 0 and gamma in (0, 1)")
    y = np.asarray(y_samples, dtype=float)
    if np.any(y < 0):
        raise ValueError("y samples must be nonnegative")
    with np.errstate(over="ignore"):
        # A^{1/(1-gamma)} may overflow to inf; the bound then holds trivially
        bound = np.float64(A) ** (1.0 / (1.0 - gamma))
        return float(np.max(A * y**gamma - y - bound))


def young_scale(A: float, gamma: float, y_samples) -> float:
    with np.errstate(over="ignore"):
        return max(1.0, float(np.float64(A) ** (1.0 / (1.0 - gamma))), float(np.max(y_samples)))


# ---------------------------------------------------------------------------
# functionals


@dataclass
class FunctionalReport:
    R: float
    I_R: float
    I_Rt: float
    I_Rx: float
    J1: float
    J2: float
    J3: float
    data_term: float
    identity_residual: float
    samples: int = 0

    @property
    def rhs(self) -> float:
        return -self.data_term + self.J1 - self.J2 - self.J3

    def to_dict(self) -> dict:
        return asdict(self)


def _trapezoid(y, t):
    return float(np.trapezoid(y, t)) if hasattr(np, "trapezoid") else float(np.trapz(y, t))


def compute_functionals(traj: Trajectory, bundle: CutoffBundle, R: float | None = None) -> FunctionalReport:
    """``I_R``, its time/space windows, the three ``J`` terms and the data term on the torus.

    The fractional term is transposed onto the test function, and both it and
    the data term use the spectral (torus) operator the solver integrates with.
    """
    if R is not None:
        bundle = replace(bundle, R=R)
    cfg = traj.config
    g = cfg.grid
    if traj.snapshots is None:
        raise CoverageError("trajectory carries no snapshots")
    if bundle.n != cfg.n or bundle.delta != cfg.delta or bundle.p != cfg.p:
        raise ValueError("bundle (n, delta, p) must match the trajectory")
    if bundle.R > g.half_width / 2:
        raise ValueError(f"R = {bundle.R} exceeds L/2 = {g.half_width / 2}")
    tf = build_scaled(bundle)
    T = tf.T
    times = traj.times
    if times[-1] < T * (1 - 1e-12):
        raise CoverageError(f"trajectory ends at t={times[-1]:.4g} before R^alpha={T:.4g}")
    stop = int(np.searchsorted(times, T * (1 - 1e-12))) + 1
    t = times[:stop]
    if np.sum(t <= T) < 64:
        raise CoverageError(f"only {int(np.sum(t <= T))} samples in [0, R^alpha]; need 64")
    u = traj.snapshots[:stop].reshape(stop, -1)

    r = g.radius()
    phi = tf.phi_pow(r)
    lap = tf.lap_phi_pow(r).ravel()
    frac = frac_laplacian_spectral(RealField(g, phi), cfg.delta).flat
    phi = phi.ravel()
    outer = (r.ravel() >= bundle.R / 2).astype(float)
    dv = g.cell_volume

    eta, deta, ddeta = tf.eta_pow(t), tf.d_eta_pow(t), tf.dd_eta_pow(t)
    up = np.abs(u) ** cfg.p
    mass = dv * up @ phi
    I_R = _trapezoid(eta * mass, t)
    I_Rt = _trapezoid(eta * mass * (t >= T / 2), t)
    I_Rx = _trapezoid(eta * (dv * up @ (phi * outer)), t)
    J1 = _trapezoid(ddeta * (dv * u @ phi), t)
    J2 = _trapezoid(eta * (dv * u @ lap), t)
    J3 = _trapezoid(deta * (dv * u @ frac), t)

    u0, u1 = initial_data(cfg.data_spec, g, cfg.epsilon)
    data = dv * float(u1.flat @ phi + u0.flat @ frac)
    rhs = -data + J1 - J2 - J3
    resid = abs(I_R - rhs) / max(I_R, abs(data), 1e-300)
    return FunctionalReport(bundle.R, I_R, I_Rt, I_Rx, J1, J2, J3, data, resid, samples=int(np.sum(t <= T)))


# ---------------------------------------------------------------------------
# scaling probes


def scaling_bounds(n: int, delta: float, p: float) -> dict:
    alpha = 2.0 - 2.0 * delta
    q = (n + alpha) * (p - 1.0) / p
    return {"J1": -2.0 * alpha + q, "J2": -2.0 + q, "J3": -alpha - 2.0 * delta + q}


@dataclass
class ScalingProbe:
    R_list: list
    slopes: dict
    bounds: dict
    passed: dict
    reports: list = field(default_factory=list)
    skipped: bool = False
    slack: float = 0.3

    @property
    def all_passed(self) -> bool:
        return self.skipped or all(self.passed.values())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["all_passed"] = self.all_passed
        return d


def probe_scaling_estimates(config: SimConfig | Trajectory, bundle: CutoffBundle, R_list, slack: float = 0.3):
    """Slopes of ``log(|J_i| / I_window^{1/p})`` against ``log R``, compared with the bound exponents."""
    R_list = sorted(float(r) for r in R_list)
    if len(R_list) < 4:
        raise ValueError("need at least four radii")
    traj = config if isinstance(config, Trajectory) else run(replace(config, snapshots=True))
    reports = [compute_functionals(traj, bundle, R) for R in R_list]
    bounds = scaling_bounds(bundle.n, bundle.delta, bundle.p)
    if all(rep.I_R == 0 and rep.J1 == rep.J2 == rep.J3 == 0 for rep in reports):
        return ScalingProbe(R_list, {}, bounds, {}, reports, skipped=True, slack=slack)
    p = bundle.p
    x = np.log(R_list)
    slopes, passed = {}, {}
    for key, window in (("J1", "I_Rt"), ("J2", "I_Rx"), ("J3", "I_Rt")):
        num = np.array([abs(getattr(rep, key)) for rep in reports])
        den = np.array([getattr(rep, window) for rep in reports]) ** (1.0 / p)
        if np.any(num <= 1e-300) or np.any(den <= 1e-300):
            raise DegenerateFit(f"{key} or its window functional underflows")
        slopes[key] = float(np.polyfit(x, np.log(num / den), 1)[0])
        passed[key] = slopes[key] <= bounds[key] + slack
    return ScalingProbe(R_list, slopes, bounds, passed, reports, slack=slack)


# ---------------------------------------------------------------------------
# lifespan and criticality studies


@dataclass
class LifespanRecord:
    epsilons: list
    lifespans: list
    fitted_slope: float
    bound_exponent: float
    excluded: list = field(default_factory=list)
    failures: dict = field(default_factory=dict)
    details: list = field(default_factory=list)

    @property
    def monotone(self) -> bool:
        T = self.lifespans
        return all(b > a for a, b in zip(T, T[1:]))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["monotone"] = self.monotone
        return d


def _pmap(func, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(func, items))
    return [func(x) for x in items]


def lifespan_sweep(base_config: SimConfig, epsilons, threads: int = 1, period: float = 2 * math.pi) -> LifespanRecord:
    """Lifespan per ``epsilon`` and the slope of ``log T`` against ``log epsilon``.

    The largest ``epsilon`` is left out of the fit when its lifespan is shorter
    than three linear periods (``period`` is the oscillation period of the data scale).
    """
    eps = sorted((float(e) for e in epsilons), reverse=True)
    if len(eps) < 4:
        raise ValueError("need at least four epsilons")
    if classify_exponent(base_config.p, base_config.n, base_config.delta) != "Subcritical":
        raise ValueError("lifespan sweep needs a subcritical exponent")

    def one(e):
        try:
            T, info = estimate_lifespan(replace(base_config, epsilon=e), return_details=True)
            return e, T, info, None
        except NoBlowupObserved as exc:
            return e, None, None, str(exc)

    results = _pmap(one, eps, threads)
    failures = {e: msg for e, _, _, msg in results if msg is not None}
    good = [(e, T, info) for e, T, info, msg in results if msg is None]
    excluded = []
    if good and good[0][0] == eps[0] and good[0][1] < 3 * period:
        excluded.append(good[0][0])
    fit = [(e, T) for e, T, _ in good if e not in excluded]
    slope = float(np.polyfit(np.log([e for e, _ in fit]), np.log([T for _, T in fit]), 1)[0]) if len(fit) >= 2 else math.nan
    return LifespanRecord(
        epsilons=[e for e, _, _ in good],
        lifespans=[T for _, T, _ in good],
        fitted_slope=slope,
        bound_exponent=lifespan_exponent(base_config.n, base_config.delta, base_config.p),
        excluded=excluded,
        failures=failures,
        details=[{"epsilon": e, **info} for e, _, info in good],
    )


def h1_nonincreasing(traj: Trajectory, t_min: float = 5.0, rtol: float = 1e-9) -> bool:
    h = traj.norms["H1"][traj.times >= t_min]
    return bool(len(h) > 1 and np.all(np.diff(h) <= rtol * h[:-1]))


def criticality_scan(n, delta, p_list, epsilon, t_max, base_config: SimConfig | None = None, threads: int = 1) -> list[dict]:
    """One row per ``p``: classification, outcome, blow-up time or H1 decay slope."""
    if base_config is None:
        raise ValueError("base_config supplies grid, dt and data")

    def one(p):
        row = {"p": float(p), "classification": classify_exponent(p, n, delta)}
        try:
            cfg = replace(base_config, p=float(p), delta=delta, epsilon=epsilon, t_max=t_max)
            if cfg.n != n:
                raise ValueError("base_config grid dimension differs from n")
            traj = run(cfg)
            row["outcome"] = traj.outcome
            row["T_est"] = traj.T_est
            if traj.outcome != "Blowup":
                row["h1_nonincreasing"] = h1_nonincreasing(traj)
                try:
                    row["h1_slope"] = fit_decay_rate(traj, "H1")
                except DampwaveError as exc:
                    row["error"] = f"{type(exc).__name__}: {exc}"
        except (DampwaveError, ValueError) as exc:
            row["outcome"] = "Error"
            row["error"] = f"{type(exc).__name__}: {exc}"
        return row

    return sorted(_pmap(one, list(p_list), threads), key=lambda r: r["p"])
