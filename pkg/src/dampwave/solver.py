"""Pseudospectral integration of ``u_tt - Delta u + (-Delta)^delta u_t = |u|^p``.

Each Fourier mode of the linear part is advanced exactly (2x2 matrix
exponential), the nonlinearity is a real-space kick ``v += dt |u|^p`` with
two-thirds dealiasing, composed in Strang fashion. Internally states are raw
``numpy.fft.fftn`` arrays; the public ``State`` wraps them as ``SpectralField``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import _kernels
from .cutoffs import CutoffProfile, SMOOTH_PROFILE
from .errors import (
    BlowupDetected,
    DegenerateFit,
    HypothesisViolated,
    NoBlowupObserved,
    NonFiniteField,
    SupportTooLarge,
    TruncationContaminated,
    WindowTooShort,
)
from .fields import Grid, RealField, SpectralField, forward_transform, integrate

log = logging.getLogger(__name__)

NORM_KEYS = ("L1", "L2", "Linf", "H1", "ut_L2", "grad_L2")


class ResolutionWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# configuration and initial data


def _blob(spec: dict, grid: Grid) -> np.ndarray:
    kind = spec.get("kind", "zero")
    coords = grid.coordinates()
    center = spec.get("center", 0.0)
    center = [center] * grid.dimension if np.isscalar(center) else list(center)
    shifted = [c - c0 for c, c0 in zip(coords, center)]
    r = np.sqrt(sum(c * c for c in shifted))
    amp = spec.get("amplitude", 1.0)
    if kind == "zero":
        return np.zeros(grid.shape)
    if kind == "gaussian":
        return amp * np.exp(-((r / spec.get("width", 1.0)) ** 2))
    if kind == "dipole":
        w = spec.get("width", 1.0)
        return amp * shifted[0] / w * np.exp(-((r / w) ** 2))
    if kind == "bump":
        prof = CutoffProfile(spec.get("alpha", SMOOTH_PROFILE.alpha), spec.get("beta", SMOOTH_PROFILE.beta))
        return amp * prof.as_radial().radial(r / spec.get("radius", 1.0))
    raise ValueError(f"unknown data kind {kind!r}")


@dataclass(frozen=True)
class DataSpec:
    """Initial data catalog entries: ``zero``, ``gaussian``, ``bump``, ``dipole``."""

    u0: dict = field(default_factory=lambda: {"kind": "zero"})
    u1: dict = field(default_factory=lambda: {"kind": "gaussian", "width": 1.0})


def initial_data(spec: DataSpec, grid: Grid, epsilon: float) -> tuple[RealField, RealField]:
    out = []
    r = grid.radius()
    for part in (spec.u0, spec.u1):
        vals = epsilon * _blob(part, grid)
        outside = r > grid.half_width / 2
        if np.any(np.abs(vals[outside]) > 1e-12 * max(float(np.max(np.abs(vals))), 1e-300)) and np.any(vals):
            raise SupportTooLarge(f"{part.get('kind')} data exceeds 1e-12 beyond |x| = L/2")
        out.append(RealField(grid, vals))
    return out[0], out[1]


@dataclass(frozen=True)
class SimConfig:
    grid: Grid
    delta: float
    p: float
    dt: float
    t_max: float
    epsilon: float = 1.0
    data_spec: DataSpec = field(default_factory=DataSpec)
    blowup_threshold: float = 1e8
    record_every: int = 1
    nonlinear: bool = True
    snapshots: bool = False
    exclude_mean: bool = False
    truncation_tol: float | None = 5e-2
    nonlinear_cfl: float = 0.1
    strict_cfl: bool = False

    def __post_init__(self):
        if self.grid.dimension not in (1, 2):
            raise ValueError("the solver supports n in {1, 2}")
        if not 0 < self.delta <= 0.5:
            raise ValueError("delta must lie in (0, 1/2]")
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if not self.n > 2 * self.delta:
            raise HypothesisViolated(f"need n > 2 delta, got n={self.n}, delta={self.delta}")
        if not (self.dt > 0 and self.t_max > 0 and self.blowup_threshold > 0 and self.epsilon >= 0):
            raise ValueError("dt, t_max, blowup_threshold must be positive and epsilon nonnegative")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    @property
    def n(self) -> int:
        return self.grid.dimension

    def to_dict(self) -> dict:
        d = asdict(self)
        d["grid"] = self.grid.to_dict()
        d["n"] = self.n
        return d


# ---------------------------------------------------------------------------
# states and trajectories


@dataclass(frozen=True, eq=False)
class State:
    t: float
    u_hat: SpectralField
    v_hat: SpectralField

    @classmethod
    def from_fields(cls, t, u: RealField, v: RealField) -> "State":
        return cls(t, forward_transform(u), forward_transform(v))

    def _raw(self):
        g = self.u_hat.grid
        scale = g.cell_volume * g._phase
        return self.u_hat.coefficients / scale, self.v_hat.coefficients / scale

    @classmethod
    def _from_raw(cls, grid, t, uh, vh):
        scale = grid.cell_volume * grid._phase
        return cls(t, SpectralField(grid, uh * scale), SpectralField(grid, vh * scale))

    def u(self) -> RealField:
        uh, _ = self._raw()
        return RealField(self.u_hat.grid, np.fft.ifftn(uh).real)

    def v(self) -> RealField:
        _, vh = self._raw()
        return RealField(self.u_hat.grid, np.fft.ifftn(vh).real)


@dataclass
class Trajectory:
    config: SimConfig
    times: np.ndarray
    norms: dict
    outcome: str
    T_est: float | None = None
    snapshots: np.ndarray | None = None
    steps: int = 0
    warnings: list[str] = field(default_factory=list)

    def norm(self, key: str) -> np.ndarray:
        return self.norms[key]

    def to_rows(self):
        for i, t in enumerate(self.times):
            yield [t] + [self.norms[k][i] for k in NORM_KEYS]

    def summary(self) -> dict:
        return {
            "outcome": self.outcome,
            "T_est": self.T_est,
            "t_final": float(self.times[-1]),
            "steps": self.steps,
            "records": len(self.times),
            "warnings": list(self.warnings),
        }


# ---------------------------------------------------------------------------
# linear propagator and the split step


def linear_propagator(xi_abs: float, delta: float, dt: float) -> np.ndarray:
    """Exact flow map of ``u'' + |xi|^{2 delta} u' + |xi|^2 u = 0`` over ``dt``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    m = _kernels.propagator_coefficients(np.array([float(xi_abs)]), delta, dt)
    return np.array([[m[0][0], m[1][0]], [m[2][0], m[3][0]]])


class Stepper:
    """Caches propagators and masks for one configuration."""

    def __init__(self, config: SimConfig):
        self.config = config
        g = config.grid
        self.grid = g
        self._props = {}
        keep = np.abs(g.modes) <= g.points_per_axis // 3
        mask = keep
        for _ in range(g.dimension - 1):
            mask = np.multiply.outer(mask, keep)
        self.dealias = mask.astype(float)
        grad = np.zeros(g.shape)
        nyq = g.points_per_axis // 2
        for axis, k in enumerate(g.wavevectors()):
            k = k.copy()
            idx = [slice(None)] * g.dimension
            idx[axis] = nyq
            k[tuple(idx)] = 0.0
            grad += k * k
        self.grad2 = grad
        top = np.abs(g.modes) > g.points_per_axis // 4
        octave = top
        for _ in range(g.dimension - 1):
            octave = np.add.outer(octave.astype(int), top.astype(int)) > 0
        self.top_octave = octave

    def propagator(self, dt):
        key = float(dt)
        coeffs = self._props.get(key)
        if coeffs is None:
            if len(self._props) > 64:
                self._props.clear()
            coeffs = _kernels.propagator_coefficients(self.grid.xi_abs, self.config.delta, dt)
            self._props[key] = coeffs
        return coeffs

    def advance(self, uh, vh, dt):
        half = self.propagator(0.5 * dt)
        uh, vh = _kernels.apply_propagator(half, uh, vh)
        if self.config.nonlinear:
            u = np.fft.ifftn(uh).real
            kick = np.fft.fftn(_kernels.abs_pow(u, self.config.p))
            vh = vh + dt * self.dealias * kick
        return _kernels.apply_propagator(half, uh, vh)

    def norms(self, uh, vh, u):
        g = self.grid
        npts = g.points_per_axis**g.dimension
        w = g.cell_volume / npts
        if self.config.exclude_mean:
            uh = uh.copy()
            vh = vh.copy()
            uh.flat[0] = 0.0
            vh.flat[0] = 0.0
            u = u - u.mean()
        u2 = float(np.sum(np.abs(uh) ** 2)) * w
        g2 = float(np.sum(self.grad2 * np.abs(uh) ** 2)) * w
        v2 = float(np.sum(np.abs(vh) ** 2)) * w
        return {
            "L1": float(g.cell_volume * np.sum(np.abs(u))),
            "L2": math.sqrt(u2),
            "Linf": float(np.max(np.abs(u))),
            "H1": math.sqrt(u2 + g2),
            "ut_L2": math.sqrt(v2),
            "grad_L2": math.sqrt(g2),
        }

    def top_octave_fraction(self, uh):
        e = np.abs(uh) ** 2
        total = float(np.sum(e))
        return float(np.sum(e[self.top_octave])) / total if total > 0 else 0.0


def step(state: State, config: SimConfig, dt: float | None = None) -> State:
    """One Strang step of size ``dt`` (defaults to ``config.dt``)."""
    dt = config.dt if dt is None else dt
    uh, vh = state._raw()
    if not (np.all(np.isfinite(uh)) and np.all(np.isfinite(vh))):
        raise NonFiniteField("state is not finite")
    uh, vh = Stepper(config).advance(uh, vh, dt)
    u = np.fft.ifftn(uh).real
    sup = float(np.max(np.abs(u)))
    if not math.isfinite(sup) or sup >= config.blowup_threshold:
        raise BlowupDetected(state.t + dt, sup)
    return State._from_raw(config.grid, state.t + dt, uh, vh)


# ---------------------------------------------------------------------------
# driver


def _boundary_band(u, width=3):
    n = u.shape[0]
    band = np.zeros(u.shape, dtype=bool)
    for ax in range(u.ndim):
        idx = [slice(None)] * u.ndim
        idx[ax] = np.r_[0:width, n - width + 1 : n]
        band[tuple(idx)] = True
    return band


def _sup(u):
    with np.errstate(invalid="ignore"):
        s = float(np.max(np.abs(u)))
    return s if math.isfinite(s) else math.inf


class _Integrator:
    def __init__(self, config: SimConfig):
        self.config = config
        self.stepper = Stepper(config)

    def dt_for(self, sup, cap):
        cfg = self.config
        if cfg.nonlinear and sup > 0:
            # u'' = u^p evolves on the time scale sup^{-(p-1)/2}; strict_cfl uses sup^{-(p-1)}
            power = cfg.p - 1.0 if cfg.strict_cfl else 0.5 * (cfg.p - 1.0)
            return min(cap, cfg.nonlinear_cfl / sup**power)
        return cap

    def crossing_time(self, t0, uh, vh, sup0, cap, threshold, horizon):
        """Integrate from ``(t0, uh, vh)`` until ``sup |u| >= threshold``; interpolate in log sup."""
        t = t0
        sup = sup0
        while t < horizon:
            dt = min(self.dt_for(sup, cap), horizon - t)
            uh, vh = self.stepper.advance(uh, vh, dt)
            new = _sup(np.fft.ifftn(uh).real)
            if new >= threshold:
                if math.isfinite(new) and sup > 0:
                    frac = (math.log(threshold) - math.log(sup)) / (math.log(new) - math.log(sup))
                    return t + dt * min(max(frac, 0.0), 1.0)
                return t + dt
            t += dt
            sup = new
        return None


def run(config: SimConfig) -> Trajectory:
    """Integrate to ``t_max`` or blow-up, recording norms every ``record_every`` steps."""
    cfg = config
    g = cfg.grid
    integ = _Integrator(cfg)
    st = integ.stepper
    u0, u1 = initial_data(cfg.data_spec, g, cfg.epsilon)
    uh = np.fft.fftn(u0.values)
    vh = np.fft.fftn(u1.values)
    u = u0.values.copy()
    band = _boundary_band(u)

    times, rows, snaps, notes = [], [], [], []
    resolution_flagged = False

    def record(t, uh, vh, u):
        nonlocal resolution_flagged
        times.append(t)
        rows.append(st.norms(uh, vh, u))
        if cfg.snapshots:
            snaps.append(u.copy())
        if cfg.truncation_tol is not None:
            w = u - u.mean() if cfg.exclude_mean else u
            peak = float(np.max(np.abs(w)))
            edge = float(np.max(np.abs(w[band])))
            if peak > 0 and edge > cfg.truncation_tol * peak:
                raise TruncationContaminated(
                    f"|u| near the box boundary is {edge / peak:.2e} of its max at t={t:.4g}"
                )
        if not resolution_flagged and st.top_octave_fraction(uh) > 1e-6:
            resolution_flagged = True
            msg = f"top-octave energy above 1e-6 at t={t:.4g}"
            notes.append(msg)
            warnings.warn(msg, ResolutionWarning, stacklevel=3)

    record(0.0, uh, vh, u)
    t = 0.0
    sup = _sup(u)
    nsteps = 0
    outcome, t_est = None, None
    while t < cfg.t_max * (1 - 1e-12):
        dt = min(integ.dt_for(sup, cfg.dt), cfg.t_max - t)
        prev = (t, uh, vh, sup)
        uh, vh = st.advance(uh, vh, dt)
        u = np.fft.ifftn(uh).real
        new_sup = _sup(u)
        nsteps += 1
        if new_sup >= cfg.blowup_threshold:
            t_est = _refine_blowup(integ, prev, dt, cfg)
            outcome = "Blowup"
            if math.isfinite(new_sup):
                record(t + dt, uh, vh, u)
            break
        t += dt
        sup = new_sup
        if nsteps % cfg.record_every == 0 or t >= cfg.t_max * (1 - 1e-12):
            record(t, uh, vh, u)

    norms = {k: np.array([r[k] for r in rows]) for k in NORM_KEYS}
    if outcome is None:
        h0, h1 = norms["H1"][0], norms["H1"][-1]
        decayed = h1 < 0.1 * h0 if h0 > 0 else h1 == 0.0
        outcome = "Decayed" if decayed else "MaxTimeReached"
    return Trajectory(
        cfg,
        np.array(times),
        norms,
        outcome,
        T_est=t_est,
        snapshots=np.array(snaps) if cfg.snapshots else None,
        steps=nsteps,
        warnings=notes,
    )


def _refine_blowup(integ, prev, dt, cfg, rel=0.005, max_halvings=8):
    t0, uh, vh, sup0 = prev
    horizon = t0 + 2.0 * dt
    est = integ.crossing_time(t0, uh, vh, sup0, dt, cfg.blowup_threshold, horizon)
    cap = dt
    for _ in range(max_halvings):
        cap /= 2.0
        new = integ.crossing_time(t0, uh, vh, sup0, cap, cfg.blowup_threshold, horizon)
        if new is None:
            break
        if est is not None and abs(new - est) <= rel * new:
            return new
        est = new
    return est if est is not None else t0 + dt


# ---------------------------------------------------------------------------
# lifespan and decay


def estimate_lifespan(config: SimConfig, rel_tol=0.01, max_halvings=6, return_details=False):
    """Blow-up time under successive halving of ``dt`` until two estimates agree to ``rel_tol``.

    Also re-runs at threshold ``1e6`` and reports the relative shift.
    """
    from .analysis import classify_exponent

    if classify_exponent(config.p, config.n, config.delta) != "Subcritical":
        raise ValueError("lifespan estimation expects a subcritical exponent")
    cfg = replace(config, snapshots=False)
    history = []
    prev = None
    for _ in range(max_halvings + 1):
        traj = run(cfg)
        if traj.outcome != "Blowup":
            raise NoBlowupObserved(f"no blow-up by t={cfg.t_max} at epsilon={cfg.epsilon}")
        history.append((cfg.dt, traj.T_est))
        if prev is not None and abs(traj.T_est - prev) <= rel_tol * traj.T_est:
            break
        prev = traj.T_est
        cfg = replace(cfg, dt=cfg.dt / 2.0)
    T = history[-1][1]
    low = run(replace(cfg, blowup_threshold=min(1e6, cfg.blowup_threshold)))
    shift = abs(T - low.T_est) / T if low.T_est else math.inf
    if shift >= 0.02:
        warnings.warn(f"lifespan moves by {shift:.1%} between thresholds 1e6 and {cfg.blowup_threshold:g}")
    if return_details:
        return T, {"history": history, "threshold_shift": shift, "dt": cfg.dt}
    return T


def fit_decay_rate(traj: Trajectory, which: str = "L2", t_min: float = 5.0, min_samples: int = 10) -> float:
    """Least-squares slope of ``log(norm)`` against ``log(1 + t)`` for ``t >= t_min``."""
    key = {"u_L2": "L2", "L2": "L2", "ut": "ut_L2", "ut_L2": "ut_L2", "grad": "grad_L2"}.get(which, which)
    vals = traj.norms[key]
    t = traj.times
    sel = t >= t_min
    if np.sum(sel) < min_samples:
        raise WindowTooShort(f"only {int(np.sum(sel))} samples with t >= {t_min}")
    y = vals[sel]
    if np.any(y <= 1e-300):
        raise DegenerateFit(f"{key} vanishes inside the fit window")
    return float(np.polyfit(np.log1p(t[sel]), np.log(y), 1)[0])


def data_sign(u0: RealField, u1: RealField, delta: float, weight: RealField | None = None) -> float:
    """``int (u1 + (-Delta)^delta u0) w dx`` on the torus (``w = 1`` by default)."""
    from .fractional_ops import frac_laplacian_spectral

    if not (u0.is_finite() and u1.is_finite()):
        raise NonFiniteField("data are not finite")
    lap = frac_laplacian_spectral(u0, delta)
    total = u1 + lap
    return integrate(total if weight is None else total * weight)


def verify_data_sign(u0: RealField, u1: RealField, delta: float, bundle=None) -> dict:
    """Global data functional and, when ``bundle`` is given, its localized form on ``B_R``."""
    out = {"global": data_sign(u0, u1, delta)}
    if bundle is not None:
        from .cutoffs import build_scaled

        tf = build_scaled(bundle)
        w = RealField(u0.grid, tf.phi_pow(u0.grid.radius()))
        # int (-Delta)^delta u0 * w = int u0 (-Delta)^delta w by symmetry
        from .fractional_ops import frac_laplacian_spectral

        out["localized"] = integrate(u1 * w) + integrate(u0 * frac_laplacian_spectral(w, delta))
        out["R"] = bundle.R
    return out
