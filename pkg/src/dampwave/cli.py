"""Command line entry point: ``dampwave <command> --config <path> [--out <dir>] [--threads <k>]``.

Exit codes: 0 all checks passed, 1 a check failed (reports still written),
2 configuration or validation error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
import warnings
from dataclasses import replace
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from . import __version__
from .errors import DampwaveError

log = logging.getLogger("dampwave")

COMMANDS = (
    "simulate",
    "lifespan-sweep",
    "criticality-scan",
    "verify-testfn",
    "verify-operators",
    "weak-identity",
    "decay-check",
)


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridModel(Strict):
    dimension: int = 1
    N: int = 1024
    L: float = 40.0


class BlobModel(Strict):
    kind: Literal["zero", "gaussian", "bump", "dipole"] = "zero"
    center: float | list[float] = 0.0
    width: float = 1.0
    radius: float = 1.0
    amplitude: float = 1.0
    alpha: float = 0.5
    beta: float = 1.0


class DataModel(Strict):
    u0: BlobModel = BlobModel(kind="zero")
    u1: BlobModel = BlobModel(kind="gaussian")


class SimModel(Strict):
    grid: GridModel = GridModel()
    delta: float = 0.25
    p: float = 2.0
    dt: float = 0.01
    t_max: float = 20.0
    epsilon: float = 1.0
    data_spec: DataModel = DataModel()
    blowup_threshold: float = 1e8
    record_every: int = 10
    nonlinear: bool = True
    snapshots: bool = False
    exclude_mean: bool = False
    truncation_tol: Optional[float] = 5e-2
    nonlinear_cfl: float = 0.1
    strict_cfl: bool = False

    def build(self):
        from .fields import Grid
        from .solver import DataSpec, SimConfig

        d = self.model_dump()
        g = d.pop("grid")
        data = d.pop("data_spec")
        return SimConfig(grid=Grid(g["dimension"], g["N"], g["L"]), data_spec=DataSpec(data["u0"], data["u1"]), **d)


class ProfileModel(Strict):
    alpha: float = 0.05
    beta: float = 10.0

    def build(self):
        from .cutoffs import CutoffProfile

        return CutoffProfile(self.alpha, self.beta)


class Base(Strict):
    out: Optional[str] = None
    verbosity: Literal["quiet", "info", "debug"] = "info"


class SimulateConfig(Base):
    simulation: SimModel = SimModel()
    snapshot_format: Literal["csv", "bin"] = "bin"


class LifespanConfig(Base):
    simulation: SimModel = SimModel(grid=GridModel(N=32768, L=1600.0), dt=0.02, t_max=400.0, record_every=100)
    epsilons: list[float] = [0.125, 0.0625, 0.03125, 0.015625]
    slope_range: tuple[float, float] = (-1.4, -0.6)
    period: float = 2 * math.pi

    @field_validator("epsilons")
    @classmethod
    def _positive(cls, v):
        if len(v) < 4 or any(e <= 0 for e in v):
            raise ValueError("need at least four positive epsilons")
        return v


class CriticalityConfig(Base):
    simulation: SimModel = SimModel(
        grid=GridModel(N=8192, L=400.0),
        dt=0.02,
        record_every=25,
        data_spec=DataModel(u1=BlobModel(kind="dipole")),
    )
    n: int = 1
    delta: float = 0.25
    p_list: list[float] = [2.0, 5.0, 6.0, 8.0]
    epsilon: float = 1.0
    t_max: float = 60.0


class TestfnConfig(Base):
    profile: ProfileModel = ProfileModel()
    cases: list[tuple[float, int, float]] = [(2.0, 1, 0.25), (2.0, 2, 0.25), (2.0, 1, 0.5)]
    window: float = 0.1


class OperatorsConfig(Base):
    quick: bool = False
    suites: list[Literal["consistency", "inequality", "positivity", "scaling", "decay"]] = [
        "consistency",
        "inequality",
        "positivity",
        "scaling",
        "decay",
    ]


class WeakIdentityConfig(Base):
    simulation: SimModel = SimModel(
        dt=0.01, t_max=8.5, epsilon=0.125, record_every=2, snapshots=True, truncation_tol=None
    )
    R: list[float] = [4.0]
    profile: ProfileModel = ProfileModel(alpha=0.5, beta=1.0)
    tolerance: float = 0.05
    refine: bool = True


class DecayConfig(Base):
    simulation: SimModel = SimModel(
        grid=GridModel(dimension=2, N=1024, L=400.0),
        dt=0.25,
        t_max=60.0,
        record_every=1,
        nonlinear=False,
        exclude_mean=True,
        truncation_tol=None,
        data_spec=DataModel(u1=BlobModel(kind="gaussian", width=4.0)),
    )
    t_min: float = 5.0
    expected: dict[str, float] = Field(default_factory=lambda: {"L2": -1.0 / 3.0, "ut_L2": -4.0 / 3.0})
    tolerance: dict[str, float] = Field(default_factory=lambda: {"L2": 0.15, "ut_L2": 0.2})


MODELS = {
    "simulate": SimulateConfig,
    "lifespan-sweep": LifespanConfig,
    "criticality-scan": CriticalityConfig,
    "verify-testfn": TestfnConfig,
    "verify-operators": OperatorsConfig,
    "weak-identity": WeakIdentityConfig,
    "decay-check": DecayConfig,
}


# ---------------------------------------------------------------------------
# output helpers


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(u) for k, u in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(u) for u in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def write_json(path: Path, payload: dict):
    path.write_text(json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n")


def write_csv(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for v in row])


def _report(cmd, cfg, passed, body):
    return {
        "command": cmd,
        "version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "config": cfg.model_dump(mode="json"),
        "passed": bool(passed),
        **body,
    }


def _check_rows(reports):
    return [[r.operation, json.dumps(_clean(r.parameters), sort_keys=True), r.metric, r.tolerance, r.passed] for r in reports]


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(cfg: SimulateConfig, out: Path, threads: int):
    from .fields import RealField, save_field
    from .solver import NORM_KEYS, run

    sim = cfg.simulation.build()
    try:
        traj = run(sim)
        error = None
    except DampwaveError as exc:
        traj, error = None, f"{type(exc).__name__}: {exc}"
    if traj is not None:
        write_csv(out / "trajectory.csv", ["t", *NORM_KEYS], traj.to_rows())
        if traj.snapshots is not None:
            snap_dir = out / "snapshots"
            snap_dir.mkdir(exist_ok=True)
            for i, (t, u) in enumerate(zip(traj.times, traj.snapshots)):
                save_field(RealField(sim.grid, u), snap_dir / f"u_{i:05d}.{cfg.snapshot_format}", cfg.snapshot_format, {"t": float(t)})
    body = {"resolved_simulation": sim.to_dict(), "error": error}
    if traj is not None:
        body.update(traj.summary())
    write_json(out / "outcome.json", _report("simulate", cfg, error is None, body))
    return error is None


def cmd_lifespan(cfg: LifespanConfig, out: Path, threads: int):
    from .analysis import lifespan_sweep

    base = cfg.simulation.build()
    rec = lifespan_sweep(base, cfg.epsilons, threads=threads, period=cfg.period)
    lo, hi = cfg.slope_range
    slope_ok = lo <= rec.fitted_slope <= hi
    passed = slope_ok and rec.monotone and not rec.failures
    rows = [[e, T, math.log(e), math.log(T), e in rec.excluded] for e, T in zip(rec.epsilons, rec.lifespans)]
    write_csv(out / "lifespan.csv", ["epsilon", "T_eps", "log_epsilon", "log_T", "excluded_from_fit"], rows)
    body = {"resolved_simulation": base.to_dict(), "record": rec.to_dict(), "slope_in_range": slope_ok}
    write_json(out / "summary.json", _report("lifespan-sweep", cfg, passed, body))
    return passed


def _scan_row_passed(row):
    cls, outcome = row["classification"], row.get("outcome")
    if cls == "Subcritical":
        return outcome == "Blowup"
    if cls == "Supercritical":
        return outcome in ("Decayed", "MaxTimeReached") and bool(row.get("h1_nonincreasing")) and "error" not in row
    return outcome != "Error"


def cmd_criticality(cfg: CriticalityConfig, out: Path, threads: int):
    from .analysis import criticality_scan

    base = cfg.simulation.build()
    rows = criticality_scan(cfg.n, cfg.delta, cfg.p_list, cfg.epsilon, cfg.t_max, base, threads=threads)
    for row in rows:
        row["passed"] = _scan_row_passed(row)
    keys = ["p", "classification", "outcome", "T_est", "h1_slope", "h1_nonincreasing", "passed", "error"]
    write_csv(out / "scan.csv", keys, [[row.get(k) for k in keys] for row in rows])
    passed = all(r["passed"] for r in rows)
    write_json(out / "summary.json", _report("criticality-scan", cfg, passed, {"rows": rows, "resolved_simulation": base.to_dict()}))
    return passed


def _checks_output(cmd, cfg, out, reports):
    write_csv(out / "checks.csv", ["operation", "parameters", "metric", "tolerance", "passed"], _check_rows(reports))
    passed = all(r.passed for r in reports)
    write_json(out / "report.json", _report(cmd, cfg, passed, {"checks": [r.to_dict() for r in reports]}))
    return passed


def cmd_testfn(cfg: TestfnConfig, out: Path, threads: int):
    from .suites import testfn_suite

    reports = testfn_suite(cfg.profile.build(), [tuple(c) for c in cfg.cases], cfg.window)
    return _checks_output("verify-testfn", cfg, out, reports)


def cmd_operators(cfg: OperatorsConfig, out: Path, threads: int):
    from . import suites

    reports = []
    for name in cfg.suites:
        if name == "consistency":
            for psi, s, grid in suites.consistency_cases():
                if cfg.quick and grid.dimension == 2 and grid.points_per_axis > 256:
                    continue
                reports.append(suites.check_consistency(psi, s, grid))
        else:
            reports.extend(getattr(suites, f"{name}_checks")())
    return _checks_output("verify-operators", cfg, out, reports)


def cmd_weak_identity(cfg: WeakIdentityConfig, out: Path, threads: int):
    from .analysis import compute_functionals
    from .cutoffs import CutoffBundle
    from .fields import Grid
    from .solver import run

    sim = replace(cfg.simulation.build(), snapshots=True)
    levels = [sim]
    if cfg.refine:
        g = sim.grid
        levels.append(replace(sim, grid=Grid(g.dimension, 2 * g.points_per_axis, g.half_width), dt=sim.dt / 2))
    rows, reports = [], []
    for level, c in enumerate(levels):
        traj = run(c)
        bundle = CutoffBundle(cfg.profile.build(), p=c.p, delta=c.delta, n=c.n, R=cfg.R[0])
        for R in cfg.R:
            rep = compute_functionals(traj, bundle, R)
            reports.append(rep)
            rows.append([level, c.grid.points_per_axis, c.dt, R, rep.I_R, rep.I_Rt, rep.I_Rx, rep.J1, rep.J2, rep.J3, rep.data_term, rep.identity_residual])
    header = ["level", "N", "dt", "R", "I_R", "I_Rt", "I_Rx", "J1", "J2", "J3", "data_term", "identity_residual"]
    write_csv(out / "functionals.csv", header, rows)
    finest = reports[-len(cfg.R):]
    passed = all(r.identity_residual < cfg.tolerance for r in finest)
    decreasing = None
    if cfg.refine:
        coarse = reports[: len(cfg.R)]
        decreasing = all(f.identity_residual < c.identity_residual for f, c in zip(finest, coarse))
        passed = passed and decreasing
    body = {"residual_decreases": decreasing, "reports": [r.to_dict() for r in reports]}
    write_json(out / "summary.json", _report("weak-identity", cfg, passed, body))
    return passed


def cmd_decay(cfg: DecayConfig, out: Path, threads: int):
    from .solver import NORM_KEYS, fit_decay_rate, run

    sim = cfg.simulation.build()
    traj = run(sim)
    write_csv(out / "trajectory.csv", ["t", *NORM_KEYS], traj.to_rows())
    slopes, ok = {}, {}
    for key in sorted(set(cfg.expected) | {"L2", "ut_L2", "grad_L2"}):
        slopes[key] = fit_decay_rate(traj, key, cfg.t_min)
        if key in cfg.expected:
            ok[key] = abs(slopes[key] - cfg.expected[key]) <= cfg.tolerance.get(key, 0.15)
    write_csv(out / "slopes.csv", ["norm", "slope", "expected", "tolerance", "passed"],
              [[k, slopes[k], cfg.expected.get(k), cfg.tolerance.get(k), ok.get(k)] for k in slopes])
    passed = all(ok.values())
    write_json(out / "summary.json", _report("decay-check", cfg, passed, {"slopes": slopes, "passed_by_norm": ok, **traj.summary()}))
    return passed


HANDLERS = {
    "simulate": cmd_simulate,
    "lifespan-sweep": cmd_lifespan,
    "criticality-scan": cmd_criticality,
    "verify-testfn": cmd_testfn,
    "verify-operators": cmd_operators,
    "weak-identity": cmd_weak_identity,
    "decay-check": cmd_decay,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dampwave", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON configuration file")
        p.add_argument("--out", default=None, help="output directory (overrides the config)")
        p.add_argument("--threads", type=int, default=1, help="worker threads for sweeps and numba kernels")
    return parser


def load_config(command: str, path) -> BaseModel:
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, dict):
        raise ValueError("config must be a JSON object")
    return MODELS[command].model_validate(raw)


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        cfg = load_config(args.command, args.config)
        if args.threads < 1:
            raise ValueError("--threads must be >= 1")
        # building the simulation validates the numeric invariants before any work
        if hasattr(cfg, "simulation"):
            cfg.simulation.build()
    except (OSError, ValueError, ValidationError, DampwaveError) as exc:
        print(f"dampwave: configuration error: {exc}", file=sys.stderr)
        return 2
    level = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}[cfg.verbosity]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out or cfg.out or f"dampwave-{args.command}")
    out.mkdir(parents=True, exist_ok=True)
    _set_threads(args.threads)
    try:
        passed = HANDLERS[args.command](cfg, out, args.threads)
    except (ValueError, DampwaveError) as exc:
        print(f"dampwave: {type(exc).__name__}: {exc}", file=sys.stderr)
        write_json(out / "error.json", _report(args.command, cfg, False, {"error": f"{type(exc).__name__}: {exc}"}))
        return 1
    log.info("%s: %s (outputs in %s)", args.command, "passed" if passed else "FAILED", out)
    return 0 if passed else 1


def _set_threads(k: int):
    try:
        import numba

        with warnings.catch_warnings():
            # numba probes threading layers here and complains about old TBB builds
            warnings.simplefilter("ignore")
            numba.set_num_threads(min(k, numba.config.NUMBA_NUM_THREADS))
    except ImportError:
        pass
    os.environ.setdefault("OMP_NUM_THREADS", str(k))


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
