"""Execute an experiment config and persist fields, trajectories, diagnostics and probes."""

from __future__ import annotations

import datetime as _dt
import hashlib
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import yaml
from scipy.stats import kstest

from .. import __version__
from ..dynamics import EvolverConfig, Evolution, evolve
from ..errors import (BasisViolation, CausticDetected, NumericalFailure, SimulationError)
from ..fields import (MadelungFields, WaveFunction, circular_loop, decompose,
                      quantum_potential, winding_circulation)
from ..observables import (DiagnosticsRecord, ProbeResult, interference_excess,
                           r_linearity_contrast, r_linearity_defect, superposition_violation,
                           with_ehrenfest)
from ..statistics import (DiagonalObservable, PositiveBasis, collapse_position,
                          exchange_term_max, momentum_from_positions, pure_vs_mixed_expectation,
                          sample_measurement)
from ..trajectories import (TrajectoryEnsemble, advance, density_cdf, newtonian_oracle,
                            sample_ensemble)
from .config import ExperimentConfig, ProbeSpec, to_dict
from .states import (bump_amplitude, build_constants, build_grid, build_initial,
                     build_potential, vortex_state)

EXIT_CODES = {"completed": 0, "config-error": 2, "caustic": 3, "blowup": 3, "io-error": 4}


@dataclass
class RunManifest:
    config: dict
    version: str
    started: str
    finished: str
    status: str
    message: str = ""
    files: list = field(default_factory=list)  # (relative path, sha256)

    @property
    def exit_code(self) -> int:
        return EXIT_CODES.get(self.status, 1)

    def as_dict(self) -> dict:
        return {"config": self.config, "version": self.version, "started": self.started,
                "finished": self.finished, "status": self.status, "message": self.message,
                "exit_code": self.exit_code,
                "files": [{"path": p, "sha256": h} for p, h in self.files]}


@dataclass
class RunContext:
    """Everything a probe may look at."""

    cfg: ExperimentConfig
    grid: object
    c: object
    v: object
    initial: object
    evolution: Evolution
    records: list
    ensemble: TrajectoryEnsemble | None
    failure: NumericalFailure | None
    base_dir: str | None = None

    @property
    def times(self) -> np.ndarray:
        return np.array(self.evolution.times)

    def polar(self, state) -> MadelungFields:
        return state if isinstance(state, MadelungFields) else decompose(state, c=self.c)

    @property
    def seed(self) -> int:
        return self.cfg.trajectories.seed if self.cfg.trajectories else 0


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


# ------------------------------------------------------------------ probes

def _width_drift(ctx: RunContext, spec: ProbeSpec):
    s = np.array([r.sigma_x for r in ctx.records])
    return [ProbeResult.build("width_drift", ctx.times, np.abs(s / s[0] - 1.0), spec.limit())]


def _dispersion_law(ctx: RunContext, spec: ProbeSpec):
    s0 = ctx.cfg.initial.sigma
    t = ctx.times
    law = s0 * np.sqrt(1.0 + (ctx.c.hbar * t / (2 * ctx.c.mass * s0 ** 2)) ** 2)
    s = np.array([r.sigma_x for r in ctx.records])
    return [ProbeResult.build("dispersion_law", t, np.abs(s / law - 1.0), spec.limit())]


def _ehrenfest(ctx: RunContext, spec: ProbeSpec):
    r1 = np.array([r.ehrenfest1 for r in ctx.records])
    r2 = np.array([r.ehrenfest2 for r in ctx.records])
    return [ProbeResult.build("ehrenfest_r1", ctx.times, r1, spec.limit()),
            ProbeResult.build("ehrenfest_r2", ctx.times, r2, spec.limit())]


def _harmonic_mean_x(ctx: RunContext, spec: ProbeSpec):
    pot, ini, m = ctx.cfg.potential, ctx.cfg.initial, ctx.c.mass
    w, c0 = pot.omega, pot.center[0]
    a, b = ini.x0[0] - c0, ini.p0[0] / (m * w)
    t = ctx.times
    exact = c0 + a * np.cos(w * t) + b * np.sin(w * t)
    mean = np.array([r.mean_x for r in ctx.records])
    amp = math.hypot(a, b) or 1.0
    return [ProbeResult.build("harmonic_mean_x", t, np.abs(mean - exact) / amp, spec.limit())]


def _caustic_time(ctx: RunContext, spec: ProbeSpec):
    expected = spec.param("expected")
    if expected is None:
        chirp = ctx.cfg.initial.chirp
        expected = ctx.c.mass / chirp if chirp > 0 else math.inf
    if isinstance(ctx.failure, CausticDetected):
        t = float(ctx.failure.t)
        metric = abs(t - expected) / expected
    else:
        t, metric = ctx.times[-1], math.inf
    return [ProbeResult.build("caustic_time", t, metric, spec.limit())]


def _characteristics(ctx: RunContext, spec: ProbeSpec):
    ens = ctx.ensemble
    if ens is None:
        raise SimulationError("characteristics probe needs a trajectories section")
    k = min(int(spec.param("particles")), ens.count)
    h = float(spec.param("oracle_dt"))
    times = ens.times
    x = ens.history[0, :k].copy()
    p = ctx.c.mass * ens.velocity_history[0, :k].copy()
    dev = [0.0]
    for j in range(1, times.size):
        traj = newtonian_oracle(x, p, ctx.v, ctx.c, h, times[j] - times[j - 1])
        x, p = traj.x[-1], traj.p[-1]
        ok = ens.valid_history[j, :k]
        diff = np.linalg.norm(ens.history[j, :k] - x, axis=1)[ok]
        dev.append(float(diff.max()) if diff.size else math.nan)
    return [ProbeResult.build("characteristics", times, dev, spec.limit())]


def _equivariance_ks(ctx: RunContext, spec: ProbeSpec):
    ens = ctx.ensemble
    if ens is None or ctx.grid.dim != 1:
        raise SimulationError("equivariance_ks needs 1D trajectories")
    limit = spec.threshold if spec.threshold is not None else 3.0 / math.sqrt(ens.count)
    stats = []
    for j, snap in enumerate(ctx.evolution.snapshots):
        ok = ens.valid_history[j]
        pos = ens.wrapped(ens.history[j, ok])[:, 0]
        stats.append(kstest(pos, density_cdf(ctx.grid, snap.rho)).statistic)
    return [ProbeResult.build("equivariance_ks", ens.times, stats, limit)]


def _two_waves(ctx: RunContext):
    (R1, S1), (R2, S2) = ctx.initial.components
    hbar = ctx.c.hbar
    return (WaveFunction(ctx.grid, R1 * np.exp(1j * S1 / hbar)),
            WaveFunction(ctx.grid, R2 * np.exp(1j * S2 / hbar)))


def _superposition(ctx: RunContext, spec: ProbeSpec):
    psi1, psi2 = _two_waves(ctx)
    c1, c2 = ctx.initial.coefficients
    tm = ctx.cfg.time
    return [superposition_violation(psi1, psi2, c1, c2, ctx.cfg.evolver, tm.t_end, ctx.v, ctx.c,
                                    dt=tm.dt, stride=tm.stride, cfl=tm.cfl,
                                    caustic_threshold=tm.caustic_threshold,
                                    threshold=spec.limit())]


def _r_linearity(ctx: RunContext, spec: ProbeSpec):
    (Ra, _), (Rb, _) = ctx.initial.components
    alpha, beta = (abs(x) for x in ctx.initial.coefficients)
    S_series = [ctx.polar(s).S for s in ctx.evolution.snapshots]
    out = [r_linearity_defect(Ra, Rb, alpha, beta, ctx.grid, ctx.times, S_series, ctx.c,
                              h_max=ctx.cfg.time.dt, threshold=spec.limit())]
    if spec.param("contrast"):
        tm = ctx.cfg.time
        S0 = ctx.polar(ctx.evolution.snapshots[0]).S
        out.append(r_linearity_contrast(Ra, Rb, alpha, beta, S0, ctx.grid, ctx.v, ctx.c,
                                        tm.dt, tm.t_end, tm.stride,
                                        threshold=float(spec.param("contrast_threshold"))))
    return out


def _interference(ctx: RunContext, spec: ProbeSpec):
    (R1, S1), (R2, S2) = ctx.initial.components
    res = interference_excess(R1, S1, R2, S2, ctx.cfg.evolver, ctx.c)
    probes = res.probes(spec.limit(), float(spec.param("visibility_threshold")))
    # fringe visibility only means something for the linear combination
    return probes if ctx.cfg.evolver == "linear" else probes[:1]


def _pure_vs_mixed(ctx: RunContext, spec: ProbeSpec):
    (R1, _), (R2, _) = ctx.initial.components
    c1, c2 = ctx.initial.coefficients
    w = np.array([c1 ** 2, c2 ** 2]) / (c1 ** 2 + c2 ** 2)
    grid = ctx.grid
    basis = PositiveBasis(grid, (R1, R2), tuple(w))
    out = []
    for name, values in (("pure_vs_mixed_x", grid.x), ("pure_vs_mixed_x2", grid.x ** 2)):
        _, _, diff = pure_vs_mixed_expectation(basis, DiagonalObservable(grid, values))
        out.append(ProbeResult.build(name, 0.0, abs(diff), spec.limit()))
    if spec.param("overlap_check"):
        ini = ctx.cfg.initial
        shifted = bump_amplitude(grid, [ini.x0[a] + 0.5 * ini.width for a in range(grid.dim)],
                                 ini.width)
        try:
            pure_vs_mixed_expectation(PositiveBasis(grid, (R1, shifted), (0.5, 0.5)),
                                      DiagonalObservable(grid, grid.x))
            rejected = 0.0
        except BasisViolation:
            rejected = 1.0
        out.append(ProbeResult.build("basis_rejection", 0.0, rejected, 0.5))
    return out


def _exchange(ctx: RunContext, spec: ProbeSpec):
    (R1, _), (R2, _) = ctx.initial.components
    return [ProbeResult.build("exchange_term", 0.0, exchange_term_max(R1, R2).max, spec.limit())]


def _winding(ctx: RunContext, spec: ProbeSpec):
    ini = ctx.cfg.initial
    radius = spec.param("radius") or ini.r0
    loop = circular_loop(ctx.grid, ini.x0, radius)
    charges = spec.param("charges")
    out = []
    t, err = [], []
    for n in (charges if charges is not None else ()):
        state = decompose(vortex_state(ctx.grid, int(n), ini.r0, ini.x0, ctx.c), c=ctx.c)
        w = winding_circulation(state, loop, ctx.c)
        t.append(0.0)
        err.append(abs(w.circulation / (2 * math.pi * ctx.c.hbar) - n))
    for time, snap in zip((ctx.times[0], ctx.times[-1]),
                          (ctx.evolution.snapshots[0], ctx.evolution.snapshots[-1])):
        w = winding_circulation(ctx.polar(snap), loop, ctx.c)
        t.append(time)
        err.append(abs(w.circulation / (2 * math.pi * ctx.c.hbar) - ini.n))
    out.append(ProbeResult.build("winding", t, err, spec.limit()))
    return out


def _uncertainty(ctx: RunContext, spec: ProbeSpec):
    hbar = ctx.c.hbar
    prod = np.array([r.sigma_x * r.sigma_p for r in ctx.records])
    if ctx.cfg.evolver == "linear":
        floor = spec.threshold if spec.threshold is not None else 0.5 * hbar * (1 - 1e-2)
        return [ProbeResult.build("heisenberg_floor", ctx.times, prod, floor),
                ProbeResult.build("minimum_uncertainty", ctx.times[:1],
                                  abs(prod[0] / (0.5 * hbar) - 1.0), 1e-2)]
    ceiling = spec.threshold if spec.threshold is not None else 0.1 * hbar
    return [ProbeResult.build("uncertainty_product", ctx.times, prod, ceiling)]


def _indirect_momentum(ctx: RunContext, spec: ProbeSpec):
    grid, c = ctx.grid, ctx.c
    start = ctx.polar(ctx.evolution.snapshots[0])
    sigma_m = spec.param("sigma_m") or 4 * grid.dx
    interval = float(spec.param("interval"))
    cycles = int(spec.param("cycles"))
    tm = ctx.cfg.time
    cfg = EvolverConfig("classical", dt=tm.dt, t_end=interval, stride=max(1, int(
        math.ceil(interval / tm.dt))), cfl=tm.cfl, caustic_threshold=tm.caustic_threshold)
    expected = ctx.records[0].mean_p
    budget = c.mass * sigma_m / interval
    draws = []
    for k in range(cycles):
        x1 = sample_measurement(start, ctx.seed + 2 * k)
        packet = collapse_position(start, x1, sigma_m)
        later = evolve(packet, ctx.v, c, cfg).final
        x2 = sample_measurement(later, ctx.seed + 2 * k + 1)
        d = x2 - x1
        if grid.periodic:
            d -= grid.lengths[0] * round(d / grid.lengths[0])
        draws.append(momentum_from_positions(0.0, 0.0, d, interval, c))
    draws = np.array(draws)
    limit = spec.threshold if spec.threshold is not None else 4 * budget
    return [ProbeResult.build("indirect_momentum", np.full(cycles, interval),
                              np.abs(draws - expected), limit),
            ProbeResult.build("indirect_momentum_mean", interval,
                              abs(draws.mean() - expected), 3 * budget / math.sqrt(cycles))]


PROBE_FUNCS: dict[str, Callable] = {
    "width_drift": _width_drift,
    "dispersion_law": _dispersion_law,
    "ehrenfest": _ehrenfest,
    "harmonic_mean_x": _harmonic_mean_x,
    "caustic_time": _caustic_time,
    "characteristics": _characteristics,
    "equivariance_ks": _equivariance_ks,
    "superposition_violation": _superposition,
    "r_linearity": _r_linearity,
    "interference_excess": _interference,
    "pure_vs_mixed": _pure_vs_mixed,
    "exchange_term": _exchange,
    "winding": _winding,
    "uncertainty": _uncertainty,
    "indirect_momentum": _indirect_momentum,
}


# ------------------------------------------------------------------ output

def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return "%.17g" % float(value)


def _write_table(path: str, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def emit_outputs(snapshots, ensembles, records, probes, directory: str, c=None, v=None
                 ) -> list[str]:
    """Write the output tables into ``directory``; returns relative file names.

    ``snapshots`` may be wave functions or polar fields. The probe table is
    only written when there are probe results.
    """
    os.makedirs(directory, exist_ok=True)
    written = []

    _write_table(os.path.join(directory, "diagnostics.csv"), DiagnosticsRecord.COLUMNS,
                 (r.row() for r in records))
    written.append("diagnostics.csv")

    if snapshots:
        os.makedirs(os.path.join(directory, "fields"), exist_ok=True)
    for i, snap in enumerate(snapshots):
        grid = snap.grid
        polar = snap if isinstance(snap, MadelungFields) else decompose(snap, c=c)
        Q = quantum_potential(polar, c).values
        V = v.values(grid, c) if v is not None else np.zeros(grid.shape)
        coords = [a.ravel() for a in grid.coords]
        cols = ["x", "y"][: grid.dim] + ["rho", "R", "S", "Q", "V"]
        data = np.column_stack(coords + [polar.rho.ravel(), polar.R.ravel(), polar.S.ravel(),
                                         Q.ravel(), V.ravel()])
        name = os.path.join("fields", f"field_{i:04d}.csv")
        _write_table(os.path.join(directory, name), cols, data.tolist())
        written.append(name)

    for ens in ensembles:
        dim = ens.grid.dim
        cols = (["traj_id", "t"] + ["x", "y"][:dim] + ["vx", "vy"][:dim] + ["valid"])
        rows = []
        for i in range(ens.count):
            for j, t in enumerate(ens.times):
                rows.append([i, float(t)] + ens.history[j, i].tolist()
                            + ens.velocity_history[j, i].tolist() + [bool(ens.valid_history[j, i])])
        _write_table(os.path.join(directory, "trajectories.csv"), cols, rows)
        written.append("trajectories.csv")

    if probes:
        rows = [row for p in probes for row in p.rows()]
        _write_table(os.path.join(directory, "probes.csv"),
                     ("probe", "t", "metric", "threshold", "verdict"), rows)
        written.append("probes.csv")
    return written


def _write_manifest(manifest: RunManifest, directory: str) -> str:
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".manifest-", dir=directory)
    with os.fdopen(fd, "w") as fh:
        yaml.safe_dump(manifest.as_dict(), fh, sort_keys=False)
    final = os.path.join(directory, "manifest.yaml")
    os.replace(tmp, final)
    return final


# -------------------------------------------------------------------- run

def _trajectories(cfg: ExperimentConfig, evo: Evolution, c, ctx_polar) -> TrajectoryEnsemble:
    spec = cfg.trajectories
    snaps = [ctx_polar(s) for s in evo.snapshots]
    ens = sample_ensemble(snaps[0], spec.count, spec.seed, c)
    times = np.array(evo.times)
    dt = spec.dt or (float(np.min(np.diff(times))) if times.size > 1 else cfg.time.dt)
    return advance(ens, times, snaps, dt, c)


class _Progress:
    # filled while a run proceeds so that a failure still leaves partial results
    ctx: RunContext | None = None
    probes: list

    def __init__(self):
        self.probes = []


def execute(cfg: ExperimentConfig, base_dir: str | None = None, progress: _Progress | None = None):
    """Run the simulation and probes without touching the disk.

    Returns ``(status, message, context, probes)``; a numerical failure of
    the main evolution is folded into the status, anything else propagates.
    """
    progress = progress if progress is not None else _Progress()
    grid = build_grid(cfg.grid)
    c = build_constants(cfg)
    v = build_potential(cfg.potential, grid, base_dir)
    initial = build_initial(cfg, grid, c, base_dir)
    tm = cfg.time
    ecfg = EvolverConfig(cfg.evolver, dt=tm.dt, t_end=tm.t_end, cfl=tm.cfl,
                         caustic_threshold=tm.caustic_threshold, stride=tm.stride)
    status, message, failure = "completed", "", None
    try:
        evo = evolve(initial.state, v, c, ecfg)
    except NumericalFailure as exc:
        evo = exc.partial
        failure = exc
        status = "caustic" if isinstance(exc, CausticDetected) else "blowup"
        message = str(exc)
    records = with_ehrenfest(evo.records, v, evo.snapshots, c)
    ctx = progress.ctx = RunContext(cfg, grid, c, v, initial, evo, records, None, failure,
                                    base_dir)
    if cfg.trajectories is not None:
        ctx.ensemble = _trajectories(cfg, evo, c, ctx.polar)
    for spec in cfg.probes:
        progress.probes.extend(PROBE_FUNCS[spec.name](ctx, spec))
    return status, message, ctx, progress.probes


def run(cfg: ExperimentConfig, base_dir: str | None = None) -> RunManifest:
    """Execute ``cfg`` and write its outputs under ``cfg.output``.

    The manifest is written even when the run fails part way; it lists
    whatever files were produced.
    """
    out = cfg.output
    started = _now()
    manifest = RunManifest(to_dict(cfg), __version__, started, started, "completed")
    progress = _Progress()
    try:
        os.makedirs(out, exist_ok=True)
        status, message, _, _ = execute(cfg, base_dir, progress)
        manifest.status, manifest.message = status, message
    except OSError as exc:
        manifest.status, manifest.message = "io-error", str(exc)
    except NumericalFailure as exc:  # a probe's own evolution failed
        manifest.status = "caustic" if isinstance(exc, CausticDetected) else "blowup"
        manifest.message = str(exc)
    except (SimulationError, ValueError) as exc:
        manifest.status, manifest.message = "config-error", f"{type(exc).__name__}: {exc}"
    ctx = progress.ctx
    try:
        if ctx is not None:
            files = emit_outputs(ctx.evolution.snapshots,
                                 [ctx.ensemble] if ctx.ensemble is not None else [],
                                 ctx.records, progress.probes, out, ctx.c, ctx.v)
            manifest.files = [(f, _sha256(os.path.join(out, f))) for f in files]
    except OSError as exc:
        manifest.status, manifest.message = "io-error", str(exc)
    manifest.finished = _now()
    try:
        _write_manifest(manifest, out)
    except OSError as exc:
        manifest.status, manifest.message = "io-error", str(exc)
    return manifest


def with_overrides(cfg: ExperimentConfig, out: str | None = None, seed: int | None = None
                   ) -> ExperimentConfig:
    if out is not None:
        cfg = cfg.with_output(out)
    if seed is not None:
        cfg = cfg.with_seed(seed)
    return cfg


