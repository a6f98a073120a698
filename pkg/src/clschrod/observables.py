"""Moments, Ehrenfest residuals and the structural probes that separate the two evolvers."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InsufficientSnapshots, NodeInSuperposition, NumericalFailure, ZeroNorm
from .fields import (Grid, MadelungFields, PhysicalConstants, WaveFunction, decompose,
                     phase_gradient, recompose)

NONLINEAR_BOUND = 1e-2


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One row of the diagnostics table. Vector quantities refer to the first axis."""

    t: float
    norm: float
    energy: float
    mean_x: float
    mean_p: float
    sigma_x: float
    sigma_p: float
    ehrenfest1: float = math.nan
    ehrenfest2: float = math.nan
    node_count: int = 0
    min_rho: float = 0.0

    COLUMNS = ("t", "norm", "energy", "mean_x", "mean_p", "sigma_x", "sigma_p",
               "ehrenfest1", "ehrenfest2", "node_count", "min_rho")

    def row(self) -> tuple:
        return tuple(getattr(self, name) for name in self.COLUMNS)


def _weighted(values: np.ndarray, weights: np.ndarray) -> tuple[float, float]:
    total = weights.sum()
    mean = float(np.sum(values * weights) / total)
    var = float(np.sum((values - mean) ** 2 * weights) / total)
    return mean, math.sqrt(max(var, 0.0))


def moments(state: WaveFunction | MadelungFields, c: PhysicalConstants, v=None,
            t: float = 0.0) -> DiagnosticsRecord:
    """Position and momentum statistics of a state.

    For a wave function the momentum distribution comes from its discrete
    Fourier transform. For polar fields the momentum is the local
    ``grad S`` weighted by ``rho``, which is what a pair of position
    measurements would record.
    """
    grid = state.grid
    rho = state.rho
    norm = grid.integrate(rho)
    if not norm > 0:
        raise ZeroNorm("state has zero norm")
    x = grid.coords
    mean_x, sigma_x = _weighted(x[0], rho)
    V = v.values(grid, c) if v is not None else np.zeros(grid.shape)
    potential = grid.integrate(rho * V)
    if isinstance(state, WaveFunction):
        pk = np.abs(np.fft.fftn(state.psi)) ** 2
        ks = np.meshgrid(*[grid.wavenumbers(a) for a in range(grid.dim)], indexing="ij")
        mean_p, sigma_p = _weighted(c.hbar * ks[0], pk)
        k2 = sum(k ** 2 for k in ks)
        kinetic = norm * float(np.sum(c.hbar ** 2 * k2 / (2 * c.mass) * pk) / pk.sum())
        nodes = int(np.count_nonzero(np.abs(state.psi) < 1e-10 * np.abs(state.psi).max()))
    else:
        gS = phase_gradient(state.S, grid)
        mean_p, sigma_p = _weighted(gS[0], rho)
        kinetic = grid.integrate(rho * np.sum(gS ** 2, axis=0) / (2 * c.mass))
        nodes = state.node_count
    return DiagnosticsRecord(t, norm, kinetic + potential, mean_x, mean_p, sigma_x, sigma_p,
                             node_count=nodes, min_rho=float(rho.min()))


def mean_force(state, v, c: PhysicalConstants) -> float:
    """``<-dV/dx>`` along the first axis, weighted by the normalized density."""
    rho = state.rho
    return float(np.sum(rho * v.force(state.grid, c)[0]) / np.sum(rho))


def _centered(t: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # three-point first and second derivatives at interior points, spacing may vary
    h1 = t[1:-1] - t[:-2]
    h2 = t[2:] - t[1:-1]
    d1 = (-h2 / (h1 * (h1 + h2)) * y[:-2] + (h2 - h1) / (h1 * h2) * y[1:-1]
          + h1 / (h2 * (h1 + h2)) * y[2:])
    d2 = 2 * (y[:-2] / (h1 * (h1 + h2)) - y[1:-1] / (h1 * h2) + y[2:] / (h2 * (h1 + h2)))
    return d1, d2


def ehrenfest_residuals(records: Sequence[DiagnosticsRecord], v, states: Sequence,
                        c: PhysicalConstants) -> tuple[np.ndarray, np.ndarray]:
    """``r1 = |d<x>/dt - <p>/m|`` and ``r2 = |m d2<x>/dt2 - <-dV/dx>|`` at interior snapshots.

    Returned arrays have the length of ``records``; the endpoints are NaN.
    """
    if len(records) < 3 or len(states) != len(records):
        raise InsufficientSnapshots("need at least three snapshots with matching states")
    t = np.array([r.t for r in records])
    xm = np.array([r.mean_x for r in records])
    pm = np.array([r.mean_p for r in records])
    f = np.array([mean_force(s, v, c) for s in states])
    d1, d2 = _centered(t, xm)
    r1 = np.full(t.size, np.nan)
    r2 = np.full(t.size, np.nan)
    r1[1:-1] = np.abs(d1 - pm[1:-1] / c.mass)
    r2[1:-1] = np.abs(c.mass * d2 - f[1:-1])
    return r1, r2


def with_ehrenfest(records: Sequence[DiagnosticsRecord], v, states: Sequence,
                   c: PhysicalConstants) -> list[DiagnosticsRecord]:
    if len(records) < 3:
        return list(records)
    r1, r2 = ehrenfest_residuals(records, v, states, c)
    return [dataclasses.replace(r, ehrenfest1=float(a), ehrenfest2=float(b))
            for r, a, b in zip(records, r1, r2)]


# ------------------------------------------------------------------ probes

def _verdict(name: str, values: np.ndarray, threshold: float) -> str:
    # NaN entries mark samples where a metric is undefined (e.g. Ehrenfest endpoints)
    values = values[~np.isnan(values)]
    if not values.size:
        return "INCONCLUSIVE"
    worst = float(np.max(values))
    if name == "superposition_violation":
        if worst < threshold:
            return "LINEAR"
        return "NONLINEAR" if worst > NONLINEAR_BOUND else "INCONCLUSIVE"
    if name == "interference_excess":
        return "CONSTRUCTIVE" if float(np.min(values)) >= threshold else "DESTRUCTIVE"
    if name in ("visibility", "nonlinear_contrast", "basis_rejection"):
        return "PASS" if float(np.min(values)) > threshold else "FAIL"
    if name == "heisenberg_floor":
        return "PASS" if float(np.min(values)) >= threshold else "FAIL"
    return "PASS" if worst < threshold else "FAIL"


@dataclass(frozen=True, eq=False)
class ProbeResult:
    name: str
    t: np.ndarray
    metric: np.ndarray
    threshold: float
    verdict: str

    @classmethod
    def build(cls, name: str, t, metric, threshold: float) -> ProbeResult:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        metric = np.atleast_1d(np.asarray(metric, dtype=float))
        return cls(name, t, metric, float(threshold), _verdict(name, metric, threshold))

    def reproduce_verdict(self) -> str:
        return _verdict(self.name, self.metric, self.threshold)

    def rows(self) -> list[tuple]:
        return [(self.name, float(t), float(m), self.threshold, self.verdict)
                for t, m in zip(self.t, self.metric)]


def _evolve_series(psi: WaveFunction, kind: str, v, c: PhysicalConstants, dt: float,
                   t_end: float, stride: int, cfl: float, caustic_threshold: float):
    from .dynamics import EvolverConfig, evolve

    cfg = EvolverConfig(kind=kind, dt=dt, t_end=t_end, cfl=cfl,
                        caustic_threshold=caustic_threshold, stride=stride)
    state = psi if kind == "linear" else decompose(psi, c=c)
    run = evolve(state, v, c, cfg)
    return np.array(run.times), [recompose(s, c) if kind == "classical" else s
                                 for s in run.snapshots]


def superposition_violation(psi1: WaveFunction, psi2: WaveFunction, c1: complex, c2: complex,
                            kind: str, t_end: float, v=None, c: PhysicalConstants | None = None,
                            dt: float = 0.01, stride: int = 10, cfl: float = 0.5,
                            caustic_threshold: float = 0.1, threshold: float = 1e-6
                            ) -> ProbeResult:
    """Relative distance between evolving a sum and summing the evolutions.

    ``D(t) = |U(c1 psi1 + c2 psi2) - c1 U psi1 - c2 U psi2| / |c1 psi1 + c2 psi2|``.
    The pair must be node free in the sense ``|c1| R1 > |c2| R2`` wherever
    either amplitude is resolvable.
    """
    from .dynamics import Potential

    v = v or Potential.free()
    c = c or PhysicalConstants()
    R1, R2 = np.abs(psi1.psi), np.abs(psi2.psi)
    a1, a2 = abs(c1) * R1, abs(c2) * R2
    if c2 != 0:
        live = (a1 + a2) > 1e-10 * float(np.max(a1 + a2))
        if not np.all(a1[live] > a2[live]):
            raise NodeInSuperposition("need |c1| R1 > |c2| R2 wherever the sum is resolvable")
    combo = WaveFunction(psi1.grid, c1 * psi1.psi + c2 * psi2.psi)
    args = (v, c, dt, t_end, stride, cfl, caustic_threshold)
    t, both = _evolve_series(combo, kind, *args)
    _, first = _evolve_series(WaveFunction(psi1.grid, c1 * psi1.psi), kind, *args)
    if c2 != 0:
        _, second = _evolve_series(WaveFunction(psi2.grid, c2 * psi2.psi), kind, *args)
    else:
        second = [WaveFunction(psi1.grid, np.zeros(psi1.grid.shape, complex))] * len(t)
    scale = math.sqrt(combo.norm())
    D = np.array([math.sqrt(combo.grid.integrate(np.abs(s.psi - a.psi - b.psi) ** 2)) / scale
                  for s, a, b in zip(both, first, second)])
    return ProbeResult.build("superposition_violation", t, D, threshold)


def _evolve_amplitude(R: np.ndarray, grid: Grid, times: np.ndarray, S_series: np.ndarray,
                      c: PhysicalConstants, h_max: float) -> np.ndarray:
    """Integrate ``dR/dt = -(grad S/m).grad R - (lap S / 2m) R`` with ``S`` frozen per snapshot.

    ``S`` is linear in time between snapshots. The scheme is linear in ``R``.
    """
    from .dynamics import phase_laplacian

    grads = np.stack([phase_gradient(S, grid) for S in S_series]) / c.mass
    laps = np.stack([phase_laplacian(S, grid) for S in S_series]) / (2 * c.mass)

    def grad(f):
        from .fields import gradient

        return gradient(f, grid)

    def rhs(r, k, theta):
        u = (1 - theta) * grads[k] + theta * grads[k + 1]
        w = (1 - theta) * laps[k] + theta * laps[k + 1]
        return -np.sum(u * grad(r), axis=0) - w * r

    out = [np.array(R, dtype=float)]
    r = out[0]
    for k in range(times.size - 1):
        span = times[k + 1] - times[k]
        nsub = max(1, int(math.ceil(span / h_max - 1e-9)))
        h = span / nsub
        for s in range(nsub):
            t0, tm, t1 = s / nsub, (s + 0.5) / nsub, (s + 1) / nsub
            k1 = rhs(r, k, t0)
            k2 = rhs(r + 0.5 * h * k1, k, tm)
            k3 = rhs(r + 0.5 * h * k2, k, tm)
            k4 = rhs(r + h * k3, k, t1)
            r = r + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(r)
    return np.stack(out)


def r_linearity_defect(R_a: np.ndarray, R_b: np.ndarray, alpha: float, beta: float,
                       grid: Grid, times: Sequence[float], S_series: Sequence[np.ndarray],
                       c: PhysicalConstants | None = None, h_max: float | None = None,
                       threshold: float = 1e-10) -> ProbeResult:
    """Additivity defect of the amplitude transport equation under a frozen action field.

    ``S_series`` (one field per entry of ``times``) usually comes from a
    reference classical run. Returns
    ``|E(alpha Ra + beta Rb) - alpha E(Ra) - beta E(Rb)|_2`` per snapshot.
    """
    c = c or PhysicalConstants()
    if alpha < 0 or beta < 0:
        raise ValueError("alpha and beta must be nonnegative")
    times = np.asarray(times, dtype=float)
    S_series = np.asarray(S_series, dtype=float)
    if h_max is None:
        h_max = float(np.min(np.diff(times))) if times.size > 1 else 1.0
    combo = alpha * np.asarray(R_a, float) + beta * np.asarray(R_b, float)
    Ea = _evolve_amplitude(R_a, grid, times, S_series, c, h_max)
    Eb = _evolve_amplitude(R_b, grid, times, S_series, c, h_max)
    Ec = _evolve_amplitude(combo, grid, times, S_series, c, h_max)
    diff = Ec - alpha * Ea - beta * Eb
    defect = np.sqrt(np.sum(diff.reshape(times.size, -1) ** 2, axis=1) * grid.cell_volume)
    return ProbeResult.build("r_linearity", times, defect, threshold)


def r_linearity_contrast(R_a: np.ndarray, R_b: np.ndarray, alpha: float, beta: float,
                         S0: np.ndarray, grid: Grid, v, c: PhysicalConstants, dt: float,
                         t_end: float, stride: int = 1, threshold: float = 1e-3
                         ) -> ProbeResult:
    """Same additivity test with amplitudes taken from the linear Schrödinger evolution.

    There the amplitude feeds back into the phase through the quantum
    potential, so additivity fails; the metric is the defect, which should
    exceed ``threshold``.
    """
    from .dynamics import EvolverConfig, evolve

    cfg = EvolverConfig("linear", dt=dt, t_end=t_end, stride=stride)
    phase = np.exp(1j * np.asarray(S0) / c.hbar)
    combo = alpha * np.asarray(R_a) + beta * np.asarray(R_b)

    def amplitudes(R):
        run = evolve(WaveFunction(grid, R * phase), v, c, cfg)
        return np.array(run.times), np.stack([np.abs(s.psi) for s in run.snapshots])

    t, Ea = amplitudes(R_a)
    _, Eb = amplitudes(R_b)
    _, Ec = amplitudes(combo)
    diff = Ec - alpha * Ea - beta * Eb
    defect = np.sqrt(np.sum(diff.reshape(t.size, -1) ** 2, axis=1) * grid.cell_volume)
    # the verdict concerns the final time; at t=0 the defect is zero by construction
    return ProbeResult.build("nonlinear_contrast", t[-1:], defect[-1:], threshold)


@dataclass(frozen=True, eq=False)
class InterferenceResult:
    excess: np.ndarray
    min_excess: float
    visibility: float
    window: np.ndarray

    def probes(self, excess_threshold: float = 0.0, visibility_threshold: float = 0.9):
        return [ProbeResult.build("interference_excess", 0.0, self.min_excess, excess_threshold),
                ProbeResult.build("visibility", 0.0, self.visibility, visibility_threshold)]


def interference_excess(R1: np.ndarray, S1: np.ndarray, R2: np.ndarray, S2: np.ndarray,
                        kind: str, c: PhysicalConstants | None = None) -> InterferenceResult:
    """Excess density ``e = rho_sum - rho1 - rho2`` of a combined state.

    ``classical`` combines the positive amplitudes, ``R1 + R2``, so the
    excess is ``2 R1 R2``. ``linear`` combines the complex wave functions,
    giving ``2 R1 R2 cos((S1 - S2)/hbar)``. Visibility is measured where both
    densities exceed 1% of their maxima.
    """
    c = c or PhysicalConstants()
    R1, R2 = np.asarray(R1, float), np.asarray(R2, float)
    if kind == "classical":
        excess = 2.0 * R1 * R2
        rho = (R1 + R2) ** 2
    elif kind == "linear":
        dS = (np.asarray(S1, float) - np.asarray(S2, float)) / c.hbar
        excess = 2.0 * R1 * R2 * np.cos(dS)
        rho = np.abs(R1 * np.exp(1j * np.asarray(S1) / c.hbar)
                     + R2 * np.exp(1j * np.asarray(S2) / c.hbar)) ** 2
    else:
        raise ValueError(f"unknown evolver kind {kind!r}")
    rho1, rho2 = R1 ** 2, R2 ** 2
    window = np.zeros(R1.shape, dtype=bool)
    if rho1.max() > 0 and rho2.max() > 0:
        window = (rho1 > 0.01 * rho1.max()) & (rho2 > 0.01 * rho2.max())
    if window.any():
        hi, lo = float(rho[window].max()), float(rho[window].min())
        visibility = (hi - lo) / (hi + lo) if hi + lo > 0 else 0.0
    else:
        visibility = 0.0
    return InterferenceResult(excess, float(excess.min()), visibility, window)
