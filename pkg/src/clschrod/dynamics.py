"""Time evolution: split-step Fourier for the linear equation, RK4 on (rho, S) for the classical one."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import (CausticDetected, NonPeriodicGrid, NumericalBlowup, NumericalFailure,
                     PreconditionError)
from .fields import (Grid, MadelungFields, PhysicalConstants, WaveFunction, decompose,
                     _spectral_derivative, divergence, laplacian, phase_gradient, ramp_slopes,
                     recompose)

POTENTIAL_KINDS = ("free", "harmonic", "quartic", "linear-tilt", "tabulated")
NEG_RHO_CLAMP = 1e-12
NEG_RHO_CAUSTIC = 1e-8
FILTER_ALPHA = 36.0
FILTER_ORDER = 36


@dataclass(frozen=True, eq=False)
class Potential:
    """External potential ``V`` with its force ``-grad V``.

    ``harmonic`` is ``m omega^2 |x - center|^2 / 2``, ``quartic`` is
    ``lam |x - center|^4``, ``linear-tilt`` is ``F . x``. ``tabulated`` holds
    samples on a specific grid; its force uses 2nd-order differences.
    """

    kind: str = "free"
    omega: float = 1.0
    lam: float = 0.0
    force_vector: tuple[float, ...] = (0.0,)
    center: tuple[float, ...] = (0.0,)
    table: np.ndarray | None = None
    table_grid: Grid | None = None

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise PreconditionError(f"unknown potential kind {self.kind!r}")
        if self.kind == "tabulated":
            if self.table is None or self.table_grid is None:
                raise PreconditionError("tabulated potential needs table and table_grid")
            if not np.all(np.isfinite(self.table)):
                raise PreconditionError("tabulated potential must be finite")

    @classmethod
    def free(cls) -> Potential:
        return cls("free")

    @classmethod
    def harmonic(cls, omega: float, center: Sequence[float] = (0.0,)) -> Potential:
        return cls("harmonic", omega=omega, center=tuple(center))

    @classmethod
    def quartic(cls, lam: float, center: Sequence[float] = (0.0,)) -> Potential:
        return cls("quartic", lam=lam, center=tuple(center))

    @classmethod
    def tilt(cls, force: float | Sequence[float]) -> Potential:
        return cls("linear-tilt", force_vector=tuple(np.atleast_1d(force).astype(float)))

    @classmethod
    def tabulated(cls, grid: Grid, values: np.ndarray) -> Potential:
        return cls("tabulated", table=np.asarray(values, dtype=float), table_grid=grid)

    def _vec(self, values: tuple[float, ...], dim: int) -> np.ndarray:
        out = np.zeros(dim)
        v = np.asarray(values, dtype=float)[:dim]
        out[: v.size] = v
        return out

    def value_at(self, x, c: PhysicalConstants):
        """``V`` at points ``x`` of shape ``(dim, ...)``."""
        x = np.asarray(x, dtype=float)
        dim = x.shape[0]
        if self.kind == "free":
            return np.zeros(x.shape[1:])
        if self.kind == "tabulated":
            return self._interp_table(self.table, x)
        rel = x - self._vec(self.center, dim).reshape((dim,) + (1,) * (x.ndim - 1))
        r2 = np.sum(rel ** 2, axis=0)
        if self.kind == "harmonic":
            return 0.5 * c.mass * self.omega ** 2 * r2
        if self.kind == "quartic":
            return self.lam * r2 ** 2
        F = self._vec(self.force_vector, dim).reshape((dim,) + (1,) * (x.ndim - 1))
        return np.sum(F * x, axis=0)

    def force_at(self, x, c: PhysicalConstants):
        """``-grad V`` at points ``x`` of shape ``(dim, ...)``."""
        x = np.asarray(x, dtype=float)
        dim = x.shape[0]
        if self.kind == "free":
            return np.zeros_like(x)
        if self.kind == "tabulated":
            g = self.table_grid
            forces = -np.stack([np.gradient(self.table, g.spacing[a], axis=a, edge_order=2)
                                for a in range(g.dim)])
            return np.stack([self._interp_table(forces[a], x) for a in range(dim)])
        rel = x - self._vec(self.center, dim).reshape((dim,) + (1,) * (x.ndim - 1))
        if self.kind == "harmonic":
            return -c.mass * self.omega ** 2 * rel
        if self.kind == "quartic":
            return -4 * self.lam * np.sum(rel ** 2, axis=0) * rel
        F = self._vec(self.force_vector, dim).reshape((dim,) + (1,) * (x.ndim - 1))
        return -np.broadcast_to(F, x.shape).copy()

    def _interp_table(self, table: np.ndarray, x: np.ndarray) -> np.ndarray:
        from scipy.interpolate import RegularGridInterpolator

        g = self.table_grid
        interp = RegularGridInterpolator(tuple(g.axes), table, bounds_error=False,
                                         fill_value=None)
        pts = np.moveaxis(x, 0, -1).reshape(-1, g.dim)
        return interp(pts).reshape(x.shape[1:])

    def values(self, grid: Grid, c: PhysicalConstants) -> np.ndarray:
        if self.kind == "tabulated":
            if self.table_grid != grid:
                raise PreconditionError("tabulated potential lives on a different grid")
            return self.table
        return self.value_at(np.stack(grid.coords), c)

    def force(self, grid: Grid, c: PhysicalConstants) -> np.ndarray:
        if self.kind == "tabulated":
            if self.table_grid != grid:
                raise PreconditionError("tabulated potential lives on a different grid")
            return -np.stack([np.gradient(self.table, grid.spacing[a], axis=a, edge_order=2)
                              for a in range(grid.dim)])
        return self.force_at(np.stack(grid.coords), c)


@dataclass(frozen=True)
class EvolverConfig:
    kind: str = "linear"
    dt: float = 0.01
    t_end: float = 1.0
    cfl: float = 0.5
    caustic_threshold: float = 0.1
    stride: int = 1

    def __post_init__(self):
        if self.kind not in ("linear", "classical"):
            raise PreconditionError(f"evolver kind must be linear or classical, got {self.kind!r}")
        if not self.dt > 0:
            raise PreconditionError("dt must be positive")
        if not self.t_end >= 0:
            raise PreconditionError("t_end must be nonnegative")
        if not 0 < self.cfl <= 1:
            raise PreconditionError("cfl must lie in (0, 1]")
        if not self.caustic_threshold > 0:
            raise PreconditionError("caustic threshold must be positive")
        if self.stride < 1:
            raise PreconditionError("stride must be >= 1")


@dataclass(frozen=True)
class CausticReport:
    t: float
    metric: str  # "hessian" (max|lap S| dt/m) or "min_rho"
    value: float
    location: tuple[float, ...]


# -------------------------------------------------------------------- linear

class _LinearPropagator:
    def __init__(self, grid: Grid, v: Potential, c: PhysicalConstants, dt: float):
        if not grid.periodic:
            raise NonPeriodicGrid("split-step evolution needs a periodic grid")
        V = v.values(grid, c)
        vmax = float(np.max(np.abs(V))) if V.size else 0.0
        if dt * vmax / c.hbar >= 0.5:
            raise PreconditionError(f"dt*max|V|/hbar = {dt * vmax / c.hbar:.3g} must stay below 0.5")
        k2 = sum(np.meshgrid(*[grid.wavenumbers(a) ** 2 for a in range(grid.dim)],
                             indexing="ij"))
        self.half_kick = np.exp(-0.5j * V * dt / c.hbar)
        self.drift = np.exp(-0.5j * c.hbar * k2 * dt / c.mass)

    def __call__(self, psi: np.ndarray) -> np.ndarray:
        psi = self.half_kick * psi
        psi = np.fft.ifftn(self.drift * np.fft.fftn(psi))
        return self.half_kick * psi


def step_linear(psi: WaveFunction, v: Potential, c: PhysicalConstants, dt: float) -> WaveFunction:
    """One Strang step: half potential kick, exact free drift in k-space, half kick."""
    return WaveFunction(psi.grid, _LinearPropagator(psi.grid, v, c, dt)(psi.psi))


# ----------------------------------------------------------------- classical

def phase_laplacian(S: np.ndarray, grid: Grid, slopes=None) -> np.ndarray:
    if grid.periodic:
        g = phase_gradient(S, grid, slopes)
        return sum(_spectral_derivative(g[a], grid, a, 1) for a in range(grid.dim))
    return laplacian(S, grid)


def detect_caustic(fields: MadelungFields, c: PhysicalConstants, dt: float, threshold: float,
                   t: float = 0.0, rho: np.ndarray | None = None, slopes=None
                   ) -> CausticReport | None:
    """Report when characteristics are about to cross.

    Triggers if ``max |lap S| dt/m`` exceeds ``threshold`` or if the density
    (``rho`` when given, else ``R**2``) dips below ``-1e-8 max``.
    """
    grid = fields.grid
    rho = fields.rho if rho is None else rho
    peak = float(np.max(rho))
    lowest = float(np.min(rho))
    if peak > 0 and lowest < -NEG_RHO_CAUSTIC * peak:
        i = np.unravel_index(np.argmin(rho), rho.shape)
        return CausticReport(t, "min_rho", lowest / peak, _location(grid, i))
    if not math.isfinite(threshold):
        return None
    lap = np.abs(phase_laplacian(fields.S, grid, slopes))
    i = np.unravel_index(np.argmax(lap), lap.shape)
    value = float(lap[i]) * dt / c.mass
    if value > threshold:
        return CausticReport(t, "hessian", value, _location(grid, i))
    return None


def _location(grid: Grid, index) -> tuple[float, ...]:
    return tuple(float(grid.axes[a][index[a]]) for a in range(grid.dim))


class _ClassicalRHS:
    def __init__(self, grid: Grid, v: Potential, c: PhysicalConstants, slopes=None):
        self.grid = grid
        self.slopes = slopes
        self.V = v.values(grid, c)
        self.m = c.mass
        self.filter = _spectral_filter(grid)

    def __call__(self, rho: np.ndarray, S: np.ndarray):
        gS = phase_gradient(S, self.grid, self.slopes)
        u = gS / self.m
        dS = -(0.5 * np.sum(gS * u, axis=0) + self.V)
        drho = -divergence(rho[None] * u, self.grid)
        return drho, dS


def _spectral_filter(grid: Grid) -> np.ndarray | None:
    """Exponential filter ``exp(-36 (k/k_max)^36)`` on the rfft layout, or None."""
    if not grid.periodic:
        return None
    out = np.ones(1)
    for a in range(grid.dim):
        n = grid.n
        frac = np.abs(np.fft.rfftfreq(n) if a == grid.dim - 1 else np.fft.fftfreq(n)) * 2
        sigma = np.exp(-FILTER_ALPHA * frac ** FILTER_ORDER)
        shape = [1] * grid.dim
        shape[a] = sigma.size
        out = out * sigma.reshape(shape)
    return out


def _filtered(f: np.ndarray, sigma: np.ndarray | None) -> np.ndarray:
    if sigma is None:
        return f
    axes = tuple(range(f.ndim))
    return np.fft.irfftn(np.fft.rfftn(f, axes=axes) * sigma, s=f.shape, axes=axes)


def _rk4_classical(rhs: _ClassicalRHS, rho: np.ndarray, S: np.ndarray, dt: float):
    # The increments are periodic even when S carries a ramp, so on periodic
    # grids they are filtered to stop aliasing from the quadratic terms.
    a1, b1 = rhs(rho, S)
    a2, b2 = rhs(rho + 0.5 * dt * a1, S + 0.5 * dt * b1)
    a3, b3 = rhs(rho + 0.5 * dt * a2, S + 0.5 * dt * b2)
    a4, b4 = rhs(rho + dt * a3, S + dt * b3)
    sigma = rhs.filter
    rho = rho + _filtered((dt / 6.0) * (a1 + 2 * a2 + 2 * a3 + a4), sigma)
    S = S + _filtered((dt / 6.0) * (b1 + 2 * b2 + 2 * b3 + b4), sigma)
    return rho, S


def _check_classical(fields: MadelungFields, rho: np.ndarray, S: np.ndarray,
                     c: PhysicalConstants, t: float) -> np.ndarray:
    grid = fields.grid
    if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(S))):
        raise NumericalBlowup(f"non-finite fields at t={t:.6g}", t=t)
    if grid.pad:
        rho = rho * grid.taper()
    report = detect_caustic(fields, c, 0.0, math.inf, t=t, rho=rho)
    if report is not None:
        raise CausticDetected(report)
    return rho


def _clamped(fields: MadelungFields, rho: np.ndarray, S: np.ndarray) -> MadelungFields:
    # tiny negatives are ringing; anything larger has already tripped the detector
    return MadelungFields.from_rho(fields.grid, np.where(rho < 0, 0.0, rho), S, fields.node_eps)


def step_classical(fields: MadelungFields, v: Potential, c: PhysicalConstants, dt: float,
                   caustic_threshold: float = 0.1, t: float = 0.0) -> MadelungFields:
    """One RK4 step of ``dS/dt = -[(grad S)^2/2m + V]``, ``drho/dt = -div(rho grad S/m)``."""
    slopes = ramp_slopes(fields.S, fields.grid)
    report = detect_caustic(fields, c, dt, caustic_threshold, t=t, slopes=slopes)
    if report is not None:
        raise CausticDetected(report)
    rhs = _ClassicalRHS(fields.grid, v, c, slopes)
    rho, S = _rk4_classical(rhs, fields.rho, fields.S, dt)
    return _clamped(fields, _check_classical(fields, rho, S, c, t + dt), S)


# ------------------------------------------------------------------- driver

def cfl_bound(state, c: PhysicalConstants, cfl: float, v: Potential | None = None) -> float:
    """Largest stable substep: ``cfl * dx / max(|grad S|/m, hbar/(m dx))``."""
    grid = state.grid
    dx = min(grid.spacing)
    speed = c.hbar / (c.mass * dx)
    if isinstance(state, MadelungFields):
        speed = max(speed, float(np.max(np.abs(phase_gradient(state.S, grid)))) / c.mass)
    bound = cfl * dx / speed
    if isinstance(state, WaveFunction) and v is not None and v.kind != "free":
        vmax = float(np.max(np.abs(v.values(grid, c))))
        if vmax > 0:
            bound = min(bound, 0.45 * c.hbar / vmax)
    return bound


class Evolution(NamedTuple):
    final: object
    times: list[float]
    snapshots: list
    records: list


def _as_kind(state, kind: str, c: PhysicalConstants):
    if kind == "linear" and isinstance(state, MadelungFields):
        return recompose(state, c)
    if kind == "classical" and isinstance(state, WaveFunction):
        return decompose(state, c=c)
    return state


def evolve(initial, v: Potential, c: PhysicalConstants, cfg: EvolverConfig,
           observers: Sequence[Callable] = (), keep_snapshots: bool = True) -> Evolution:
    """Advance ``initial`` to ``cfg.t_end``.

    The configured ``dt`` is the nominal step; each nominal step is split into
    equal substeps that respect the CFL bound measured at its start, so
    snapshots (every ``cfg.stride`` nominal steps, plus the final time) stay
    uniformly spaced. Observers are called as ``observer(t, state)`` at every
    snapshot. A step error is re-raised with ``.t`` set to the failure time
    and ``.partial`` holding the :class:`Evolution` accumulated so far.
    """
    from .observables import moments

    state = _as_kind(initial, cfg.kind, c)
    grid = state.grid
    nsteps = int(math.ceil(cfg.t_end / cfg.dt - 1e-9)) if cfg.t_end > 0 else 0
    dt = cfg.t_end / nsteps if nsteps else cfg.dt
    times: list[float] = []
    snaps: list = []
    records: list = []

    def snapshot(t, st):
        times.append(t)
        if keep_snapshots:
            snaps.append(st)
        records.append(moments(st, c, v, t=t))
        for obs in observers:
            obs(t, st)

    t = 0.0
    snapshot(t, state)
    # with a periodic right-hand side the ramp of S never changes, so it is
    # read once instead of re-estimated from the edges at every stage
    slopes = ramp_slopes(state.S, grid) if cfg.kind == "classical" else None
    rhs = _ClassicalRHS(grid, v, c, slopes) if cfg.kind == "classical" else None
    props: dict[int, _LinearPropagator] = {}
    raw_rho = None
    try:
        for step in range(nsteps):
            if cfg.kind == "classical":
                report = detect_caustic(state, c, dt, cfg.caustic_threshold, t=t,
                                        slopes=slopes)
                if report is not None:
                    raise CausticDetected(report)
            nsub = max(1, int(math.ceil(dt / cfl_bound(state, c, cfg.cfl, v) - 1e-9)))
            h = dt / nsub
            if cfg.kind == "linear":
                prop = props.get(nsub)
                if prop is None:
                    prop = props[nsub] = _LinearPropagator(grid, v, c, h)
                psi = state.psi
                for _ in range(nsub):
                    psi = prop(psi)
                if not np.all(np.isfinite(psi)):
                    raise NumericalBlowup(f"non-finite psi at t={t + dt:.6g}", t=t + dt)
                state = WaveFunction(grid, psi)
            else:
                # the unclamped density is carried between steps; clamping every
                # step would pump round-off mass into the tails
                if raw_rho is None:
                    raw_rho = state.rho
                rho, S = raw_rho, state.S
                for j in range(nsub):
                    rho, S = _rk4_classical(rhs, rho, S, h)
                    if j < nsub - 1 and np.min(rho) < -NEG_RHO_CAUSTIC * np.max(rho):
                        break
                raw_rho = _check_classical(state, rho, S, c, t + dt)
                state = _clamped(state, raw_rho, S)
            t = (step + 1) * dt
            if (step + 1) % cfg.stride == 0 or step + 1 == nsteps:
                snapshot(t, state)
    except NumericalFailure as exc:
        if exc.t is None:
            exc.t = t
        exc.partial = Evolution(state, times, snaps, records)
        raise
    return Evolution(state, times, snaps, records)
