"""Particle ensembles drawn from the density and carried by the velocity field ``grad S / m``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels
from .errors import LeftDomain, NodeRegion, PreconditionError, ZeroDensity
from .fields import Grid, MadelungFields, PhysicalConstants, ScalarField, phase_gradient


@dataclass(frozen=True, eq=False)
class TrajectoryEnsemble:
    """Particles at time ``t`` plus their history at every snapshot they passed.

    ``positions``/``velocities`` have shape ``(count, dim)``. Particles that
    hit a node region or left a non-periodic domain are frozen and flagged
    invalid. Positions on periodic grids are kept unwrapped so paths stay
    continuous; use :meth:`wrapped` for positions inside the domain.
    """

    grid: Grid
    positions: np.ndarray
    velocities: np.ndarray
    valid: np.ndarray
    seed: int | None
    t: float = 0.0
    times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    history: np.ndarray = field(default_factory=lambda: np.zeros((0, 0, 1)))
    velocity_history: np.ndarray = field(default_factory=lambda: np.zeros((0, 0, 1)))
    valid_history: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=bool))
    failures: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    def wrapped(self, positions: np.ndarray | None = None) -> np.ndarray:
        pos = self.positions if positions is None else positions
        if not self.grid.periodic:
            return pos
        lo = np.array([b[0] for b in self.grid.bounds])
        L = np.array(self.grid.lengths)
        return lo + np.mod(pos - lo, L)


class NewtonianTrajectory(NamedTuple):
    t: np.ndarray
    x: np.ndarray
    p: np.ndarray


# ----------------------------------------------------------------- sampling

def _density(rho) -> tuple[Grid, np.ndarray]:
    if isinstance(rho, MadelungFields):
        return rho.grid, rho.rho
    if isinstance(rho, ScalarField):
        return rho.grid, rho.values
    raise TypeError("rho must be a ScalarField or MadelungFields")


def density_cdf(grid: Grid, rho: np.ndarray):
    """CDF of the 1D density read as a histogram of cells centred on the samples."""
    w = np.asarray(rho, dtype=float)
    edges = grid.axes[0][0] - 0.5 * grid.dx + grid.dx * np.arange(grid.n + 1)
    cdf = np.concatenate(([0.0], np.cumsum(w)))
    cdf /= cdf[-1]

    def F(x):
        return np.interp(x, edges, cdf)

    return F


def sample_positions(grid: Grid, rho: np.ndarray, count: int, rng: np.random.Generator
                     ) -> np.ndarray:
    """Draw ``count`` positions, shape ``(count, dim)``.

    1D inverts the cumulative distribution; 2D uses rejection against the
    density maximum, then a uniform offset inside the accepted cell.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0) or not np.all(np.isfinite(rho)):
        raise PreconditionError("density must be finite and nonnegative")
    total = float(rho.sum())
    if not total > 0:
        raise ZeroDensity("density integrates to zero")
    if grid.dim == 1:
        edges = grid.axes[0][0] - 0.5 * grid.dx + grid.dx * np.arange(grid.n + 1)
        cdf = np.concatenate(([0.0], np.cumsum(rho)))
        cdf /= cdf[-1]
        x = np.interp(rng.random(count), cdf, edges)
        if grid.periodic:
            lo, hi = grid.bounds[0]
            x = lo + np.mod(x - lo, hi - lo)
        else:
            x = np.clip(x, grid.axes[0][0], grid.axes[0][-1])
        return x[:, None]
    peak = float(rho.max())
    h = np.array(grid.spacing)
    lo = np.array([b[0] for b in grid.bounds])
    out = []
    have = 0
    batch = max(1024, 4 * count)
    while have < count:
        idx = rng.integers(0, grid.n, size=(batch, 2))
        accept = rng.random(batch) * peak < rho[idx[:, 0], idx[:, 1]]
        cells = idx[accept]
        jitter = rng.random((cells.shape[0], 2)) - 0.5
        pts = lo + (cells + jitter) * h
        out.append(pts)
        have += pts.shape[0]
    pts = np.concatenate(out)[:count]
    if grid.periodic:
        pts = lo + np.mod(pts - lo, np.array(grid.lengths))
    else:
        top = lo + (grid.n - 1) * h
        pts = np.clip(pts, lo, top)
    return pts


def sample_ensemble(rho, count: int, seed: int, c: PhysicalConstants | None = None
                    ) -> TrajectoryEnsemble:
    """Sample an ensemble from ``rho`` (deterministic in ``seed``).

    When ``rho`` is a :class:`MadelungFields` the velocities are filled from
    its action; otherwise they start at zero.
    """
    grid, dens = _density(rho)
    pos = sample_positions(grid, dens, count, np.random.default_rng(seed))
    vel = np.zeros_like(pos)
    valid = np.ones(count, dtype=bool)
    if isinstance(rho, MadelungFields):
        vel, status = _velocity_at(rho, c or PhysicalConstants(), pos)
        valid = status == kernels.OK
    return TrajectoryEnsemble(grid, pos, vel, valid, seed)


# ----------------------------------------------------------------- velocity

def velocity_field(fields: MadelungFields, c: PhysicalConstants) -> np.ndarray:
    return phase_gradient(fields.S, fields.grid) / c.mass


def _velocity_at(fields: MadelungFields, c: PhysicalConstants, pts: np.ndarray):
    grid = fields.grid
    vel = velocity_field(fields, c)
    lo = [b[0] for b in grid.bounds]
    if grid.dim == 1:
        v, st = kernels.numpy_impl.interp1(vel[0], fields.nodes, pts[:, 0], lo[0], grid.dx,
                                           grid.periodic)
        return v[:, None], st
    (vx, vy), st = kernels.numpy_impl.interp2(vel, fields.nodes, pts[:, 0], pts[:, 1],
                                              np.array(lo), np.array(grid.spacing), grid.periodic)
    return np.stack([vx, vy], axis=1), st


def bohmian_velocity(fields: MadelungFields, c: PhysicalConstants, x) -> np.ndarray:
    """``grad S / m`` interpolated (multi)linearly to the point(s) ``x``."""
    grid = fields.grid
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == (0 if grid.dim == 1 else 1)
    pts = pts.reshape(-1, grid.dim)
    v, status = _velocity_at(fields, c, pts)
    if np.any(status == kernels.OUTSIDE):
        raise LeftDomain("point outside the grid")
    if np.any(status == kernels.NODE):
        raise NodeRegion("interpolation stencil touches a node")
    if grid.dim == 1:
        v = v[:, 0]
    return v[0] if single else v


# ------------------------------------------------------------------ advance

def advance(ensemble: TrajectoryEnsemble, times: Sequence[float],
            snapshots: Sequence[MadelungFields], dt: float, c: PhysicalConstants | None = None,
            strict: bool = False) -> TrajectoryEnsemble:
    """Carry the ensemble through a snapshot series with RK4.

    The velocity field is linear in time between snapshots. By default,
    particles whose stencil touches a node, or that leave a non-periodic
    grid, are frozen and marked invalid (counts in ``failures``); with
    ``strict=True`` those cases raise :class:`NodeRegion` / :class:`LeftDomain`.
    """
    c = c or PhysicalConstants()
    times = np.asarray(times, dtype=float)
    if times.size != len(snapshots) or times.size < 1:
        raise PreconditionError("one time stamp per snapshot required")
    if not dt > 0:
        raise PreconditionError("dt must be positive")
    if np.any(np.diff(times) <= 0):
        raise PreconditionError("snapshot times must increase")
    grid = ensemble.grid
    lo = np.array([b[0] for b in grid.bounds])
    vel = np.ascontiguousarray(np.stack([velocity_field(s, c) for s in snapshots]))
    nodes = np.ascontiguousarray(np.stack([s.nodes for s in snapshots]))
    alive0 = np.ascontiguousarray(ensemble.valid)
    if grid.dim == 1:
        pos, v, alive, code = kernels.advance_1d(
            np.ascontiguousarray(ensemble.positions[:, 0]), alive0, times,
            np.ascontiguousarray(vel[:, 0]), nodes, float(lo[0]), float(grid.dx),
            grid.periodic, float(dt))
        pos, v = pos[..., None], v[..., None]
    else:
        pos, v, alive, code = kernels.advance_2d(
            np.ascontiguousarray(ensemble.positions), alive0, times, vel, nodes, lo,
            np.array(grid.spacing), grid.periodic, float(dt))
    fresh = ensemble.valid & (code != kernels.OK)
    failures = {"node": int(np.count_nonzero(fresh & (code == kernels.NODE))),
                "left_domain": int(np.count_nonzero(fresh & (code == kernels.OUTSIDE)))}
    if strict and failures["left_domain"]:
        raise LeftDomain(f"{failures['left_domain']} particle(s) left the grid")
    if strict and failures["node"]:
        raise NodeRegion(f"{failures['node']} particle(s) entered a node region")
    return TrajectoryEnsemble(grid, pos[-1], v[-1], alive[-1], ensemble.seed, float(times[-1]),
                              times, pos, v, alive, failures)


def crest_positions(snapshots: Sequence[MadelungFields]) -> np.ndarray:
    """Location of the density maximum in each snapshot (first axis)."""
    out = []
    for s in snapshots:
        i = np.unravel_index(np.argmax(s.rho), s.grid.shape)
        out.append(s.grid.axes[0][i[0]])
    return np.array(out)


# ------------------------------------------------------------------- oracle

def newtonian_oracle(x0, p0, v, c: PhysicalConstants, dt: float, t_end: float
                     ) -> NewtonianTrajectory:
    """RK4 on Hamilton's equations ``x' = p/m``, ``p' = -grad V``.

    ``x0``/``p0`` may be scalars (1D, one particle), arrays of shape ``(N,)``
    (1D, N particles) or ``(N, dim)``; a single 2D particle is ``(1, 2)``. Output arrays are ``(steps+1, ...)``
    matching the input layout.
    """
    x = np.asarray(x0, dtype=float)
    p = np.asarray(p0, dtype=float) * np.ones_like(x)
    shape = x.shape
    xs = x.reshape(x.shape[0] if x.ndim > 1 else x.size, -1)
    ps = p.reshape(xs.shape)
    nsteps = max(1, int(math.ceil(t_end / dt - 1e-9))) if t_end > 0 else 0
    h = t_end / nsteps if nsteps else 0.0

    def force(q):
        return v.force_at(q.T, c).T

    tx = [xs.copy()]
    tp = [ps.copy()]
    for _ in range(nsteps):
        k1x, k1p = ps / c.mass, force(xs)
        k2x, k2p = (ps + 0.5 * h * k1p) / c.mass, force(xs + 0.5 * h * k1x)
        k3x, k3p = (ps + 0.5 * h * k2p) / c.mass, force(xs + 0.5 * h * k2x)
        k4x, k4p = (ps + h * k3p) / c.mass, force(xs + h * k3x)
        xs = xs + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        ps = ps + (h / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p)
        tx.append(xs.copy())
        tp.append(ps.copy())
    t = h * np.arange(nsteps + 1)
    return NewtonianTrajectory(t, np.stack(tx).reshape((-1,) + shape),
                               np.stack(tp).reshape((-1,) + shape))


def oracle_energy(traj: NewtonianTrajectory, v, c: PhysicalConstants) -> np.ndarray:
    x = np.asarray(traj.x, dtype=float)
    p = np.asarray(traj.p, dtype=float)
    if x.ndim <= 2:  # 1D layouts
        return p ** 2 / (2 * c.mass) + v.value_at(x[None], c)
    return np.sum(p ** 2, axis=-1) / (2 * c.mass) + v.value_at(np.moveaxis(x, -1, 0), c)
