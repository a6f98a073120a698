"""Turn config sections into grids, potentials and initial states."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..dynamics import Potential
from ..errors import PreconditionError
from ..fields import Grid, MadelungFields, PhysicalConstants, WaveFunction, decompose, recompose
from .config import ExperimentConfig, GridSpec, InitialSpec, PotentialSpec, resolve_path


class InitialState(NamedTuple):
    """The combined state plus its components as ``(R, S)`` pairs and amplitudes."""

    state: object
    components: list
    coefficients: tuple


def build_grid(spec: GridSpec) -> Grid:
    return Grid(spec.dim, spec.n, spec.bounds, spec.boundary, spec.pad)


def build_constants(cfg: ExperimentConfig) -> PhysicalConstants:
    return PhysicalConstants(cfg.physics.hbar, cfg.physics.mass)


def _read_table(path: str, columns: tuple[str, ...], grid: Grid) -> list[np.ndarray]:
    data = np.genfromtxt(path, delimiter=",", names=True)
    out = []
    for name in columns:
        if data.dtype.names is None or name not in data.dtype.names:
            raise PreconditionError(f"{path}: missing column {name!r}")
        col = np.asarray(data[name], dtype=float)
        if col.size != int(np.prod(grid.shape)):
            raise PreconditionError(f"{path}: {col.size} rows, grid has {np.prod(grid.shape)}")
        out.append(col.reshape(grid.shape))
    return out


def build_potential(spec: PotentialSpec, grid: Grid, base_dir: str | None = None) -> Potential:
    if spec.kind == "free":
        return Potential.free()
    if spec.kind == "harmonic":
        return Potential.harmonic(spec.omega, spec.center)
    if spec.kind == "quartic":
        return Potential.quartic(spec.lam, spec.center)
    if spec.kind == "linear-tilt":
        return Potential.tilt(spec.force)
    (V,) = _read_table(resolve_path(base_dir, spec.file), ("V",), grid)
    return Potential.tabulated(grid, V)


def _offset2(grid: Grid, x0) -> np.ndarray:
    return sum((coord - x0[a]) ** 2 for a, coord in enumerate(grid.coords))


def gaussian_amplitude(grid: Grid, x0, sigma: float) -> np.ndarray:
    """Normalized ``R`` whose density has standard deviation ``sigma`` per axis."""
    return (2 * np.pi * sigma ** 2) ** (-grid.dim / 4) * np.exp(-_offset2(grid, x0) / (4 * sigma ** 2))


def bump_amplitude(grid: Grid, x0, width: float) -> np.ndarray:
    """Compact ``cos^2`` bump of half width ``width`` (exact zeros outside), normalized."""
    r = np.sqrt(_offset2(grid, x0))
    R = np.where(r < width, np.cos(0.5 * np.pi * np.minimum(r / width, 1.0)) ** 2, 0.0)
    norm = grid.integrate(R * R)
    if not norm > 0:
        raise PreconditionError("bump is narrower than the grid spacing")
    return R / np.sqrt(norm)


def plane_phase(grid: Grid, p0, x0=None, chirp: float = 0.0) -> np.ndarray:
    S = sum(p0[a] * coord for a, coord in enumerate(grid.coords))
    if chirp:
        S = S - 0.5 * chirp * _offset2(grid, x0)
    return np.asarray(S, dtype=float) + np.zeros(grid.shape)


def component_amplitudes(spec: InitialSpec, gspec: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    grid = build_grid(gspec)
    if spec.kind == "two-bump":
        return bump_amplitude(grid, spec.x0, spec.width), bump_amplitude(grid, spec.x0_2, spec.width)
    return gaussian_amplitude(grid, spec.x0, spec.sigma), gaussian_amplitude(grid, spec.x0_2, spec.sigma_2)


def vortex_state(grid: Grid, charge: int, r0: float, center, c: PhysicalConstants) -> WaveFunction:
    """``(r/r0)^|n| exp(-r^2/2r0^2) exp(i n theta)``, normalized."""
    dx = grid.coords[0] - center[0]
    dy = grid.coords[1] - center[1]
    r = np.hypot(dx, dy)
    R = (r / r0) ** abs(charge) * np.exp(-r ** 2 / (2 * r0 ** 2))
    psi = R * np.exp(1j * charge * np.arctan2(dy, dx))
    return WaveFunction(grid, psi).normalized()


def build_initial(cfg: ExperimentConfig, grid: Grid, c: PhysicalConstants,
                  base_dir: str | None = None) -> InitialState:
    spec = cfg.initial
    if spec.kind == "gaussian":
        R = gaussian_amplitude(grid, spec.x0, spec.sigma)
        S = plane_phase(grid, spec.p0, spec.x0, spec.chirp)
        fields = MadelungFields(grid, R, S)
        return InitialState(fields, [(R, S)], (1.0,))
    if spec.kind in ("two-gaussian", "two-bump"):
        R1, R2 = component_amplitudes(spec, cfg.grid)
        S1 = plane_phase(grid, spec.p0)
        S2 = plane_phase(grid, spec.p0_2)
        comps = [(R1, S1), (R2, S2)]
        if spec.kind == "two-bump":
            # disjoint supports: the combined amplitude is just the weighted sum
            R = spec.c1 * R1 + spec.c2 * R2
            S = np.where(R1 > 0, S1, S2)
            norm = grid.integrate(R * R)
            return InitialState(MadelungFields(grid, np.abs(R) / np.sqrt(norm), S), comps,
                                (spec.c1, spec.c2))
        if np.array_equal(S1, S2) and spec.c1 * spec.c2 >= 0:
            # a shared phase needs no unwrapping, which keeps S exact in the far tails
            R = np.abs(spec.c1 * R1 + spec.c2 * R2)
            fields = MadelungFields(grid, R, S1)
            state = fields if cfg.evolver == "classical" else recompose(fields, c)
            return InitialState(state, comps, (spec.c1, spec.c2))
        psi = spec.c1 * R1 * np.exp(1j * S1 / c.hbar) + spec.c2 * R2 * np.exp(1j * S2 / c.hbar)
        wf = WaveFunction(grid, psi)
        state = wf if cfg.evolver == "linear" else decompose(wf, c=c)
        return InitialState(state, comps, (spec.c1, spec.c2))
    if spec.kind == "vortex":
        wf = vortex_state(grid, spec.n, spec.r0, spec.x0, c)
        state = wf if cfg.evolver == "linear" else decompose(wf, c=c)
        return InitialState(state, [], (1.0,))
    R, S = _read_table(resolve_path(base_dir, spec.file), ("R", "S"), grid)
    return InitialState(MadelungFields(grid, R, S), [(R, S)], (1.0,))
