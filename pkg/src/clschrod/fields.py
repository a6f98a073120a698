"""Grids, wave functions, the polar (amplitude/phase) decomposition and the quantum potential."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np
from scipy import ndimage

from . import kernels
from .errors import AllZeroField, LoopThroughNode, PreconditionError

NODE_EPS = 1e-10
REG_EPS = 1e-12
BOUNDARIES = ("periodic", "absorbing-pad")


@dataclass(frozen=True)
class Grid:
    """Uniform lattice with ``n`` points per axis.

    Sample ``i`` sits at ``lo + i*dx`` with ``dx = (hi - lo)/n``; the upper
    bound is excluded, which is the natural layout for periodic grids and is
    kept for padded ones too. ``pad`` is the width in cells of the cosine
    taper applied to the density near the walls of an ``absorbing-pad`` grid.
    """

    dim: int
    n: int
    bounds: tuple[tuple[float, float], ...]
    boundary: str = "periodic"
    pad: int = 0

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", bounds)
        if self.dim not in (1, 2):
            raise PreconditionError(f"dim must be 1 or 2, got {self.dim}")
        if len(bounds) != self.dim:
            raise PreconditionError("need one (lo, hi) pair per axis")
        if self.n < 8:
            raise PreconditionError(f"n must be >= 8, got {self.n}")
        if any(not hi > lo for lo, hi in bounds):
            raise PreconditionError(f"empty domain {bounds}")
        if self.boundary not in BOUNDARIES:
            raise PreconditionError(f"unknown boundary {self.boundary!r}")
        if self.periodic and self.n & (self.n - 1):
            raise PreconditionError("periodic (spectral) grids need n a power of two")
        if not 0 <= self.pad < self.n // 2:
            raise PreconditionError("pad must lie in [0, n/2)")

    @classmethod
    def line(cls, n: int, lo: float, hi: float, boundary: str = "periodic", pad: int = 0) -> Grid:
        return cls(1, n, ((lo, hi),), boundary, pad)

    @classmethod
    def square(cls, n: int, lo: float, hi: float, boundary: str = "periodic", pad: int = 0) -> Grid:
        return cls(2, n, ((lo, hi), (lo, hi)), boundary, pad)

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((hi - lo) / self.n for lo, hi in self.bounds)

    @property
    def dx(self) -> float:
        return self.spacing[0]

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(hi - lo for lo, hi in self.bounds)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def axes(self) -> list[np.ndarray]:
        return [lo + h * np.arange(self.n) for (lo, _), h in zip(self.bounds, self.spacing)]

    @property
    def coords(self) -> list[np.ndarray]:
        """Coordinate arrays broadcast to the full grid shape (``ij`` indexing)."""
        if self.dim == 1:
            return self.axes
        return list(np.meshgrid(*self.axes, indexing="ij"))

    @property
    def x(self) -> np.ndarray:
        return self.coords[0]

    def wavenumbers(self, axis: int = 0) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.n, d=self.spacing[axis])

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(values) * self.cell_volume)

    def taper(self) -> np.ndarray:
        """Cosine taper: 1 in the interior, falling to 0 across ``pad`` cells at each wall."""
        w = np.ones(self.n)
        if self.pad:
            ramp = np.sin(0.5 * np.pi * (np.arange(self.pad) + 0.5) / self.pad) ** 2
            w[: self.pad] = ramp
            w[-self.pad:] = ramp[::-1]
        out = w
        for _ in range(self.dim - 1):
            out = np.multiply.outer(out, w)
        return out


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if not (self.hbar > 0 and self.mass > 0):
            raise PreconditionError("hbar and mass must be positive")


def _check_shape(grid: Grid, arr: np.ndarray, name: str):
    if arr.shape != grid.shape:
        raise PreconditionError(f"{name} has shape {arr.shape}, grid expects {grid.shape}")
    if not np.all(np.isfinite(arr)):
        raise PreconditionError(f"{name} has non-finite entries")


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray
    flags: np.ndarray | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        _check_shape(self.grid, vals, "field")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True, eq=False)
class WaveFunction:
    grid: Grid
    psi: np.ndarray

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=complex)
        _check_shape(self.grid, psi, "psi")
        object.__setattr__(self, "psi", psi)

    @property
    def rho(self) -> np.ndarray:
        return np.abs(self.psi) ** 2

    def norm(self) -> float:
        return self.grid.integrate(self.rho)

    def normalized(self) -> WaveFunction:
        return WaveFunction(self.grid, self.psi / math.sqrt(self.norm()))


@dataclass(frozen=True, eq=False)
class MadelungFields:
    """Amplitude ``R >= 0`` and action ``S`` on a grid.

    Samples with ``R < node_eps * max(R)`` are nodes: their ``S`` carries no
    phase information and is only a continuation from neighbours.
    """

    grid: Grid
    R: np.ndarray
    S: np.ndarray
    node_eps: float = NODE_EPS

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        S = np.asarray(self.S, dtype=float)
        _check_shape(self.grid, R, "R")
        _check_shape(self.grid, S, "S")
        if np.any(R < 0):
            raise PreconditionError("R must be nonnegative")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "S", S)

    @property
    def rho(self) -> np.ndarray:
        return self.R ** 2

    @cached_property
    def nodes(self) -> np.ndarray:
        return self.R < self.node_eps * self.R.max()

    @property
    def node_count(self) -> int:
        return int(np.count_nonzero(self.nodes))

    @classmethod
    def from_rho(cls, grid: Grid, rho: np.ndarray, S: np.ndarray, node_eps: float = NODE_EPS):
        return cls(grid, np.sqrt(np.maximum(rho, 0.0)), S, node_eps)


# ---------------------------------------------------------------- derivatives

def _spectral_derivative(f: np.ndarray, grid: Grid, axis: int, order: int) -> np.ndarray:
    n = grid.n
    fk = np.fft.rfft(f, axis=axis)
    k = 2 * np.pi * np.fft.rfftfreq(n, d=grid.spacing[axis])
    mult = (1j * k) ** order
    if order % 2 == 1:
        mult[-1] = 0.0  # Nyquist mode has no odd derivative
    shape = [1] * f.ndim
    shape[axis] = k.size
    return np.fft.irfft(fk * mult.reshape(shape), n=n, axis=axis)


def _second_difference(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    f = np.moveaxis(f, axis, 0)
    out = np.empty_like(f)
    out[1:-1] = f[2:] - 2 * f[1:-1] + f[:-2]
    out[0] = 2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]
    out[-1] = 2 * f[-1] - 5 * f[-2] + 4 * f[-3] - f[-4]
    return np.moveaxis(out / (h * h), 0, axis)


def gradient(f: np.ndarray, grid: Grid) -> np.ndarray:
    """Gradient, shape ``(dim, *grid.shape)``: spectral if periodic, else 2nd-order differences."""
    f = np.asarray(f, dtype=float)
    if grid.periodic:
        return np.stack([_spectral_derivative(f, grid, a, 1) for a in range(grid.dim)])
    return np.stack([np.gradient(f, grid.spacing[a], axis=a, edge_order=2)
                     for a in range(grid.dim)])


# polynomial extrapolation one cell past the last sample, degree 6
_EXTRAP = np.array([math.comb(7, j) * (-1) ** (j + 1) for j in range(1, 8)], dtype=float)


def _ramp_slope(S: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    # S extrapolated to x = hi, compared with the sample at lo
    s = np.moveaxis(S, axis, 0)
    beyond = np.tensordot(_EXTRAP, s[-1:-8:-1], axes=1)
    return (beyond - s[0]) / grid.lengths[axis]


def ramp_slopes(S: np.ndarray, grid: Grid) -> list[np.ndarray] | None:
    """Per-axis slope of the linear ramp carried by ``S`` on a periodic grid, else None."""
    if not grid.periodic:
        return None
    return [_ramp_slope(np.asarray(S, dtype=float), grid, a) for a in range(grid.dim)]


def phase_gradient(S: np.ndarray, grid: Grid, slopes: Sequence | None = None) -> np.ndarray:
    """Gradient of an action field.

    On periodic grids ``S`` may carry a linear ramp (a plane-wave momentum or
    a winding); the ramp is split off per axis so that the spectral part
    only sees a periodic function. ``slopes`` (see :func:`ramp_slopes`)
    overrides the estimate read off the edges of ``S``.
    """
    S = np.asarray(S, dtype=float)
    if not grid.periodic:
        return gradient(S, grid)
    if slopes is None:
        slopes = ramp_slopes(S, grid)
    out = []
    for a in range(grid.dim):
        g = slopes[a]
        shape = [1] * grid.dim
        shape[a] = grid.n
        x = grid.axes[a].reshape(shape)
        gb = np.expand_dims(g, a) if grid.dim > 1 else g
        out.append(_spectral_derivative(S - gb * x, grid, a, 1) + gb)
    return np.stack(out)


def laplacian(f: np.ndarray, grid: Grid) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if grid.periodic:
        return sum(_spectral_derivative(f, grid, a, 2) for a in range(grid.dim))
    return sum(_second_difference(f, grid.spacing[a], a) for a in range(grid.dim))


def divergence(F: np.ndarray, grid: Grid) -> np.ndarray:
    """Divergence of a flux ``F`` (shape ``(dim, *grid.shape)``).

    Non-periodic grids use central differences with zero flux beyond the
    walls, so the discrete total only changes by the flux at the outermost
    samples.
    """
    if grid.periodic:
        return sum(_spectral_derivative(F[a], grid, a, 1) for a in range(grid.dim))
    out = np.zeros(grid.shape)
    for a in range(grid.dim):
        f = np.moveaxis(F[a], a, 0)
        padded = np.concatenate([np.zeros_like(f[:1]), f, np.zeros_like(f[:1])])
        out += np.moveaxis((padded[2:] - padded[:-2]) / (2 * grid.spacing[a]), 0, a)
    return out


# ------------------------------------------------------------ polar form

def _fill_nearest(values: np.ndarray) -> np.ndarray:
    missing = np.isnan(values)
    if not missing.any():
        return values
    idx = ndimage.distance_transform_edt(missing, return_distances=False, return_indices=True)
    return values[tuple(idx)]


def decompose(psi: WaveFunction, node_eps: float = NODE_EPS,
              c: PhysicalConstants | None = None) -> MadelungFields:
    """Split ``psi`` into amplitude and unwrapped action, ``psi = R exp(iS/hbar)``.

    Unwrapping runs axis by axis outward from the sample of largest ``|psi|``.
    Node samples (``|psi| < node_eps * max|psi|``) take ``S`` from their
    nearest non-node sample.
    """
    grid = psi.grid
    R = np.abs(psi.psi)
    peak = R.max()
    if peak == 0:
        raise AllZeroField("cannot decompose an all-zero wave function")
    arg = np.angle(psi.psi)
    valid = R >= node_eps * peak
    seed = np.unravel_index(np.argmax(R), R.shape)
    if grid.dim == 1:
        phase = kernels.unwrap_line(arg, valid, int(seed[0]), float(arg[seed]))
    else:
        i0, j0 = (int(s) for s in seed)
        spine = kernels.unwrap_line(np.ascontiguousarray(arg[:, j0]),
                                    np.ascontiguousarray(valid[:, j0]), i0, float(arg[seed]))
        spine = _fill_nearest(spine)
        phase = np.empty(grid.shape)
        for i in range(grid.n):
            phase[i] = kernels.unwrap_line(arg[i], valid[i], j0, float(spine[i]))
    phase = _fill_nearest(phase)
    hbar = c.hbar if c is not None else 1.0
    return MadelungFields(grid, R, hbar * phase, node_eps)


def recompose(fields: MadelungFields, c: PhysicalConstants | None = None) -> WaveFunction:
    hbar = c.hbar if c is not None else 1.0
    return WaveFunction(fields.grid, fields.R * np.exp(1j * fields.S / hbar))


def quantum_potential(R: ScalarField | MadelungFields, c: PhysicalConstants,
                      reg_eps: float = REG_EPS) -> ScalarField:
    """``Q = -(hbar^2/2m) lap(R)/R``; zero and flagged where ``R < reg_eps*max(R)``."""
    grid = R.grid
    r = R.R if isinstance(R, MadelungFields) else R.values
    if np.any(r < 0):
        raise PreconditionError("R must be nonnegative")
    peak = r.max()
    if peak == 0:
        raise AllZeroField("quantum potential of an all-zero amplitude")
    small = r < reg_eps * peak
    lap = laplacian(r, grid)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        q = -(c.hbar ** 2 / (2 * c.mass)) * lap / r
    q[small] = 0.0
    return ScalarField(grid, q, small)


# -------------------------------------------------------------- winding

class Winding(NamedTuple):
    n: int
    circulation: float
    residual: float


def circular_loop(grid: Grid, center: Sequence[float], radius: float) -> list[tuple[int, int]]:
    """Ordered, counter-clockwise cycle of sample indices approximating a circle."""
    if grid.dim != 2:
        raise PreconditionError("circular loops need a 2D grid")
    h = min(grid.spacing)
    count = max(16, int(math.ceil(2 * math.pi * radius / (0.5 * h))))
    loop: list[tuple[int, int]] = []
    for phi in np.linspace(0.0, 2 * math.pi, count, endpoint=False):
        idx = tuple(
            int(round((center[a] + radius * (math.cos(phi) if a == 0 else math.sin(phi))
                       - grid.bounds[a][0]) / grid.spacing[a])) % grid.n
            for a in range(2)
        )
        if not loop or loop[-1] != idx:
            loop.append(idx)
    if len(loop) > 1 and loop[0] == loop[-1]:
        loop.pop()
    return loop


def winding_circulation(fields: MadelungFields, loop: Sequence, c: PhysicalConstants | None = None
                        ) -> Winding:
    """Circulation of ``grad S`` around a closed cycle of sample indices.

    Each step contributes the branch-adjusted change of ``S``; the winding
    number is the circulation in units of ``2 pi hbar``.
    """
    hbar = c.hbar if c is not None else 1.0
    idx = [tuple(np.atleast_1d(p)) for p in loop]
    if len(idx) > 1 and idx[0] == idx[-1]:
        idx = idx[:-1]
    if len(idx) < 3:
        raise PreconditionError("a loop needs at least three samples")
    nodes = fields.nodes
    if any(nodes[p] for p in idx):
        raise LoopThroughNode("loop passes through a node-flagged sample")
    phase = np.array([fields.S[p] for p in idx]) / hbar
    steps = kernels.wrap_angle(np.diff(np.append(phase, phase[0])))
    turns = float(np.sum(steps)) / (2 * math.pi)
    n = int(round(turns))
    return Winding(n, turns * 2 * math.pi * hbar, abs(turns - n))
