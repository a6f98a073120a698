"""Measurement on a nonnegative amplitude: collapse, sampling, indirect momentum and pure/mixed states."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import BasisViolation, DegenerateInterval, PreconditionError, ZeroOverlap
from .fields import Grid, MadelungFields, PhysicalConstants, ScalarField
from .trajectories import sample_positions

NORM_TOL = 1e-10


def _values(f) -> np.ndarray:
    return f.values if isinstance(f, ScalarField) else np.asarray(f, dtype=float)


@dataclass(frozen=True, eq=False)
class PositiveBasis:
    """Nonnegative fields ``R_i`` with mixing weights ``w_i``.

    Construction only checks shapes. :meth:`violations` lists what breaks
    the basis contract (positivity, normalization, disjoint supports,
    weights), so a bad basis can still be evaluated to show the cross term.
    """

    grid: Grid
    fields: tuple
    weights: tuple

    def __post_init__(self):
        fields = tuple(np.asarray(_values(f), dtype=float) for f in self.fields)
        weights = tuple(float(w) for w in self.weights)
        if not fields or len(fields) != len(weights):
            raise PreconditionError("need one weight per field and at least one field")
        for f in fields:
            if f.shape != self.grid.shape or not np.all(np.isfinite(f)):
                raise PreconditionError("basis fields must be finite and match the grid")
        object.__setattr__(self, "fields", fields)
        object.__setattr__(self, "weights", weights)

    def violations(self) -> list[str]:
        out = []
        w = np.array(self.weights)
        if np.any(w < 0) or abs(w.sum() - 1.0) > NORM_TOL:
            out.append("weights must be nonnegative and sum to 1")
        for i, f in enumerate(self.fields):
            if np.any(f < 0):
                out.append(f"field {i} has negative samples")
            norm = self.grid.integrate(f * f)
            if abs(norm - 1.0) > NORM_TOL:
                out.append(f"field {i} has norm {norm:.6g}")
        for i in range(len(self.fields)):
            for j in range(i + 1, len(self.fields)):
                if np.any(np.minimum(self.fields[i], self.fields[j]) > 0):
                    out.append(f"fields {i} and {j} overlap")
        return out


@dataclass(frozen=True, eq=False)
class DiagonalObservable:
    """A position-diagonal observable ``A(x)`` sampled on the grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape or not np.all(np.isfinite(vals)):
            raise PreconditionError("observable must be finite and match the grid")
        object.__setattr__(self, "values", vals)


def collapse_position(fields: MadelungFields, x_m, sigma_m: float) -> MadelungFields:
    """Restrict ``R`` to a Gaussian window of resolution ``sigma_m`` around ``x_m``.

    The window is ``exp(-|x - x_m|^2 / 4 sigma_m^2)`` so that the density is
    narrowed with standard deviation ``sigma_m``; ``S`` is left untouched.
    """
    grid = fields.grid
    if not sigma_m >= 2 * min(grid.spacing) * (1 - 1e-12):
        raise PreconditionError("sigma_m must be at least two grid cells")
    center = np.atleast_1d(np.asarray(x_m, dtype=float))
    if center.size != grid.dim:
        raise PreconditionError(f"x_m needs {grid.dim} coordinate(s)")
    r2 = np.zeros(grid.shape)
    for axis, (coord, L) in enumerate(zip(grid.coords, grid.lengths)):
        d = coord - center[axis]
        if grid.periodic:
            d = d - L * np.round(d / L)
        r2 += d * d
    R = fields.R * np.exp(-r2 / (4.0 * sigma_m ** 2))
    norm = grid.integrate(R * R)
    if not norm > 1e-300 * max(1.0, grid.integrate(fields.rho)):
        raise ZeroOverlap(f"no density within reach of x_m={tuple(center)}")
    return MadelungFields(grid, R / np.sqrt(norm), fields.S, fields.node_eps)


def sample_measurement(rho, seed: int, count: int | None = None):
    """Position(s) drawn from ``rho``; one value unless ``count`` is given.

    Uses the same sampler as the trajectory ensembles. 1D returns floats,
    2D returns coordinate arrays.
    """
    if isinstance(rho, MadelungFields):
        grid, dens = rho.grid, rho.rho
    else:
        grid, dens = rho.grid, rho.values
    n = 1 if count is None else int(count)
    pts = sample_positions(grid, dens, n, np.random.default_rng(seed))
    if grid.dim == 1:
        pts = pts[:, 0]
    if count is None:
        return float(pts[0]) if grid.dim == 1 else pts[0]
    return pts


def momentum_from_positions(x1, t1: float, x2, t2: float, c: PhysicalConstants | None = None):
    """Momentum ``m (x2 - x1) / (t2 - t1)`` from two position readings."""
    c = c or PhysicalConstants()
    if t2 == t1:
        raise DegenerateInterval("the two readings are simultaneous")
    if not t2 > t1:
        raise PreconditionError("t2 must come after t1")
    dx = np.asarray(x2, dtype=float) - np.asarray(x1, dtype=float)
    p = c.mass * dx / (t2 - t1)
    return float(p) if p.ndim == 0 else p


def pure_vs_mixed_expectation(basis: PositiveBasis, A: DiagonalObservable
                              ) -> tuple[float, float, float]:
    """Return ``(pure, mixed, cross)`` expectations of ``A``.

    ``cross`` is the off-diagonal sum computed directly, which equals
    ``pure - mixed``. Raises :class:`BasisViolation` (carrying the triple)
    when the basis breaks its contract.
    """
    grid = basis.grid
    a = A.values
    amp = [np.sqrt(max(w, 0.0)) * f for w, f in zip(basis.weights, basis.fields)]
    pure = grid.integrate(sum(amp) ** 2 * a)
    mixed = sum(w * grid.integrate(f * f * a) for w, f in zip(basis.weights, basis.fields))
    cross = 0.0
    for i in range(len(amp)):
        for j in range(len(amp)):
            if i != j:
                cross += grid.integrate(amp[i] * amp[j] * a)
    result = (float(pure), float(mixed), float(cross))
    problems = basis.violations()
    if problems:
        raise BasisViolation("; ".join(problems), result)
    return result


class ExchangeResult(NamedTuple):
    max: float
    field: np.ndarray | None


def exchange_term_max(R1, R2, return_field: bool = False) -> ExchangeResult:
    """Largest value of ``2 R1(x) R2(x) R1(y) R2(y)`` over the product grid."""
    a = _values(R1)
    b = _values(R2)
    if a.shape != b.shape or a.ndim != 1:
        raise PreconditionError("exchange term needs two fields on the same 1D grid")
    g = a * b
    field = 2.0 * np.multiply.outer(g, g) if return_field else None
    peak = 2.0 * max(float(g.max()) ** 2, float(g.min()) ** 2)
    return ExchangeResult(peak, field)

