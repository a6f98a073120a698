import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from clschrod.errors import BasisViolation, DegenerateInterval, PreconditionError, ZeroOverlap
from clschrod.fields import Grid, MadelungFields, PhysicalConstants, ScalarField
from clschrod.statistics import (DiagonalObservable, PositiveBasis, collapse_position,
                                 exchange_term_max, momentum_from_positions,
                                 pure_vs_mixed_expectation, sample_measurement)


def gaussian_R(g, x0=0.0, sigma=1.0):
    return (2 * math.pi * sigma ** 2) ** -0.25 * np.exp(-(g.x - x0) ** 2 / (4 * sigma ** 2))


def bump(g, center, half_width):
    u = (g.x - center) / half_width
    R = np.where(np.abs(u) < 1, np.cos(0.5 * math.pi * u) ** 2, 0.0)
    return R / math.sqrt(g.integrate(R * R))


def width(g, R):
    rho = R * R / g.integrate(R * R)
    mean = g.integrate(rho * g.x)
    return math.sqrt(g.integrate(rho * (g.x - mean) ** 2))


# ---------------------------------------------------------------- collapse

def test_collapse_on_uniform_prior_gives_window():
    g = Grid.line(1024, -20, 20)
    f = MadelungFields(g, np.full(g.n, 1 / math.sqrt(40)), 0.3 * g.x)
    out = collapse_position(f, 2.0, 0.5)
    assert g.integrate(out.rho) == pytest.approx(1.0, abs=1e-12)
    assert width(g, out.R) == pytest.approx(0.5, rel=1e-6)
    assert np.array_equal(out.S, f.S)


def test_collapse_twice_narrows_by_root_two():
    g = Grid.line(2048, -20, 20)
    f = MadelungFields(g, np.full(g.n, 1.0), 0 * g.x)
    once = collapse_position(f, 0.0, 1.0)
    twice = collapse_position(once, 0.0, 1.0)
    assert width(g, twice.R) / width(g, once.R) == pytest.approx(1 / math.sqrt(2), rel=1e-6)


def test_collapse_far_from_support():
    g = Grid.line(256, -20, 20, boundary="absorbing-pad")
    f = MadelungFields(g, bump(g, -10, 1.0), 0 * g.x)
    with pytest.raises(ZeroOverlap):
        collapse_position(f, 15.0, 0.4)


def test_collapse_resolution_floor():
    g = Grid.line(64, -5, 5)
    f = MadelungFields(g, gaussian_R(g), 0 * g.x)
    with pytest.raises(PreconditionError):
        collapse_position(f, 0.0, g.dx)


@settings(max_examples=30, deadline=None)
@given(x_m=st.floats(-5, 5), sigma_m=st.floats(0.2, 3.0), x0=st.floats(-3, 3))
def test_collapse_stays_positive_and_normalized(x_m, sigma_m, x0):
    g = Grid.line(256, -12.8, 12.8)
    f = MadelungFields(g, gaussian_R(g, x0, 1.5), 0 * g.x)
    out = collapse_position(f, x_m, sigma_m)
    assert np.all(out.R >= 0)
    assert g.integrate(out.rho) == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------- sampling

def test_sample_narrow_bump():
    g = Grid.line(1024, -10, 10)
    f = MadelungFields(g, bump(g, 3.0, 0.1), 0 * g.x)
    x = sample_measurement(f, seed=4, count=1000)
    assert np.all(np.abs(x - 3.0) <= 0.1 + g.dx)
    assert isinstance(sample_measurement(f, seed=4), float)


def test_two_bump_occupancy():
    g = Grid.line(1024, -10, 10)
    R = (bump(g, -4, 1) + bump(g, 4, 1)) / math.sqrt(2)
    x = sample_measurement(ScalarField(g, R * R), seed=9, count=20000)
    assert np.mean(x > 0) == pytest.approx(0.5, abs=0.02)


def test_sampling_deterministic_in_seed():
    g = Grid.line(256, -10, 10)
    f = MadelungFields(g, gaussian_R(g), 0 * g.x)
    assert np.array_equal(sample_measurement(f, 21, 100), sample_measurement(f, 21, 100))


def test_born_rule_chi_square():
    g = Grid.line(1024, -12.8, 12.8)
    rho = gaussian_R(g, 0.5, 1.2) ** 2
    x = sample_measurement(ScalarField(g, rho), seed=2024, count=100_000)
    edges = np.linspace(-4, 5, 33)
    observed, _ = np.histogram(x, bins=edges)
    cdf = stats.norm(0.5, 1.2).cdf
    expected = np.diff(cdf(edges)) * x.size
    expected *= observed.sum() / expected.sum()
    assert stats.chisquare(observed, expected).pvalue > 0.01


# ------------------------------------------------------------ indirect momentum

def test_momentum_from_two_positions():
    c = PhysicalConstants(mass=2.0)
    assert momentum_from_positions(1.0, 0.0, 4.0, 1.5, c) == pytest.approx(4.0)
    assert np.allclose(momentum_from_positions([0.0, 1.0], 0.0, [1.0, 3.0], 1.0), [1.0, 2.0])


def test_momentum_needs_ordered_times():
    with pytest.raises(DegenerateInterval):
        momentum_from_positions(0.0, 1.0, 1.0, 1.0)
    with pytest.raises(PreconditionError):
        momentum_from_positions(0.0, 2.0, 1.0, 1.0)


# -------------------------------------------------------------- pure vs mixed

def test_pure_equals_mixed_on_disjoint_basis():
    g = Grid.line(1024, -10, 10, boundary="absorbing-pad")
    basis = PositiveBasis(g, (bump(g, -3, 2), bump(g, 3, 2)), (0.5, 0.5))
    assert basis.violations() == []
    for a in (g.x, g.x ** 2):
        pure, mixed, cross = pure_vs_mixed_expectation(basis, DiagonalObservable(g, a))
        assert abs(pure - mixed) < 1e-12 and cross == 0.0


def test_overlapping_basis_is_rejected_with_cross_term():
    g = Grid.line(1024, -10, 10, boundary="absorbing-pad")
    basis = PositiveBasis(g, (gaussian_R(g, -1), gaussian_R(g, 1)), (0.5, 0.5))
    with pytest.raises(BasisViolation) as info:
        pure_vs_mixed_expectation(basis, DiagonalObservable(g, g.x ** 2))
    pure, mixed, cross = info.value.result
    assert cross > 0.1 and pure - mixed == pytest.approx(cross)


def test_basis_contract_violations_listed():
    g = Grid.line(64, -5, 5)
    R = bump(g, 0, 1)
    assert PositiveBasis(g, (R,), (0.7,)).violations()
    assert PositiveBasis(g, (2 * R,), (1.0,)).violations()
    with pytest.raises(PreconditionError):
        PositiveBasis(g, (R,), (0.5, 0.5))


# ------------------------------------------------------------------ exchange

def test_exchange_vanishes_for_disjoint_supports():
    g = Grid.line(512, -10, 10)
    assert exchange_term_max(bump(g, -3, 1), bump(g, 3, 1)).max == 0.0


def test_exchange_tiny_for_separated_gaussians():
    g = Grid.line(1024, -12.8, 12.8)
    assert exchange_term_max(gaussian_R(g, -4, 0.5), gaussian_R(g, 4, 0.5)).max < 1e-12


def test_exchange_field_peak_matches_max():
    g = Grid.line(128, -5, 5)
    R = gaussian_R(g, 0.0, 1.0)
    res = exchange_term_max(R, R, return_field=True)
    assert res.field.shape == (128, 128)
    assert res.max == pytest.approx(res.field.max())
    assert res.max == pytest.approx(2 * R.max() ** 4)
