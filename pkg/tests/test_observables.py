import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clschrod.dynamics import EvolverConfig, Potential, evolve
from clschrod.errors import InsufficientSnapshots, NodeInSuperposition, ZeroNorm
from clschrod.fields import Grid, MadelungFields, PhysicalConstants, WaveFunction
from clschrod.observables import (ProbeResult, ehrenfest_residuals, interference_excess, moments,
                                  r_linearity_contrast, r_linearity_defect,
                                  superposition_violation, with_ehrenfest)

C = PhysicalConstants()


def gaussian_R(g, x0=0.0, sigma=1.0):
    return (2 * math.pi * sigma ** 2) ** -0.25 * np.exp(-(g.x - x0) ** 2 / (4 * sigma ** 2))


def test_moments_of_moving_gaussian():
    g = Grid.line(512, -25.6, 25.6)
    psi = WaveFunction(g, gaussian_R(g, 1.5, 0.8) * np.exp(2j * g.x))
    r = moments(psi, C)
    assert r.norm == pytest.approx(1.0, abs=1e-12)
    assert r.mean_x == pytest.approx(1.5, abs=1e-12)
    assert r.sigma_x == pytest.approx(0.8, abs=1e-12)
    assert r.mean_p == pytest.approx(2.0, abs=1e-10)
    assert r.sigma_p == pytest.approx(1 / (2 * 0.8), abs=1e-10)
    assert r.energy == pytest.approx(0.5 * (4 + 1 / (4 * 0.64)), abs=1e-10)


def test_polar_moments_use_local_momentum():
    g = Grid.line(512, -25.6, 25.6)
    f = MadelungFields(g, gaussian_R(g, 0.0, 0.8), 2.0 * g.x)
    r = moments(f, C)
    assert r.mean_p == pytest.approx(2.0, abs=1e-10)
    assert r.sigma_p == pytest.approx(0.0, abs=1e-8)


def test_zero_norm():
    g = Grid.line(16, 0, 1)
    with pytest.raises(ZeroNorm):
        moments(WaveFunction(g, np.zeros(16)), C)


def test_ehrenfest_for_linear_harmonic_run():
    g = Grid.line(256, -12.8, 12.8)
    v = Potential.harmonic(1.0)
    psi = WaveFunction(g, gaussian_R(g, 1.0, 0.6) * np.exp(0.5j * g.x))
    run = evolve(psi, v, C, EvolverConfig(dt=0.005, t_end=2.0, stride=2))
    r1, r2 = ehrenfest_residuals(run.records, v, run.snapshots, C)
    assert math.isnan(r1[0]) and math.isnan(r2[-1])
    assert np.nanmax(r1) < 1e-3 and np.nanmax(r2) < 1e-3
    rows = with_ehrenfest(run.records, v, run.snapshots, C)
    assert rows[1].ehrenfest1 == pytest.approx(r1[1])


def test_ehrenfest_needs_three_snapshots():
    g = Grid.line(16, -1, 1)
    psi = WaveFunction(g, np.ones(16))
    rec = [moments(psi, C)] * 2
    with pytest.raises(InsufficientSnapshots):
        ehrenfest_residuals(rec, Potential.free(), [psi, psi], C)


def _pair(g, c2_scale=1.0):
    psi1 = WaveFunction(g, gaussian_R(g, 0.0, 3.0) * np.exp(1j * g.x))
    psi2 = WaveFunction(g, c2_scale * gaussian_R(g, 0.0, 3.0) * np.exp(-1j * g.x))
    return psi1, psi2


def test_superposition_linear_is_additive():
    g = Grid.line(256, -8 * math.pi, 8 * math.pi)
    psi1, psi2 = _pair(g)
    res = superposition_violation(psi1, psi2, 3.0, 1.0, "linear", 1.0, dt=0.01, stride=20)
    assert res.verdict == "LINEAR"
    assert np.max(res.metric) < 1e-6


def test_superposition_with_zero_weight_is_trivial():
    g = Grid.line(256, -8 * math.pi, 8 * math.pi)
    psi1, psi2 = _pair(g)
    res = superposition_violation(psi1, psi2, 1.0, 0.0, "classical", 0.2, dt=0.01, stride=5)
    assert np.max(res.metric) < 1e-14


def test_superposition_rejects_nodes():
    g = Grid.line(256, -8 * math.pi, 8 * math.pi)
    psi1, psi2 = _pair(g)
    with pytest.raises(NodeInSuperposition):
        superposition_violation(psi1, psi2, 1.0, 1.0, "classical", 0.1)


def test_r_linearity_trivial_combination_is_exact():
    g = Grid.line(128, -12.8, 12.8)
    S = [0.5 * g.x for _ in range(3)]
    Ra, Rb = gaussian_R(g, -2), gaussian_R(g, 2)
    res = r_linearity_defect(Ra, Rb, 1.0, 0.0, g, [0.0, 0.1, 0.2], S)
    assert np.all(res.metric == 0.0)


def test_r_linearity_defect_under_classical_phase():
    g = Grid.line(256, -12.8, 12.8)
    f = MadelungFields(g, gaussian_R(g, 0.0, 2.0), 0.5 * g.x)
    run = evolve(f, Potential.free(), C, EvolverConfig("classical", dt=0.01, t_end=0.5,
                                                      stride=10))
    res = r_linearity_defect(gaussian_R(g, -2), gaussian_R(g, 2), 0.7, 1.3, g, run.times,
                             [s.S for s in run.snapshots], h_max=0.01)
    assert res.verdict == "PASS" and np.max(res.metric) < 1e-10


def test_r_linearity_rejects_negative_weights():
    g = Grid.line(16, -1, 1)
    with pytest.raises(ValueError):
        r_linearity_defect(np.ones(16), np.ones(16), -1.0, 1.0, g, [0.0], [np.zeros(16)])


def test_linear_amplitudes_are_not_additive():
    g = Grid.line(256, -12.8, 12.8)
    res = r_linearity_contrast(gaussian_R(g, -2), gaussian_R(g, 2), 1.0, 0.5, 0.5 * g.x, g,
                               Potential.free(), C, 0.01, 1.0, 10)
    assert res.verdict == "PASS" and res.metric[-1] > 1e-3


def test_interference_classical_vs_linear():
    g = Grid.line(512, -12.8, 12.8)
    R1, R2 = gaussian_R(g, -0.5), gaussian_R(g, 0.5)
    cls = interference_excess(R1, 0 * g.x, R2, 0 * g.x, "classical")
    assert cls.min_excess >= 0.0
    lin = interference_excess(R1, 5 * g.x, R2, -5 * g.x, "linear")
    assert lin.min_excess < 0 and lin.visibility > 0.9
    verdicts = [p.verdict for p in lin.probes()]
    assert verdicts == ["DESTRUCTIVE", "PASS"]


def test_interference_with_one_empty_component():
    g = Grid.line(64, -5, 5)
    res = interference_excess(gaussian_R(g), 0 * g.x, 0 * g.x, 0 * g.x, "classical")
    assert np.all(res.excess == 0) and res.visibility == 0.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=8, max_size=8),
       st.lists(st.floats(0, 10), min_size=8, max_size=8))
def test_classical_excess_never_negative(a, b):
    R1, R2 = np.array(a), np.array(b)
    res = interference_excess(R1, np.zeros(8), R2, np.zeros(8), "classical")
    assert res.min_excess >= 0.0


@settings(max_examples=20, deadline=None)
@given(sigma=st.floats(0.3, 2.0), p=st.floats(-3, 3), x0=st.floats(-2, 2))
def test_heisenberg_floor_for_gaussians(sigma, p, x0):
    g = Grid.line(512, -25.6, 25.6)
    psi = WaveFunction(g, gaussian_R(g, x0, sigma) * np.exp(1j * p * g.x))
    r = moments(psi, C)
    assert r.sigma_x * r.sigma_p == pytest.approx(0.5, rel=1e-6)


def test_classical_state_evades_uncertainty():
    g = Grid.line(1024, -12.8, 12.8)
    r = moments(MadelungFields(g, gaussian_R(g, 0.0, 0.1), g.x), C)
    assert r.sigma_x * r.sigma_p < 0.1


@pytest.mark.parametrize("name,values,threshold,verdict", [
    ("width_drift", [1e-9, 1e-8], 1e-6, "PASS"),
    ("width_drift", [1e-9, 1e-5], 1e-6, "FAIL"),
    ("superposition_violation", [0.0, 1e-9], 1e-6, "LINEAR"),
    ("superposition_violation", [0.0, 0.2], 1e-6, "NONLINEAR"),
    ("superposition_violation", [0.0, 1e-4], 1e-6, "INCONCLUSIVE"),
    ("interference_excess", [0.0, 1.0], 0.0, "CONSTRUCTIVE"),
    ("interference_excess", [-0.1], 0.0, "DESTRUCTIVE"),
    ("visibility", [0.95], 0.9, "PASS"),
    ("heisenberg_floor", [0.495], 0.495, "PASS"),
    ("width_drift", [math.nan], 1e-6, "INCONCLUSIVE"),
])
def test_verdict_rules(name, values, threshold, verdict):
    res = ProbeResult.build(name, np.arange(len(values)), values, threshold)
    assert res.verdict == verdict
    assert res.reproduce_verdict() == verdict
    assert len(res.rows()) == len(values)
