import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clschrod.dynamics import (EvolverConfig, Potential, cfl_bound, detect_caustic, evolve,
                               step_classical, step_linear)
from clschrod.errors import CausticDetected, NonPeriodicGrid, PreconditionError
from clschrod.fields import (Grid, MadelungFields, PhysicalConstants, WaveFunction, laplacian,
                             phase_gradient, quantum_potential, recompose)

C = PhysicalConstants()


def gaussian_R(g, x0=0.0, sigma=1.0):
    return (2 * math.pi * sigma ** 2) ** -0.25 * np.exp(-(g.x - x0) ** 2 / (4 * sigma ** 2))


# ------------------------------------------------------------ linear evolver

def test_plane_wave_phase():
    g = Grid.line(64, 0.0, 2 * math.pi)
    k, t = 3, 0.7
    psi = WaveFunction(g, np.exp(1j * k * g.x))
    run = evolve(psi, Potential.free(), C, EvolverConfig(dt=0.01, t_end=t))
    expected = np.exp(1j * (k * g.x - k ** 2 * t / 2))
    assert np.max(np.abs(run.final.psi - expected)) < 1e-10


def test_free_gaussian_width():
    g = Grid.line(1024, -40, 40)
    s0 = 0.5
    psi = WaveFunction(g, gaussian_R(g, sigma=s0) * np.exp(1j * g.x))
    run = evolve(psi, Potential.free(), C, EvolverConfig(dt=0.01, t_end=2.0, stride=20))
    for r in run.records:
        exact = s0 * math.sqrt(1 + (r.t / (2 * s0 ** 2)) ** 2)
        assert abs(r.sigma_x / exact - 1) < 1e-6
        assert r.mean_x == pytest.approx(r.t, abs=1e-9)


def test_coherent_state_follows_classical_orbit():
    g = Grid.line(256, -12.8, 12.8)
    psi = WaveFunction(g, gaussian_R(g, 2.0, 1 / math.sqrt(2)))
    run = evolve(psi, Potential.harmonic(1.0), C, EvolverConfig(dt=0.005, t_end=math.pi,
                                                                stride=40))
    for r in run.records:
        assert r.mean_x == pytest.approx(2 * math.cos(r.t), abs=1e-5)
        assert r.sigma_x == pytest.approx(1 / math.sqrt(2), abs=1e-5)


def test_linear_conserves_norm_and_energy():
    g = Grid.line(256, -12.8, 12.8)
    psi = WaveFunction(g, gaussian_R(g, 1.0, 0.7) * np.exp(0.5j * g.x))
    run = evolve(psi, Potential.quartic(0.05), C, EvolverConfig(dt=0.01, t_end=2.0, stride=10))
    norms = np.array([r.norm for r in run.records])
    energies = np.array([r.energy for r in run.records])
    assert np.max(np.abs(norms - 1)) < 1e-12
    assert np.max(np.abs(energies - energies[0])) < 1e-4 * abs(energies[0])


def test_strang_splitting_is_second_order():
    g = Grid.line(64, -6.4, 6.4)
    psi = WaveFunction(g, gaussian_R(g, 1.0, 0.8) * np.exp(0.3j * g.x))
    v = Potential.quartic(0.002)

    def final(dt):
        state = psi
        for _ in range(int(round(1.0 / dt))):
            state = step_linear(state, v, C, dt)
        return state.psi

    ref = final(0.0025)
    errs = [np.linalg.norm(final(dt) - ref) for dt in (0.04, 0.02)]
    assert math.log2(errs[0] / errs[1]) > 1.9


def test_linear_needs_periodic_grid():
    g = Grid.line(64, -5, 5, boundary="absorbing-pad")
    with pytest.raises(NonPeriodicGrid):
        step_linear(WaveFunction(g, gaussian_R(g)), Potential.free(), C, 0.01)


def test_linear_rejects_large_potential_step():
    g = Grid.line(64, -5, 5)
    with pytest.raises(PreconditionError):
        step_linear(WaveFunction(g, gaussian_R(g)), Potential.harmonic(10.0), C, 0.1)


# --------------------------------------------------------- classical evolver

def test_uniform_drift_is_rigid():
    g = Grid.line(512, -25.6, 25.6)
    p = 1.3
    f = MadelungFields(g, gaussian_R(g, -5.0, 0.3), p * g.x)
    run = evolve(f, Potential.free(), C, EvolverConfig("classical", dt=0.01, t_end=2.0,
                                                      stride=50))
    for t, s in zip(run.times, run.snapshots):
        shifted = gaussian_R(g, -5.0 + p * t, 0.3)
        assert np.max(np.abs(s.R - shifted)) < 1e-6
        assert np.max(np.abs(phase_gradient(s.S, g)[0] - p)) < 1e-9


def test_classical_width_constant_when_quantum_spreads():
    g = Grid.line(1024, -12.8, 12.8)
    f = MadelungFields(g, gaussian_R(g, 0.0, 0.1), g.x)
    run = evolve(f, Potential.free(), C, EvolverConfig("classical", dt=0.01, t_end=1.0,
                                                      stride=25))
    widths = np.array([r.sigma_x for r in run.records])
    assert np.max(np.abs(widths / widths[0] - 1)) < 1e-6


def test_tilt_accelerates_momentum():
    g = Grid.line(512, -20, 20, boundary="absorbing-pad", pad=32)
    F, p0 = 0.5, 1.0
    f = MadelungFields(g, gaussian_R(g, 0.0, 1.0), p0 * g.x)
    run = evolve(f, Potential.tilt(F), C, EvolverConfig("classical", dt=0.01, t_end=1.0,
                                                       stride=25))
    for t, s in zip(run.times, run.snapshots):
        grad = phase_gradient(s.S, g)[0]
        assert np.max(np.abs(grad - (p0 - F * t))) < 1e-9


def test_free_uniform_state_is_a_fixed_point():
    g = Grid.line(64, -5, 5)
    f = MadelungFields(g, np.full(64, 0.3), np.zeros(64))
    out = step_classical(f, Potential.free(), C, 0.1)
    assert np.array_equal(out.R, f.R) and np.array_equal(out.S, f.S)


def test_classical_conserves_mass_and_energy():
    g = Grid.line(512, -25.6, 25.6)
    S = g.x + 0.1 * np.sin(2 * math.pi * g.x / 25.6)
    f = MadelungFields(g, gaussian_R(g, 0.0, 1.5), S)
    run = evolve(f, Potential.free(), C, EvolverConfig("classical", dt=0.01, t_end=1.0,
                                                      stride=10))
    norms = np.array([r.norm for r in run.records])
    energies = np.array([r.energy for r in run.records])
    assert np.max(np.abs(norms - 1)) < 1e-12
    assert np.max(np.abs(energies - energies[0])) < 1e-8


def test_classical_solves_nonlinear_schrodinger():
    # i hbar dpsi/dt = [-hbar^2/2m lap + V - Q] psi, checked with a centred
    # time difference whose error must fall at second order
    g = Grid.line(256, -12.8, 12.8)
    p = 2 * math.pi * 4 / 25.6
    f = MadelungFields(g, gaussian_R(g, 1.0, 1.0),
                       p * g.x + 0.3 * np.sin(2 * math.pi * 2 * g.x / 25.6))
    v = Potential.free()
    f = evolve(f, v, C, EvolverConfig("classical", dt=0.005, t_end=0.3)).final
    res = []
    for h in (0.02, 0.01):
        mid = step_classical(f, v, C, h)
        end = step_classical(mid, v, C, h)
        a, b, d = (recompose(s, C).psi for s in (f, mid, end))
        H = (-0.5 * (laplacian(b.real, g) + 1j * laplacian(b.imag, g))
             - quantum_potential(mid, C).values * b)
        live = mid.R > 1e-3 * mid.R.max()
        res.append(np.max(np.abs(1j * (d - a) / (2 * h) - H)[live]))
    assert 1.8 < math.log2(res[0] / res[1]) < 2.2


def test_focusing_phase_raises_caustic():
    g = Grid.line(1024, -10.24, 10.24, boundary="absorbing-pad", pad=64)
    a = 1.0
    f = MadelungFields(g, gaussian_R(g, 0.0, 1.0), -0.5 * a * g.x ** 2)
    with pytest.raises(CausticDetected) as info:
        evolve(f, Potential.free(), C, EvolverConfig("classical", dt=0.005, t_end=2.0,
                                                    stride=20))
    assert abs(info.value.t - 1.0 / a) < 0.15
    partial = info.value.partial
    assert partial.times and partial.times[-1] <= info.value.t


def test_detect_caustic_hessian_metric():
    g = Grid.line(128, -5, 5, boundary="absorbing-pad")
    f = MadelungFields(g, gaussian_R(g), -5.0 * g.x ** 2)
    assert detect_caustic(f, C, 0.001, 0.1) is None
    report = detect_caustic(f, C, 0.05, 0.1)
    assert report.metric == "hessian" and report.value == pytest.approx(0.5)


def test_cfl_bound_scales_with_speed():
    g = Grid.line(128, -6.4, 6.4)
    slow = MadelungFields(g, gaussian_R(g), 0.0 * g.x)
    fast = MadelungFields(g, gaussian_R(g), 50.0 * g.x)
    assert cfl_bound(fast, C, 0.5) < cfl_bound(slow, C, 0.5)


@pytest.mark.parametrize("kwargs", [dict(kind="quantum"), dict(dt=0.0), dict(t_end=-1.0),
                                    dict(cfl=1.5), dict(caustic_threshold=0.0),
                                    dict(stride=0)])
def test_evolver_config_validation(kwargs):
    with pytest.raises(PreconditionError):
        EvolverConfig(**kwargs)


def test_snapshot_spacing_follows_stride():
    g = Grid.line(64, -6.4, 6.4)
    psi = WaveFunction(g, gaussian_R(g))
    run = evolve(psi, Potential.free(), C, EvolverConfig(dt=0.1, t_end=1.0, stride=3))
    assert np.allclose(run.times, [0.0, 0.3, 0.6, 0.9, 1.0])


@settings(max_examples=15, deadline=None)
@given(p=st.floats(-2, 2), x0=st.floats(-3, 3), sigma=st.floats(0.8, 1.5))
def test_classical_mass_conserved_property(p, x0, sigma):
    # widths resolved by at least eight cells, so clamping of ringing stays at round-off
    g = Grid.line(256, -25.6, 25.6)
    f = MadelungFields(g, gaussian_R(g, x0, sigma), p * g.x)
    run = evolve(f, Potential.free(), C, EvolverConfig("classical", dt=0.02, t_end=0.1))
    assert run.records[-1].norm == pytest.approx(run.records[0].norm, abs=1e-12)
