"""Named experiment presets, one per distinguishing claim.

Each preset is a plain config document; ``load_preset`` validates it like
any user file.
"""

from __future__ import annotations

import copy
import math

from .config import ExperimentConfig, validate

PI = math.pi

_PRESETS: dict[str, dict] = {
    # a narrow free packet spreads under the linear equation ...
    "dispersion": {
        "grid": {"n": 4096, "bounds": [-51.2, 51.2]},
        "initial": {"kind": "gaussian", "x0": 0.0, "sigma": 0.1, "p0": 1.0},
        "evolver": "linear",
        "time": {"dt": 0.01, "t_end": 2.0, "stride": 10},
        "probes": ["dispersion_law", "uncertainty"],
    },
    # ... and rides rigidly under the classical one
    "soliton_stability": {
        "grid": {"n": 1024, "bounds": [-12.8, 12.8]},
        "initial": {"kind": "gaussian", "x0": 0.0, "sigma": 0.1, "p0": 1.0},
        "evolver": "classical",
        "time": {"dt": 0.01, "t_end": 2.0, "stride": 10},
        "probes": ["width_drift", "uncertainty"],
    },
    # classical flow in a harmonic well focuses after a quarter period
    "harmonic_ehrenfest": {
        "grid": {"n": 1024, "bounds": [-10.24, 10.24], "boundary": "absorbing-pad"},
        "potential": {"kind": "harmonic", "omega": 1.0},
        "initial": {"kind": "gaussian", "x0": 1.0, "sigma": 1 / math.sqrt(2), "p0": 0.0},
        "evolver": "classical",
        "time": {"dt": 0.005, "t_end": 2 * PI, "stride": 1},
        "trajectories": {"count": 100, "seed": 1},
        "probes": ["ehrenfest", "harmonic_mean_x", "characteristics"],
    },
    "harmonic_ehrenfest_linear": {
        "grid": {"n": 1024, "bounds": [-10.24, 10.24]},
        "potential": {"kind": "harmonic", "omega": 1.0},
        "initial": {"kind": "gaussian", "x0": 1.0, "sigma": 1 / math.sqrt(2), "p0": 0.0},
        "evolver": "linear",
        "time": {"dt": 0.01, "t_end": 2 * PI, "stride": 2},
        "probes": ["ehrenfest", "harmonic_mean_x", "uncertainty"],
    },
    "bohmian_equivariance": {
        "grid": {"n": 1024, "bounds": [-10.24, 10.24], "boundary": "absorbing-pad"},
        "potential": {"kind": "harmonic", "omega": 1.0},
        "initial": {"kind": "gaussian", "x0": 1.0, "sigma": 1 / math.sqrt(2), "p0": 0.0},
        "evolver": "classical",
        "time": {"dt": 0.005, "t_end": 1.2, "stride": 20},
        "trajectories": {"count": 10000, "seed": 2, "dt": 0.005},
        "probes": ["equivariance_ks"],
    },
    "focusing_caustic": {
        "grid": {"n": 2048, "bounds": [-10.24, 10.24], "boundary": "absorbing-pad", "pad": 128},
        "initial": {"kind": "gaussian", "x0": 0.0, "sigma": 1.0, "chirp": 1.0},
        "evolver": "classical",
        "time": {"dt": 0.005, "t_end": 2.0, "stride": 20},
        "probes": ["caustic_time"],
    },
    "interference_classical": {
        "grid": {"n": 1024, "bounds": [-25.6, 25.6]},
        "initial": {"kind": "two-gaussian", "x0": -1.0, "x0_2": 1.0, "sigma": 1.0,
                    "sigma_2": 1.0, "c1": 1.0, "c2": 1.0},
        "evolver": "classical",
        "time": {"dt": 0.01, "t_end": 0.2, "stride": 10},
        "probes": ["interference_excess"],
    },
    "interference_linear": {
        "grid": {"n": 1024, "bounds": [-25.6, 25.6]},
        "initial": {"kind": "two-gaussian", "x0": 0.0, "x0_2": 0.0, "sigma": 1.0,
                    "sigma_2": 1.0, "p0": 5.0, "p0_2": -5.0, "c1": 1.0, "c2": 1.0},
        "evolver": "linear",
        "time": {"dt": 0.01, "t_end": 0.2, "stride": 10},
        "probes": ["interference_excess"],
    },
    "pure_vs_mixed": {
        "grid": {"n": 1024, "bounds": [-10.24, 10.24]},
        "initial": {"kind": "two-bump", "x0": -3.0, "x0_2": 3.0, "width": 2.0,
                    "c1": 1.0, "c2": 1.0},
        "evolver": "classical",
        "time": {"dt": 0.01, "t_end": 0.1, "stride": 10},
        "probes": ["pure_vs_mixed", "exchange_term"],
    },
    # amplitude std 1 (density std 1/sqrt 2), centres 8 amplitude widths apart
    "exchange_term": {
        "grid": {"n": 1024, "bounds": [-12.8, 12.8]},
        "initial": {"kind": "two-gaussian", "x0": -4.0, "x0_2": 4.0,
                    "sigma": 1 / math.sqrt(2), "sigma_2": 1 / math.sqrt(2),
                    "c1": 1.0, "c2": 1.0},
        "evolver": "classical",
        "time": {"dt": 0.01, "t_end": 0.1, "stride": 10},
        "probes": ["exchange_term"],
    },
    "winding": {
        "grid": {"dim": 2, "n": 128, "bounds": [-8.0, 8.0]},
        "initial": {"kind": "vortex", "n": 3, "r0": 2.0, "x0": [0.0, 0.0]},
        "evolver": "linear",
        "time": {"dt": 0.01, "t_end": 0.1, "stride": 5},
        "probes": [{"name": "winding", "radius": 2.0, "charges": [-2, 0, 1, 3]}],
    },
    # heavier particles push the first flow caustic of the pair past t = 1
    "superposition_probe": {
        "grid": {"n": 1024, "bounds": [-8 * PI, 8 * PI]},
        "physics": {"mass": 4.0},
        "initial": {"kind": "two-gaussian", "x0": 0.0, "x0_2": 0.0, "sigma": 3.0,
                    "sigma_2": 3.0, "p0": 1.0, "p0_2": -1.0, "c1": 3.0, "c2": 1.0},
        "evolver": "classical",
        "time": {"dt": 0.01, "t_end": 1.0, "stride": 10},
        "probes": ["superposition_violation"],
    },
    "superposition_probe_linear": {
        "grid": {"n": 1024, "bounds": [-8 * PI, 8 * PI]},
        "physics": {"mass": 4.0},
        "initial": {"kind": "two-gaussian", "x0": 0.0, "x0_2": 0.0, "sigma": 3.0,
                    "sigma_2": 3.0, "p0": 1.0, "p0_2": -1.0, "c1": 3.0, "c2": 1.0},
        "evolver": "linear",
        "time": {"dt": 0.01, "t_end": 1.0, "stride": 10},
        "probes": ["superposition_violation"],
    },
    "r_linearity": {
        "grid": {"n": 512, "bounds": [-12.8, 12.8]},
        "initial": {"kind": "two-gaussian", "x0": -2.0, "x0_2": 2.0, "sigma": 1.0,
                    "sigma_2": 1.0, "p0": 0.5, "p0_2": 0.5, "c1": 1.0, "c2": 0.5},
        "evolver": "classical",
        "time": {"dt": 0.01, "t_end": 1.0, "stride": 10},
        "probes": [{"name": "r_linearity", "contrast": True}],
    },
    "indirect_momentum": {
        "grid": {"n": 1024, "bounds": [-25.6, 25.6]},
        "initial": {"kind": "gaussian", "x0": 0.0, "sigma": 2.0, "p0": 3.0},
        "evolver": "classical",
        "time": {"dt": 0.01, "t_end": 1.0, "stride": 10},
        "trajectories": {"count": 100, "seed": 7},
        "probes": [{"name": "indirect_momentum", "sigma_m": 0.2, "interval": 1.0,
                    "cycles": 16}],
    },
}


def names() -> list[str]:
    return list(_PRESETS)


def preset_document(name: str) -> dict:
    if name not in _PRESETS:
        raise KeyError(f"unknown preset {name!r}; try one of: {', '.join(_PRESETS)}")
    doc = copy.deepcopy(_PRESETS[name])
    doc["scenario"] = name
    doc.setdefault("output", f"out/{name}")
    return doc


def load_preset(name: str) -> ExperimentConfig:
    return validate(preset_document(name))
