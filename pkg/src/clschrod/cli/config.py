"""Experiment configuration: YAML documents to validated dataclasses and back."""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass
from typing import Any

import numpy as np
import yaml

from ..dynamics import POTENTIAL_KINDS
from ..errors import ConfigValidationError, ParseError
from ..fields import BOUNDARIES

EVOLVERS = ("linear", "classical")
INITIAL_KINDS = ("gaussian", "two-gaussian", "two-bump", "vortex", "tabulated")

# probe name -> allowed extra parameters with their defaults
PROBES: dict[str, dict[str, Any]] = {
    "width_drift": {},
    "dispersion_law": {},
    "ehrenfest": {},
    "harmonic_mean_x": {},
    "caustic_time": {"expected": None},
    "characteristics": {"particles": 100, "oracle_dt": 1e-3},
    "equivariance_ks": {},
    "superposition_violation": {},
    "r_linearity": {"contrast": False, "contrast_threshold": 1e-3},
    "interference_excess": {"visibility_threshold": 0.9},
    "pure_vs_mixed": {"overlap_check": True},
    "exchange_term": {},
    "winding": {"radius": None, "charges": None},
    "uncertainty": {},
    "indirect_momentum": {"sigma_m": None, "interval": 1.0, "cycles": 16},
}

DEFAULT_THRESHOLDS = {
    "width_drift": 1e-6,
    "dispersion_law": 1e-3,
    "ehrenfest": 1e-3,
    "harmonic_mean_x": 1e-3,
    "caustic_time": 0.1,
    "characteristics": 1e-4,
    "equivariance_ks": None,  # 3/sqrt(count)
    "superposition_violation": 1e-6,
    "r_linearity": 1e-10,
    "interference_excess": 0.0,
    "pure_vs_mixed": 1e-12,
    "exchange_term": 1e-12,
    "winding": 1e-9,
    "uncertainty": None,  # hbar/2 floor (linear) or hbar/10 ceiling (classical)
    "indirect_momentum": None,  # from the sigma_m/(t2-t1) budget
}


@dataclass(frozen=True)
class GridSpec:
    n: int = 0
    bounds: tuple = ()
    dim: int = 1
    boundary: str = "periodic"
    pad: int = 0


@dataclass(frozen=True)
class PhysicsSpec:
    hbar: float = 1.0
    mass: float = 1.0


@dataclass(frozen=True)
class PotentialSpec:
    kind: str = "free"
    omega: float = 1.0
    lam: float = 1.0
    force: tuple = (0.0,)
    center: tuple = (0.0,)
    file: str | None = None


@dataclass(frozen=True)
class InitialSpec:
    """Initial state.

    ``gaussian``: density std ``sigma`` at ``x0``, momentum ``p0`` and an
    optional focusing ``chirp`` (``S = p0.x - chirp |x - x0|^2 / 2``).
    ``two-gaussian`` adds ``x0_2``/``sigma_2``/``p0_2`` and amplitudes
    ``c1``/``c2``. ``two-bump`` uses compact ``cos^2`` bumps of half width
    ``width``. ``vortex`` has charge ``n`` and core radius ``r0``.
    """

    kind: str = "gaussian"
    x0: tuple = (0.0,)
    sigma: float = 1.0
    p0: tuple = (0.0,)
    chirp: float = 0.0
    x0_2: tuple = (0.0,)
    sigma_2: float = 1.0
    p0_2: tuple = (0.0,)
    c1: float = 1.0
    c2: float = 0.0
    width: float = 1.0
    n: int = 1
    r0: float = 1.0
    file: str | None = None


@dataclass(frozen=True)
class TimeSpec:
    dt: float = 0.01
    t_end: float = 1.0
    stride: int = 1
    cfl: float = 0.5
    caustic_threshold: float = 0.1


@dataclass(frozen=True)
class TrajectorySpec:
    count: int = 100
    seed: int = 0
    dt: float | None = None


@dataclass(frozen=True)
class ProbeSpec:
    name: str
    threshold: float | None = None
    params: tuple = ()  # sorted (key, value) pairs

    def param(self, key: str):
        return dict(self.params).get(key, PROBES[self.name][key])

    def limit(self):
        return DEFAULT_THRESHOLDS[self.name] if self.threshold is None else self.threshold


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    grid: GridSpec
    initial: InitialSpec
    evolver: str
    time: TimeSpec
    physics: PhysicsSpec = PhysicsSpec()
    potential: PotentialSpec = PotentialSpec()
    trajectories: TrajectorySpec | None = None
    probes: tuple = ()
    output: str = "out"

    def with_seed(self, seed: int) -> ExperimentConfig:
        traj = self.trajectories
        if traj is not None:
            traj = dataclasses.replace(traj, seed=int(seed))
        return dataclasses.replace(self, trajectories=traj)

    def with_output(self, output: str) -> ExperimentConfig:
        return dataclasses.replace(self, output=str(output))


# ------------------------------------------------------------------ parsing

class _Collector:
    def __init__(self, base_dir: str | None):
        self.errors: list[tuple[str, str]] = []
        self.base_dir = base_dir

    def add(self, path: str, msg: str):
        self.errors.append((path, msg))


def _number(col: _Collector, path: str, value, integer: bool = False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        col.add(path, f"expected a number, got {value!r}")
        return None
    if integer:
        if isinstance(value, float) and not value.is_integer():
            col.add(path, f"expected an integer, got {value!r}")
            return None
        return int(value)
    if not math.isfinite(value):
        col.add(path, "must be finite")
        return None
    return float(value)


def _vector(col: _Collector, path: str, value):
    items = value if isinstance(value, (list, tuple)) else [value]
    out = []
    for i, v in enumerate(items):
        x = _number(col, f"{path}[{i}]", v)
        out.append(0.0 if x is None else x)
    return tuple(out)


def _section(col: _Collector, path: str, raw, cls, required=(), vectors=(), ints=(),
             strings=()):
    """Build ``cls`` from a mapping, recording errors instead of raising."""
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        col.add(path, "expected a mapping")
        return None
    defaults = {f.name: f.default for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        sub = f"{path}.{key}" if path else str(key)
        if key not in defaults:
            col.add(sub, "unknown key")
            continue
        if value is None:
            if defaults[key] is None:
                kwargs[key] = None
            else:
                col.add(sub, "must not be empty")
        elif key in vectors:
            kwargs[key] = _vector(col, sub, value)
        elif key in strings:
            if not isinstance(value, str):
                col.add(sub, f"expected a string, got {value!r}")
            else:
                kwargs[key] = value
        else:
            num = _number(col, sub, value, integer=key in ints)
            if num is not None:
                kwargs[key] = num
    for key in required:
        if key not in raw:
            col.add(f"{path}.{key}" if path else key, "required")
    missing = [f.name for f in dataclasses.fields(cls)
               if f.name not in kwargs and f.default is dataclasses.MISSING
               and f.default_factory is dataclasses.MISSING]
    if missing:
        return None
    try:
        return cls(**kwargs)
    except TypeError as exc:  # pragma: no cover - guarded by the checks above
        col.add(path, str(exc))
        return None


def _bounds(col: _Collector, raw, dim: int):
    path = "grid.bounds"
    if not isinstance(raw, (list, tuple)) or not raw:
        col.add(path, "expected [lo, hi] or one [lo, hi] pair per axis")
        return None
    if all(not isinstance(b, (list, tuple)) for b in raw):
        pairs = [raw] * dim
    else:
        pairs = list(raw)
    out = []
    for i, pair in enumerate(pairs):
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            col.add(f"{path}[{i}]", "expected a [lo, hi] pair")
            return None
        lo = _number(col, f"{path}[{i}][0]", pair[0])
        hi = _number(col, f"{path}[{i}][1]", pair[1])
        if lo is None or hi is None:
            return None
        if not hi > lo:
            col.add(f"{path}[{i}]", "hi must exceed lo")
        out.append((lo, hi))
    if len(out) != dim:
        col.add(path, f"need {dim} pair(s) for dim={dim}")
    return tuple(out)


def _grid(col: _Collector, raw) -> GridSpec | None:
    if not isinstance(raw, dict):
        col.add("grid", "required mapping")
        return None
    rest = {k: v for k, v in raw.items() if k != "bounds"}
    dim = rest.get("dim", 1)
    if dim not in (1, 2):
        col.add("grid.dim", "must be 1 or 2")
        dim = 1
    bounds = None
    if "bounds" in raw:
        bounds = _bounds(col, raw["bounds"], dim)
    else:
        col.add("grid.bounds", "required")
    spec = _section(col, "grid", rest, GridSpec, required=("n",), ints=("n", "dim", "pad"),
                    strings=("boundary",))
    if spec is None or bounds is None or "n" not in rest:
        return None
    spec = dataclasses.replace(spec, bounds=bounds)
    if spec.n < 8:
        col.add("grid.n", "must be at least 8")
    elif spec.boundary == "periodic" and spec.n & (spec.n - 1):
        col.add("grid.n", "periodic grids need a power of two")
    if spec.boundary not in BOUNDARIES:
        col.add("grid.boundary", f"must be one of {', '.join(BOUNDARIES)}")
    if spec.pad < 0 or spec.pad * 2 >= spec.n:
        col.add("grid.pad", "must lie in [0, n/2)")
    if spec.pad and spec.boundary == "periodic":
        col.add("grid.pad", "padding only applies to absorbing-pad grids")
    return spec


def _file_ok(col: _Collector, path: str, name: str | None):
    if name is None:
        col.add(path, "required for tabulated input")
        return
    full = name if os.path.isabs(name) or col.base_dir is None else os.path.join(col.base_dir, name)
    if not os.path.isfile(full):
        col.add(path, f"file not found: {name}")


def resolve_path(cfg_dir: str | None, name: str) -> str:
    return name if os.path.isabs(name) or cfg_dir is None else os.path.join(cfg_dir, name)


def _check_vectors(col: _Collector, section: str, spec, names, dim: int):
    for name in names:
        value = getattr(spec, name)
        if len(value) == 1 and dim > 1:
            value = value * dim
        if len(value) != dim:
            col.add(f"{section}.{name}", f"needs {dim} component(s)")
        yield name, tuple(value)


def _probes(col: _Collector, raw) -> tuple:
    if raw is None:
        return ()
    if not isinstance(raw, list):
        col.add("probes", "expected a list")
        return ()
    out = []
    for i, item in enumerate(raw):
        path = f"probes[{i}]"
        if isinstance(item, str):
            item = {"name": item}
        if not isinstance(item, dict) or "name" not in item:
            col.add(path, "expected a probe name or a mapping with 'name'")
            continue
        name = item["name"]
        if name not in PROBES:
            col.add(f"{path}.name", f"unknown probe {name!r}")
            continue
        threshold = None
        params = {}
        for key, value in item.items():
            if key == "name":
                continue
            if key == "threshold":
                threshold = None if value is None else _number(col, f"{path}.threshold", value)
            elif key in PROBES[name]:
                params[key] = _param_value(col, f"{path}.{key}", value)
            else:
                col.add(f"{path}.{key}", f"unknown parameter for probe {name!r}")
        out.append(ProbeSpec(name, threshold, tuple(sorted(params.items()))))
    return tuple(out)


def _param_value(col: _Collector, path: str, value):
    if value is None or isinstance(value, (bool, str)):
        return value
    if isinstance(value, list):
        return tuple(_param_value(col, f"{path}[{i}]", v) for i, v in enumerate(value))
    if isinstance(value, int):
        return value
    num = _number(col, path, value)
    return num


def _node_free(initial: InitialSpec, grid: GridSpec) -> bool:
    from .states import component_amplitudes

    R1, R2 = component_amplitudes(initial, grid)
    a1, a2 = abs(initial.c1) * R1, abs(initial.c2) * R2
    if initial.c2 == 0:
        return True
    live = (a1 + a2) > 1e-10 * float(np.max(a1 + a2))
    return bool(np.all(a1[live] > a2[live]))


def validate(data: Any, base_dir: str | None = None) -> ExperimentConfig:
    """Turn a loaded document into a config, collecting every problem found."""
    col = _Collector(base_dir)
    if not isinstance(data, dict):
        raise ConfigValidationError([("", "document must be a mapping")])
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for key in data:
        if key not in known:
            col.add(str(key), "unknown key")
    scenario = data.get("scenario")
    if not isinstance(scenario, str) or not scenario:
        col.add("scenario", "required string")
    grid = _grid(col, data.get("grid"))
    dim = grid.dim if grid else 1
    physics = _section(col, "physics", data.get("physics"), PhysicsSpec)
    if physics:
        if not physics.hbar > 0:
            col.add("physics.hbar", "must be positive")
        if not physics.mass > 0:
            col.add("physics.mass", "must be positive")

    potential = _section(col, "potential", data.get("potential"), PotentialSpec,
                         vectors=("force", "center"), strings=("kind", "file"))
    if potential:
        if potential.kind not in POTENTIAL_KINDS:
            col.add("potential.kind", f"must be one of {', '.join(POTENTIAL_KINDS)}")
        if potential.kind == "harmonic" and not potential.omega > 0:
            col.add("potential.omega", "must be positive")
        if potential.kind == "quartic" and not potential.lam > 0:
            col.add("potential.lam", "must be positive")
        if potential.kind == "tabulated":
            _file_ok(col, "potential.file", potential.file)
        potential = dataclasses.replace(
            potential, **dict(_check_vectors(col, "potential", potential, ("force", "center"), dim)))

    initial = None
    if "initial" not in data:
        col.add("initial", "required")
    else:
        initial = _section(col, "initial", data.get("initial"), InitialSpec,
                           vectors=("x0", "p0", "x0_2", "p0_2"), ints=("n",),
                           strings=("kind", "file"))
    if initial:
        if initial.kind not in INITIAL_KINDS:
            col.add("initial.kind", f"must be one of {', '.join(INITIAL_KINDS)}")
        for name in ("sigma", "sigma_2", "width", "r0"):
            if not getattr(initial, name) > 0:
                col.add(f"initial.{name}", "must be positive")
        if grid and initial.kind in ("gaussian", "two-gaussian"):
            # narrower packets are not represented by the lattice at all
            h = min((hi - lo) / grid.n for lo, hi in grid.bounds)
            for name in ("sigma",) + (("sigma_2",) if initial.kind == "two-gaussian" else ()):
                if 0 < getattr(initial, name) < 2 * h:
                    col.add(f"initial.{name}", f"must be at least two grid cells ({2 * h:g})")
        if initial.kind == "vortex" and dim != 2:
            col.add("initial.kind", "vortex states need dim=2")
        if initial.kind in ("two-gaussian", "two-bump") and initial.c1 == 0 and initial.c2 == 0:
            col.add("initial.c1", "c1 and c2 cannot both vanish")
        if initial.kind == "tabulated":
            _file_ok(col, "initial.file", initial.file)
        initial = dataclasses.replace(
            initial, **dict(_check_vectors(col, "initial", initial, ("x0", "p0", "x0_2", "p0_2"), dim)))

    evolver = data.get("evolver")
    if evolver not in EVOLVERS:
        col.add("evolver", f"must be one of {', '.join(EVOLVERS)}")

    time = None
    if "time" not in data:
        col.add("time", "required")
    else:
        time = _section(col, "time", data.get("time"), TimeSpec, ints=("stride",))
    if time:
        if not time.dt > 0:
            col.add("time.dt", "must be positive")
        if not time.t_end >= 0:
            col.add("time.t_end", "must be nonnegative")
        if time.stride < 1:
            col.add("time.stride", "must be at least 1")
        if not 0 < time.cfl <= 1:
            col.add("time.cfl", "must lie in (0, 1]")
        if not time.caustic_threshold > 0:
            col.add("time.caustic_threshold", "must be positive")

    trajectories = None
    if data.get("trajectories") is not None:
        trajectories = _section(col, "trajectories", data["trajectories"], TrajectorySpec,
                                ints=("count", "seed"))
        if trajectories:
            if trajectories.count < 1:
                col.add("trajectories.count", "must be at least 1")
            if trajectories.seed < 0:
                col.add("trajectories.seed", "must be nonnegative")
            if trajectories.dt is not None and not trajectories.dt > 0:
                col.add("trajectories.dt", "must be positive")

    probes = _probes(col, data.get("probes"))
    output = data.get("output", "out")
    if not isinstance(output, str) or not output:
        col.add("output", "expected a directory name")

    names = {p.name for p in probes}
    if "superposition_violation" in names and initial and grid and not col.errors:
        if initial.kind != "two-gaussian":
            col.add("initial.kind", "superposition_violation needs a two-gaussian state")
        elif not _node_free(initial, grid):
            col.add("initial.c2", "violates the node-free superposition precondition "
                                  "|c1| R1 > |c2| R2")

    if col.errors:
        raise ConfigValidationError(col.errors)
    return ExperimentConfig(scenario, grid, initial, evolver, time, physics, potential,
                            trajectories, probes, output)


def parse_config(text: str, base_dir: str | None = None) -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"malformed config: {exc}") from exc
    return validate(data, base_dir)


def load_config(path: str) -> ExperimentConfig:
    with open(path) as fh:
        text = fh.read()
    return parse_config(text, os.path.dirname(os.path.abspath(path)))


# ------------------------------------------------------------ serializing

def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


def to_dict(cfg: ExperimentConfig) -> dict:
    out: dict[str, Any] = {"scenario": cfg.scenario}
    grid = dataclasses.asdict(cfg.grid)
    grid["bounds"] = [list(b) for b in cfg.grid.bounds]
    out["grid"] = grid
    out["physics"] = dataclasses.asdict(cfg.physics)
    out["potential"] = {k: _plain(v) for k, v in dataclasses.asdict(cfg.potential).items()}
    out["initial"] = {k: _plain(v) for k, v in dataclasses.asdict(cfg.initial).items()}
    out["evolver"] = cfg.evolver
    out["time"] = dataclasses.asdict(cfg.time)
    if cfg.trajectories is not None:
        out["trajectories"] = dataclasses.asdict(cfg.trajectories)
    out["probes"] = [dict(name=p.name, threshold=p.threshold,
                          **{k: _plain(v) for k, v in p.params}) for p in cfg.probes]
    out["output"] = cfg.output
    return out


def serialize_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)
