import os

import pytest
import yaml
from hypothesis import given, settings, strategies as st

from clschrod.cli import presets
from clschrod.cli.config import parse_config, serialize_config, validate
from clschrod.cli.main import main
from clschrod.cli.runner import EXIT_CODES, run
from clschrod.errors import ConfigValidationError, ParseError

MINIMAL = """
scenario: small
grid: {n: 64, bounds: [-6.4, 6.4]}
initial: {kind: gaussian, sigma: 0.8, p0: 0.5}
evolver: linear
time: {dt: 0.1, t_end: 0.2}
"""

CLASSICAL = """
scenario: drift
grid: {n: 128, bounds: [-12.8, 12.8]}
initial: {kind: gaussian, sigma: 1.0, p0: 0.5}
evolver: classical
time: {dt: 0.05, t_end: 0.5, stride: 5}
trajectories: {count: 40, seed: 3}
probes: [width_drift, equivariance_ks]
"""


def doc(text=MINIMAL, **changes):
    data = yaml.safe_load(text)
    for path, value in changes.items():
        node = data
        *head, last = path.split("__")
        for key in head:
            node = node.setdefault(key, {})
        node[last] = value
    return data


def error_paths(data):
    with pytest.raises(ConfigValidationError) as info:
        validate(data)
    return [p for p, _ in info.value.errors]


# ------------------------------------------------------------------- config

def test_minimal_config_gets_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.physics.hbar == 1.0 and cfg.physics.mass == 1.0
    assert cfg.potential.kind == "free"
    assert cfg.time.stride == 1 and cfg.time.cfl == 0.5
    assert cfg.trajectories is None and cfg.probes == ()
    assert cfg.initial.x0 == (0.0,)


def test_nonpositive_dt_names_the_field():
    assert "time.dt" in error_paths(doc(time__dt=0.0))


def test_all_errors_are_reported_together():
    paths = error_paths(doc(time__dt=-1.0, grid__n=100, evolver="quantum", physics__mass=0))
    assert {"time.dt", "grid.n", "evolver", "physics.mass"} <= set(paths)


def test_unknown_keys_are_errors():
    paths = error_paths(doc(colour="blue", initial__spin=1))
    assert "colour" in paths and "initial.spin" in paths


def test_unknown_probe():
    assert any(p.startswith("probes") for p in error_paths(doc(probes=["telepathy"])))


def test_superposition_precondition_is_checked():
    data = doc(initial={"kind": "two-gaussian", "sigma": 1.0, "sigma_2": 2.0, "c1": 1.0,
                        "c2": 1.0}, probes=["superposition_violation"])
    with pytest.raises(ConfigValidationError) as info:
        validate(data)
    assert info.value.errors == [("initial.c2", "violates the node-free superposition "
                                                "precondition |c1| R1 > |c2| R2")]


def test_malformed_yaml():
    with pytest.raises(ParseError):
        parse_config("grid: [unclosed")


@pytest.mark.parametrize("name", presets.names())
def test_round_trip_of_presets(name):
    cfg = presets.load_preset(name)
    assert parse_config(serialize_config(cfg)) == cfg


@settings(max_examples=25, deadline=None)
@given(dt=st.floats(1e-4, 1.0), stride=st.integers(1, 20), sigma=st.floats(0.4, 5.0),
       p0=st.floats(-10, 10), mass=st.floats(0.1, 10.0), seed=st.integers(0, 2 ** 31))
def test_round_trip_property(dt, stride, sigma, p0, mass, seed):
    data = doc(CLASSICAL, time__dt=dt, time__stride=stride, initial__sigma=sigma,
               initial__p0=p0, physics__mass=mass, trajectories__seed=seed)
    cfg = validate(data)
    assert parse_config(serialize_config(cfg)) == cfg


# -------------------------------------------------------------------- runs

def run_text(text, out, **changes):
    cfg = validate(doc(text, **changes)).with_output(str(out))
    return run(cfg)


def test_snapshot_count_matches_field_files(tmp_path):
    m = run_text(MINIMAL, tmp_path / "a")
    assert m.status == "completed" and m.exit_code == 0
    fields = sorted(os.listdir(tmp_path / "a" / "fields"))
    assert fields == ["field_0000.csv", "field_0001.csv", "field_0002.csv"]
    header = (tmp_path / "a" / "fields" / "field_0000.csv").read_text().splitlines()[0]
    assert header == "x,rho,R,S,Q,V"


def test_no_probes_means_no_probe_table(tmp_path):
    run_text(MINIMAL, tmp_path / "a")
    assert not (tmp_path / "a" / "probes.csv").exists()
    assert (tmp_path / "a" / "diagnostics.csv").exists()
    assert (tmp_path / "a" / "manifest.yaml").exists()


def test_trajectory_and_probe_tables(tmp_path):
    m = run_text(CLASSICAL, tmp_path / "a")
    assert m.status == "completed"
    lines = (tmp_path / "a" / "trajectories.csv").read_text().splitlines()
    assert lines[0] == "traj_id,t,x,vx,valid"
    assert len(lines) == 1 + 40 * 3
    probes = (tmp_path / "a" / "probes.csv").read_text()
    assert "width_drift" in probes and "equivariance_ks" in probes


def test_runs_are_deterministic(tmp_path):
    a = run_text(CLASSICAL, tmp_path / "a")
    b = run_text(CLASSICAL, tmp_path / "b")
    assert a.files == b.files
    for name, _ in a.files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    c = run_text(CLASSICAL, tmp_path / "c", trajectories__seed=4)
    assert dict(c.files)["trajectories.csv"] != dict(a.files)["trajectories.csv"]


def test_caustic_run_keeps_partial_results(tmp_path):
    m = run_text(MINIMAL, tmp_path / "a", evolver="classical",
                 grid={"n": 512, "bounds": [-10.24, 10.24], "boundary": "absorbing-pad",
                       "pad": 32},
                 initial={"kind": "gaussian", "sigma": 1.0, "chirp": 2.0},
                 time={"dt": 0.01, "t_end": 2.0, "stride": 10})
    assert m.status == "caustic" and m.exit_code == EXIT_CODES["caustic"]
    saved = yaml.safe_load((tmp_path / "a" / "manifest.yaml").read_text())
    assert saved["status"] == "caustic"
    assert saved["files"] and os.listdir(tmp_path / "a" / "fields")


def test_runtime_precondition_is_a_config_error(tmp_path):
    m = run_text(MINIMAL, tmp_path / "a",
                 grid={"n": 64, "bounds": [-6.4, 6.4], "boundary": "absorbing-pad"})
    assert m.status == "config-error" and m.exit_code == 2
    assert (tmp_path / "a" / "manifest.yaml").exists()


# --------------------------------------------------------------------- main

def test_main_exit_codes(tmp_path, capsys):
    good = tmp_path / "good.yaml"
    good.write_text(MINIMAL)
    bad = tmp_path / "bad.yaml"
    bad.write_text(MINIMAL.replace("dt: 0.1", "dt: -0.1"))
    assert main(["run", str(good), "--out", str(tmp_path / "o1")]) == 0
    assert main(["run", str(bad), "--out", str(tmp_path / "o2")]) == 2
    assert "time.dt" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.yaml")]) == 4
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["run", str(good), "--out", str(blocker / "sub")]) == 4


def test_main_seed_override(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(CLASSICAL)
    assert main(["run", str(cfg), "--out", str(tmp_path / "o"), "--seed", "9"]) == 0
    saved = yaml.safe_load((tmp_path / "o" / "manifest.yaml").read_text())
    assert saved["config"]["trajectories"]["seed"] == 9


def test_presets_list(capsys):
    assert main(["presets", "list"]) == 0
    listed = capsys.readouterr().out.split()
    assert set(presets.names()) <= set(listed)


def test_unknown_preset(capsys):
    assert main(["run", "preset:nope"]) == 2


def test_sweep(tmp_path):
    for i in range(2):
        (tmp_path / f"c{i}.yaml").write_text(MINIMAL.replace("small", f"small{i}"))
    out = tmp_path / "sweep"
    assert main(["sweep", str(tmp_path / "c*.yaml"), "--workers", "2", "--out", str(out)]) == 0
    assert sorted(os.listdir(out)) == ["c0", "c1"]


def test_gaussian_narrower_than_two_cells_is_rejected():
    assert "initial.sigma" in error_paths(doc(initial__sigma=0.3))
    validate(doc(initial__sigma=0.4))
