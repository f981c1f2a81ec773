import json
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcprop import cli
from rcprop.config import SEED_ENV, ConfigError, RunConfig, build_config, parse, validate
from rcprop.io import read_csv, read_ensemble_bin

SMALL = ["n_steps=16", "n_samples=400", "n_boot=50"]


def run(tmp_path, sub, *args, name="out"):
    out = tmp_path / name
    code = cli.main([sub, "--out", str(out), *args])
    return code, out


def test_defaults_roundtrip():
    cfg = RunConfig()
    assert parse(cfg.to_text()) == cfg


configs = st.builds(
    RunConfig,
    gamma=st.floats(0.0, 0.49),
    epsilon=st.floats(0.0, 5.0),
    tau=st.floats(1e-3, 1e3),
    tau_grid=st.tuples(st.floats(0.01, 1.0), st.floats(2.0, 9.0), st.integers(3, 9)),
    n_steps=st.integers(1, 4096),
    seed=st.integers(0, 2**64 - 1),
    signature=st.lists(st.sampled_from([1, -1]), min_size=1, max_size=4).map(tuple),
    deterministic=st.booleans(),
    ks_exponent=st.one_of(st.none(), st.floats(0.0, 2.0)),
    even_mode=st.sampled_from(["integrated", "pointwise"]),
    orders=st.lists(st.integers(1, 6), min_size=1, max_size=3).map(tuple),
)


@settings(max_examples=100)
@given(configs)
def test_config_roundtrip(cfg):
    assert parse(cfg.to_text()) == cfg


def test_env_seed_and_override_precedence():
    cfg = build_config("seed = 3\n", env={SEED_ENV: "9"})
    assert cfg.seed == 9
    cfg = build_config("seed = 3\n", {"seed": "11"}, env={SEED_ENV: "9"})
    assert cfg.seed == 11


@pytest.mark.parametrize("text,field", [
    ("gamma = 0.7", "gamma"), ("bogus = 1", "bogus"), ("n_steps = x", "n_steps"),
    ("signature = 1,2", "signature"), ("tau_grid = 1,2", "tau_grid"), ("just words", "line 1"),
    ("delta = 1,2\nsignature = 1,1,1", "delta"),
])
def test_config_errors_name_field(text, field):
    with pytest.raises(ConfigError) as info:
        parse(text)
    assert info.value.field == field


def test_subcommand_validation():
    with pytest.raises(ConfigError):
        validate(RunConfig(epsilon=0.1), "ks-scale")
    with pytest.raises(ConfigError):
        validate(RunConfig(out_format="bin"), "scaling")
    with pytest.raises(ConfigError):
        validate(RunConfig(tau_grid=(1.0, 2.0, 2)), "scaling")


def test_cli_exponents(tmp_path):
    code, out = run(tmp_path, "exponents", "ns=2", "gamma=0.25")
    assert code == 0
    schema, header, rows = read_csv(out / "exponents.csv")
    assert schema == "rcprop.exponents/1"
    odd = [r for r in rows if r[0] == "OddHyperplane"]
    assert float(odd[0][3]) == -1.0
    summary = json.loads((out / "exponents.json").read_text())
    assert summary["schema"] == "rcprop.summary/1"


def test_cli_bad_gamma_exit2(tmp_path, capsys):
    code, _ = run(tmp_path, "exponents", "gamma=0.7")
    assert code == 2
    err = json.loads(capsys.readouterr().err)
    assert err["field"] == "gamma" and "0.5" in err["message"]


def test_cli_malformed_override(tmp_path, capsys):
    code, _ = run(tmp_path, "exponents", "gamma")
    assert code == 2


def test_cli_bracket_violation_exit2(tmp_path, capsys):
    code, _ = run(tmp_path, "green-scan", *SMALL, "tau_grid=0.5,1000,8")
    assert code == 2
    err = json.loads(capsys.readouterr().err)
    assert err["module"] == "propagator" and "tau_min" in err["message"]


def test_cli_numerical_failure_exit3(tmp_path, capsys):
    code, _ = run(tmp_path, "kernel", *SMALL, "delta_floor=1e6")
    assert code == 3
    err = json.loads(capsys.readouterr().err)
    assert err["module"] == "propagator"


@pytest.mark.slow
def test_cli_scaling_gamma0_slope(tmp_path):
    code, out = run(tmp_path, "scaling", "gamma=0", "n_steps=128", "n_samples=20000",
                    "n_boot=200", "orders=2")
    assert code == 0
    fit = json.loads((out / "scaling.json").read_text())["fits"][0]
    assert abs(fit["slope"] - 2.0) < 0.05


@pytest.mark.parametrize("sub,extra", [
    ("gamma-moments", []), ("scaling", ["tau_grid=0.5,2,3"]), ("ks-scale", ["ks_exponent=1"]),
    ("kernel", ["delta=0.3"]), ("green-scan", ["tau_grid=1e-4,1000,6", "delta_scan=0.2,1,4"]),
    ("exponents", []),
])
def test_manifest_reproduces_bytes(tmp_path, sub, extra):
    code, out1 = run(tmp_path, sub, *SMALL, *extra, "--threads", "1", name="a")
    assert code == 0
    stem = sub.replace("-", "_")
    manifest = out1 / f"{stem}.manifest"
    code, out2 = run(tmp_path, sub, "--config", str(manifest), "--threads", "3", name="b")
    assert code == 0
    files = sorted(p.name for p in out1.iterdir())
    assert files == sorted(p.name for p in out2.iterdir())
    for name in files:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


def test_binary_ensemble(tmp_path):
    code, out = run(tmp_path, "gamma-moments", *SMALL, "out_format=bin")
    assert code == 0
    rec = read_ensemble_bin(out / "ensemble.bin")
    assert rec.shape == (400,) and rec["index"].tolist() == list(range(400))
    code, out2 = run(tmp_path, "gamma-moments", *SMALL, name="csv")
    _, header, rows = read_csv(out2 / "ensemble.csv")
    assert header == ["index", "value", "n_singular_hits"]
    np.testing.assert_array_equal(rec["value"], [float(r[1]) for r in rows])


def test_console_entry_point(tmp_path):
    env = dict(os.environ, **{SEED_ENV: "4"})
    res = subprocess.run([sys.executable, "-m", "rcprop.cli", "exponents", "--out", str(tmp_path)],
                         capture_output=True, text=True, env=env)
    assert res.returncode == 0
    assert "seed = 4" in (tmp_path / "exponents.manifest").read_text()
