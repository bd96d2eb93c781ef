import json
import os
import subprocess
import sys

import numpy as np
import pytest

from iedtails.errors import ArgumentError, ExperimentError
from iedtails.harness.cli import main
from iedtails.harness.config import RunConfig, load_config, parse_config, resolve_params
from iedtails.harness.presets import PRESETS, run_experiment
from iedtails.harness.runner import map_shards, shard_sizes


def _square(x):
    return x * x


def test_shards():
    assert shard_sizes(10, 4) == [4, 4, 2]
    assert shard_sizes(8, 4) == [4, 4]
    with pytest.raises(ArgumentError):
        shard_sizes(10, 0)
    kws = [{"x": i} for i in range(7)]
    assert map_shards(_square, kws, 1) == map_shards(_square, kws, 3) == [i * i for i in range(7)]


def test_config_parsing(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text('[run]\nexperiment = "series-lambda"\nseed = 3\nworkers = 2\n'
                    'out = "x"\n\n[series-lambda]\nn = 200000\nband = [1, 3]\n')
    cfg = load_config(path, PRESETS)
    assert (cfg.experiment, cfg.seed, cfg.workers, cfg.out) == ("series-lambda", 3, 2, "x")
    assert cfg.params["n"] == 200_000 and cfg.params["band"] == [1.0, 3.0]
    assert cfg.params["ratio"] == 0.25


@pytest.mark.parametrize("doc", [
    {},
    {"run": {"experiment": "nope"}},
    {"run": {"experiment": "fig1", "colour": 1}},
    {"run": {"experiment": "fig1", "seed": "1"}},
    {"run": {"experiment": "fig1", "seed": -1}},
    {"run": {"experiment": "fig1"}, "fig1": {"nn": 3}},
    {"run": {"experiment": "fig1"}, "fig1": {"n": 1.5}},
    {"run": {"experiment": "fig1"}, "arma-envelope": {}},
])
def test_config_rejects(doc):
    with pytest.raises(ArgumentError):
        parse_config(doc, PRESETS)


def test_config_file_errors(tmp_path):
    with pytest.raises(ArgumentError):
        load_config(tmp_path / "missing.toml", PRESETS)
    bad = tmp_path / "bad.toml"
    bad.write_text("[run\n")
    with pytest.raises(ArgumentError):
        load_config(bad, PRESETS)


def test_resolve_params_types():
    assert resolve_params({"a": 1.0}, {"a": 2}, "x") == {"a": 2.0}
    with pytest.raises(ArgumentError):
        resolve_params({"a": 1}, {"a": True}, "x")


def test_cli_sample_is_deterministic(capsys):
    argv = ["sample", "--dist", "inverse-gamma", "--alpha", "2", "--beta", "3",
            "--n", "100", "--seed", "7"]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv) == 0
    assert capsys.readouterr().out == first
    lines = first.splitlines()
    assert lines[0] == "index,value" and len(lines) == 101


def test_cli_arma_psi(capsys):
    assert main(["arma", "psi", "--phi", "0.25", "--theta", "0.5", "--tol", "1e-10"]) == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows[0] == "k,psi"
    psi = np.array([float(r.split(",")[1]) for r in rows[1:]])
    k = np.arange(1, psi.size)
    assert psi[0] == 1.0
    assert np.allclose(psi[1:], 0.75 * 0.25 ** (k - 1), rtol=1e-14, atol=0)


def test_cli_reports(capsys, tmp_path):
    assert main(["arma", "lambda", "--phi", "0.25", "--theta", "0.5", "--rho", "1", "--lam", "1",
                 "--json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["lambda"] == pytest.approx(7.464101615137754, rel=1e-12)
    assert main(["sfpe", "lambda", "--essinf", "0.25", "--rho", "1", "--lam", "0.5", "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["lambda"] == 2.0
    assert main(["fv", "density", "--a", "0", "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["density_A"] == pytest.approx(4 / np.pi)
    csv = tmp_path / "x.csv"
    assert main(["sfpe", "iterate", "--r", "0.25", "--dist", "reciprocal-exponential",
                 "--rate", "0.5", "--cap", "1", "--n", "3000", "--out", str(csv)]) == 0
    assert main(["envelope", "--input", str(csv), "--rho", "1", "--lam", "2",
                 "--window", "100", "3000", "--levels", "1,2.4", "--json"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["theoretical_level"] == 2.0 and summary["window"] == [100, 3000]
    samples = tmp_path / "s.csv"
    assert main(["sample", "--dist", "reciprocal-exponential", "--rate", "2", "--cap", "1",
                 "--n", "200000", "--seed", "1", "--out", str(samples)]) == 0
    assert main(["fit-left", "--input", str(samples), "--fixed-rho", "1", "--json"]) == 0
    assert abs(json.loads(capsys.readouterr().out)["lambda_hat"] - 2.0) < 0.1


@pytest.mark.parametrize("argv, code, err", [
    (["experiment", "nope"], 2, "ArgumentError"),
    (["arma", "psi", "--phi", "1.2"], 2, "ArgumentError"),
    (["sample", "--dist", "inverse-gamma", "--n", "x"], 2, "ArgumentError"),
    (["bogus"], 2, "ArgumentError"),
    (["fit-left", "--dist", "inverse-gamma", "--n", "1000"], 2, "ArgumentError"),
    (["fv", "tail", "--eps", "0.05", "--n", "1000"], 3, "ExperimentError"),
    (["fit-right", "--dist", "constant", "--value", "2", "--n", "1000", "--k", "50"], 3,
     "EstimationError"),
])
def test_cli_exit_codes(capsys, argv, code, err):
    assert main(argv) == code
    cap = capsys.readouterr()
    lines = cap.err.strip().splitlines()
    assert len(lines) == 1
    payload = json.loads(lines[0])
    assert payload["error"] == err and payload["message"]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "iedtails", "experiment", "nope"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert json.loads(proc.stderr)["error"] == "ArgumentError"


SMALL = {
    "fig1": {"seeds": 3, "n": 20_000, "dip_window_lo": 10_000},
    "arma-envelope": {"seeds": 3, "n": 20_000, "dip_window_lo": 10_000},
    "series-lambda": {"n": 200_000, "shard_size": 50_000},
    "fv-left-tail": {"eps": [0.2, 0.1], "n": 400_000, "shard_size": 100_000},
    "kg-right-tail": {"n_moment": 200_000, "chain_n": 200_000, "shard_size": 50_000},
}


def _csv_bytes(out):
    return {f: open(os.path.join(out, f), "rb").read()
            for f in sorted(os.listdir(out)) if f.endswith(".csv")}


@pytest.mark.parametrize("preset", sorted(SMALL))
def test_experiment_worker_invariance(tmp_path, preset):
    runs = []
    for workers in (1, 4):
        out = tmp_path / f"w{workers}"
        params = resolve_params(PRESETS[preset].defaults, SMALL[preset], preset)
        manifest = run_experiment(RunConfig(preset, 5, workers, str(out), params))
        assert manifest["criteria"] and all("measured" in c for c in manifest["criteria"])
        on_disk = json.loads((out / "manifest.json").read_text())
        assert on_disk["config"]["workers"] == workers and on_disk["version"]
        runs.append(_csv_bytes(out))
    assert runs[0] and runs[0] == runs[1]


def test_experiment_error_recorded(tmp_path):
    params = resolve_params(PRESETS["fv-left-tail"].defaults, {"n": 1000}, "fv-left-tail")
    with pytest.raises(ExperimentError):
        run_experiment(RunConfig("fv-left-tail", 0, 1, str(tmp_path), params))
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["error"]["type"] == "ExperimentError"


def test_cli_experiment(tmp_path, capsys):
    out = tmp_path / "runs"
    assert main(["experiment", "series-lambda", "--n", "200000", "--out", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["preset"] == "series-lambda"
    assert summary["criteria"][0]["measured"] == 2.0
    assert (out / "manifest.json").exists()


def test_env_out_dir(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("IEDTAILS_OUT", str(tmp_path / "env"))
    assert main(["experiment", "fig1", "--seeds", "1", "--n", "20000"]) == 0
    assert (tmp_path / "env" / "manifest.json").exists()
