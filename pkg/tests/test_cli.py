import csv
import hashlib
import json
import math
import os

import numpy as np
import pytest

from panelpmcmc import cli
from panelpmcmc.cli import main
from panelpmcmc.dataio import ingest_csv, write_csv
from panelpmcmc.models import DataError, Family, PanelData, Theta
from panelpmcmc.samplers import SamplerFailure
from panelpmcmc.simgen import generate, preset


def _write(path, rows, header=("person_id", "time", "y1", "y2", "x1_const", "x2_const")):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return str(path)


# ------------------------------------------------------------------- ingest

def test_ingest_two_by_two(tmp_path):
    p = _write(tmp_path / "d.csv", [(2, 1, 1, 0, 1, 1), (1, 0, 0, 1, 1, 1),
                                    (1, 1, 1, 1, 1, 1), (2, 0, 0, 0, 1, 1)])
    d = ingest_csv(p)
    assert (d.P, d.T) == (2, 2)
    assert np.array_equal(d.y1, [[0, 1], [0, 1]])
    assert np.array_equal(d.y2, [[1, 1], [0, 0]])
    assert d.names1 == ["const"] and d.m1 == 0


def test_ingest_missing_cell_names_person(tmp_path):
    p = _write(tmp_path / "d.csv", [(1, 0, 0, 1, 1, 1), (1, 1, 1, 1, 1, 1), (2, 0, 0, 0, 1, 1)])
    with pytest.raises(DataError, match="2"):
        ingest_csv(p)


@pytest.mark.parametrize("rows,pattern", [
    ([(1, 0, "nan", 1, 1, 1)], "non-finite"),
    ([(1, 0, "", 1, 1, 1)], "non-numeric"),
    ([(1, 0, 2, 1, 1, 1)], "0/1"),
    ([(1, 0, 1, 1, 1, 1), (1, 0, 0, 1, 1, 1)], "duplicate"),
    ([(1, 0, 1, 1, 1)], "fields"),
])
def test_ingest_rejects_bad_rows(tmp_path, rows, pattern):
    with pytest.raises(DataError, match=pattern):
        ingest_csv(_write(tmp_path / "d.csv", rows))


def test_ingest_requires_columns(tmp_path):
    with pytest.raises(DataError, match="y2"):
        ingest_csv(_write(tmp_path / "d.csv", [(1, 0, 1, 1)], ("person_id", "time", "y1", "x1_c")))
    with pytest.raises(DataError):
        ingest_csv(str(tmp_path / "missing.csv"))


def test_ingest_mundlak_must_be_constant(tmp_path):
    h = ("person_id", "time", "y1", "y2", "x1_c", "x2_c", "xb_m")
    p = _write(tmp_path / "d.csv", [(1, 0, 1, 1, 1, 1, 0.5), (1, 1, 1, 1, 1, 1, 0.6)], h)
    with pytest.raises(DataError, match="constant"):
        ingest_csv(p)


def test_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    P, T = 5, 3
    X1 = rng.normal(size=(P, T, 3)) / 7
    X2 = rng.normal(size=(P, T, 2)) * 1e-17
    xbar = rng.normal(size=(P, 2)) * 1e5
    d = PanelData((rng.random((P, T)) < 0.5) * 1.0, rng.normal(size=(P, T)), X1, X2,
                  xbar, xbar.copy(), names1=["a", "b", "c"], names2=["a", "d"],
                  names_bar1=["m", "n"], names_bar2=["m", "n"])
    path = tmp_path / "rt.csv"
    write_csv(d, path)
    e = ingest_csv(str(path))
    for attr in ("y1", "y2", "X1", "X2", "xbar1", "xbar2"):
        assert np.array_equal(getattr(d, attr), getattr(e, attr))
    assert e.names1 == d.names1 and e.names_bar2 == ["m", "n"]


# ---------------------------------------------------------------------- CLI

SMOKE = ["--sim", "probit-sec3.6", "--sim-P", "30", "--iters", "1100", "--burnin", "100",
         "--particles", "20", "--seed", "7"]


def _draws(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    return header, np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def test_cli_smoke_run(tmp_path):
    out = tmp_path / "run"
    assert main(SMOKE + ["--out", str(out)]) == 0
    files = set(os.listdir(out))
    assert files == {"data.csv", "draws_chain0.csv", "summary.json", "manifest.json"}
    header, draws = _draws(out / "draws_chain0.csv")
    assert draws.shape == (1000, 26)
    for row in draws:
        assert Theta.from_array(row, 11).is_valid(Family.BIV_PROBIT)
    summary = json.loads((out / "summary.json").read_text())
    assert summary["param_names"] == header
    assert set(summary["parameters"]) == set(header)
    for s in summary["parameters"].values():
        assert s["ci_low"] <= s["mean"] <= s["ci_high"]
    assert summary["dependence"]["kendall_tau"]["mean"] == pytest.approx(
        np.mean(2 / np.pi * np.arcsin(draws[:, 22])), rel=1e-9)
    assert summary["tnv"] > 0 and summary["iact_mean"] >= 0
    man = json.loads((out / "manifest.json").read_text())
    for name, digest in man["files"].items():
        assert hashlib.sha1((out / name).read_bytes()).hexdigest() == digest
    assert man["config"]["seed"] == 7 and man["chain_seeds"] == [7]


def test_cli_reruns_identically(tmp_path):
    args = ["--sim", "mixed-S3", "--family", "clayton", "--sim-P", "15", "--iters", "150",
            "--burnin", "50", "--particles", "10", "--chains", "2"]
    for d in ("a", "b"):
        assert main(args + ["--out", str(tmp_path / d)]) == 0
    for f in ("draws_chain0.csv", "draws_chain1.csv", "data.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    assert (tmp_path / "a" / "draws_chain0.csv").read_bytes() != \
        (tmp_path / "a" / "draws_chain1.csv").read_bytes()


def test_cli_config_file_and_ape(tmp_path):
    data, _, _ = generate(preset("probit-sec3.6", P=25, seed=3))
    data.X1[..., 2] = (data.X1[..., 2] > 0.5) * 1.0
    data.X2[..., 2] = data.X1[..., 2]
    write_csv(data, tmp_path / "panel.csv")
    cfg = {"data": str(tmp_path / "panel.csv"), "sampler": "da-gibbs", "iters": 300,
           "burnin": 50, "priors": {"beta_var": 50.0}, "ape": ["x2"]}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    out = tmp_path / "o"
    assert main(["--config", str(tmp_path / "c.json"), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    a = summary["ape"]["x2"]
    assert a["n_draws"] == 250 and -1 < a["mean"] < 1 and a["ci_low"] <= a["ci_high"]
    man = json.loads((out / "manifest.json").read_text())
    assert man["config"]["beta_var"] == 50.0


@pytest.mark.parametrize("args", [
    ["--sim", "probit-sec3.6", "--sampler", "gibbs"],
    ["--sim", "nope"],
    ["--iters", "10"],
    ["--sim", "probit-sec3.6", "--iters", "10", "--burnin", "10"],
    ["--sim", "mixed-S3", "--family", "gaussian", "--sampler", "da-gibbs"],
])
def test_cli_config_errors(tmp_path, args, capsys):
    out = tmp_path / "o"
    assert main(args + ["--out", str(out)]) == 2
    assert "config error" in capsys.readouterr().err
    assert not out.exists()


def test_cli_unknown_config_key(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"sim": "probit-sec3.6", "bogus": 1}))
    assert main(["--config", str(tmp_path / "c.json"), "--out", str(tmp_path / "o")]) == 2


def test_cli_ape_on_continuous_covariate_cleans_up(tmp_path):
    out = tmp_path / "o"
    assert main(SMOKE[:6] + ["--iters", "60", "--burnin", "20", "--particles", "5",
                             "--ape", "x1", "--out", str(out)]) == 2
    assert not out.exists()


def test_cli_data_error(tmp_path, capsys):
    p = _write(tmp_path / "bad.csv", [(1, 0, 0, 1, 1, 1), (1, 1, 1, 1, 1, 1), (2, 0, 0, 0, 1, 1)])
    out = tmp_path / "o"
    assert main(["--data", p, "--out", str(out), "--iters", "20", "--burnin", "5"]) == 3
    assert "data error" in capsys.readouterr().err and not out.exists()


def test_cli_numerical_failure_removes_outputs(tmp_path, monkeypatch):
    out = tmp_path / "o"
    out.mkdir()
    (out / "keep.txt").write_text("pre-existing")

    def boom(*a, **k):
        raise SamplerFailure("10 consecutive failed sweeps")

    monkeypatch.setattr(cli, "run_chain", boom)
    assert main(SMOKE + ["--out", str(out)]) == 4
    assert sorted(os.listdir(out)) == ["keep.txt"]


def test_workers_are_capped():
    import numba
    assert cli._set_workers(10_000) == numba.config.NUMBA_NUM_THREADS
    assert cli._set_workers(1) == 1
