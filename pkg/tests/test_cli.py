import json
import math

import pytest

from kgdecay.cli import ConfigError, main, parse_config

SMALL = {
    "schema_version": 1,
    "eps": 0.1,
    "B": 3.0,
    "grid": {"L": 64.0, "N": 1024},
    "time": {"dt": 0.05, "T": 30.0, "record_stride": 10.0, "norm_every": 0.5},
    "norms": {"p": [2, 4, "inf"]},
    "analysis": {"z_samples": [0.0], "fit_window": [20.0, 30.0]},
}


def _write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_classify_presets(tmp_path, capsys):
    assert main(["classify", "--preset", "u2ut", "--out", str(tmp_path)]) == 0
    assert "class: B1" in capsys.readouterr().out
    rep = json.loads((tmp_path / "classify.json").read_text())
    assert rep["class"] == "B1" and rep["constants"]["C1"] == pytest.approx(0.125)
    assert main(["classify", "--preset", "ux2ut", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "classify.json").read_text())
    assert rep["class"] == "C" and rep["z0"] == 0.0


def test_classify_sweep_and_custom_gamma(tmp_path, capsys):
    assert main(["classify", "--preset", "ut3", "--preset", "u3", "--out", str(tmp_path)]) == 0
    reps = json.loads((tmp_path / "classify.json").read_text())
    assert [r["class"] for r in reps] == ["B0", "A0"]
    cfg = _write(tmp_path, {"schema_version": 1, "nonlinearity": [0.0] * 10})
    assert main(["classify", "--config", cfg]) == 0
    assert "class: A0" in capsys.readouterr().out


def test_parse_config_defaults_and_inf():
    cfg = parse_config(SMALL, "ut3")
    assert cfg.p_values == (2.0, 4.0, math.inf)
    assert cfg.solver_config().record_times == (0.0, 10.0, 20.0, 30.0)
    with pytest.raises(ConfigError):
        parse_config({"schema_version": 2, "nonlinearity": "ut3"})
    with pytest.raises(ConfigError):
        parse_config({"nonlinearity": "nope"})
    with pytest.raises(ConfigError):
        parse_config({"schema_version": 1})


def test_validation_errors_exit_2(tmp_path, capsys):
    doc = dict(SMALL, time=dict(SMALL["time"], T=100.0))
    assert main(["simulate", "--config", _write(tmp_path, doc), "--preset", "ut3"]) == 2
    assert "finite propagation speed" in capsys.readouterr().err
    bad = _write(tmp_path, {"schema_version": 9, "nonlinearity": "ut3"}, "bad.json")
    assert main(["classify", "--config", bad]) == 2


def test_simulate_is_byte_identical(tmp_path):
    cfg = _write(tmp_path, SMALL)
    for d in ("a", "b"):
        assert main(["simulate", "--config", cfg, "--preset", "u2utux", "--out", str(tmp_path / d)]) == 0
    for f in ("norms.csv", "run.json", "experiment.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    header = (tmp_path / "a" / "norms.csv").read_text().splitlines()[0]
    assert header == "t,target,p,norm"


def test_simulate_sweep_threads(tmp_path, monkeypatch):
    monkeypatch.setenv("KGD_THREADS", "2")
    cfg = _write(tmp_path, SMALL)
    out = tmp_path / "sweep"
    assert main(["simulate", "--config", cfg, "--preset", "ut3", "--preset", "u2ut", "--out", str(out)]) == 0
    assert (out / "ut3" / "norms.csv").exists() and (out / "u2ut" / "snapshots.npz").exists()


def test_instability_exit_3(tmp_path, capsys):
    doc = dict(SMALL, eps=3.0, nonlinearity={"gamma": [0, 0, 0, 0, 0, 1.0, 0, 0, 0, 0]})
    doc["time"] = dict(SMALL["time"], norm_every=0.05)
    assert main(["simulate", "--config", _write(tmp_path, doc)]) == 3
    assert "instability at t=" in capsys.readouterr().err


def test_fit_and_report_short_window_inconclusive(tmp_path):
    cfg = _write(tmp_path, SMALL)
    run = tmp_path / "run"
    assert main(["simulate", "--config", cfg, "--preset", "ut3", "--out", str(run)]) == 0
    assert main(["fit", "--run", str(run)]) == 4
    fits = json.loads((run / "fits.json").read_text())
    assert fits["class"] == "B0"
    assert all(f["verdict"] == "inconclusive" for f in fits["fits"])
    assert "decade" in fits["fits"][0]["diagnosis"]
    assert main(["report", "--runs", str(run), "--out", str(tmp_path / "rep")]) == 4
    md = (tmp_path / "rep" / "report.md").read_text()
    assert "ut3 (class B0" in md
    assert (tmp_path / "rep" / "report.csv").read_text().startswith("run,class,norm,p,")


def test_profile_ode_outputs(tmp_path, capsys):
    args = ["profile-ode", "--kappa", "0.375", "--beta0", "1", "--tau0", "3", "--tau-end", "1e4"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "trajectory.csv").read_bytes()
    assert a == (tmp_path / "b" / "trajectory.csv").read_bytes()
    assert a.startswith(b"tau,re_beta,im_beta,abs_beta\n")
    summary = json.loads((tmp_path / "a" / "deviation.json").read_text())
    assert summary["max_scaled_deviation"] < 1e-8
    last = a.decode().strip().splitlines()[-1].split(",")
    assert float(last[0]) == pytest.approx(1e4)
    assert float(last[3]) == pytest.approx((1 + 0.75 * math.log(1e4 / 3)) ** -0.5, rel=1e-9)
