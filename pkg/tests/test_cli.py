import json
import subprocess
import sys

import pytest

from viscowave.artifacts import CSV_MAGIC, read_csv
from viscowave.cli import EXIT_FAIL, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, build_config, run
from viscowave.errors import ConfigError

SMALL = ["--tmax", "50", "--points", "12", "--set", "rgrid.panels=10", "--set", "rgrid.nodes=8"]


def _run(capsys, *argv):
    rc = run(list(argv))
    out, err = capsys.readouterr()
    return rc, out, err


def test_coeffs_list(tmp_path, capsys):
    rc, out, err = _run(capsys, "coeffs", "list", "--out", str(tmp_path))
    assert rc == EXIT_OK
    assert "power" in out and "exp3" in out
    rows = json.loads(next(tmp_path.glob("coeffs-*.json")).read_text())
    assert {r["id"] for r in rows} >= {"const", "power", "exp3", "exp_neg", "inv_t_log"}


def test_simulate_writes_versioned_csv(tmp_path, capsys):
    rc, out, _ = _run(capsys, "simulate", "--coeff", "power:-0.5", "--beta", "1,2",
                      *SMALL, "--out", str(tmp_path))
    assert rc == EXIT_OK
    info = json.loads(out)
    cols, data, _ = read_csv(info["csv_path"])
    assert cols == ["t", "beta", "e_u", "e_ut"]
    assert sorted(set(data["beta"])) == [1.0, 2.0]
    with open(info["csv_path"]) as fh:
        assert fh.readline().rstrip("\n") == CSV_MAGIC


def test_identical_configs_give_identical_bytes(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert _run(capsys, "fit", "--coeff", "power:-0.5", *SMALL, "--out", str(d))[0] == 0
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes(), n


def test_differing_configs_do_not_clobber(tmp_path, capsys):
    for beta in ("1", "2"):
        _run(capsys, "simulate", "--coeff", "power:-0.5", "--beta", beta, *SMALL,
             "--out", str(tmp_path))
    assert len(list(tmp_path.glob("simulate-*.csv"))) == 2


def test_verify_T_D_passes(tmp_path, capsys):
    rc, out, _ = _run(capsys, "verify", "--theorem", "T_D", "--coeff", "power:-0.5", "--beta", "2",
                      "--tmax", "1000", "--points", "30", "--out", str(tmp_path))
    assert rc == EXIT_OK and json.loads(out)["pass"] is True


def test_verify_failure_exit_code(tmp_path, capsys):
    # a tiny ratio ceiling cannot be met
    rc, out, _ = _run(capsys, "verify", "--theorem", "T_D", "--coeff", "power:-0.5", "--beta", "2",
                      "--tmax", "200", "--points", "20", "--R-max", "1e-6", "--out", str(tmp_path))
    assert rc == EXIT_FAIL and json.loads(out)["pass"] is False


def test_unknown_coefficient_is_usage_error(tmp_path, capsys):
    rc, _, err = _run(capsys, "simulate", "--coeff", "nope:1", "--out", str(tmp_path))
    assert rc == EXIT_USAGE and "unknown coefficient" in err


def test_bad_flag_is_usage_error(capsys):
    assert _run(capsys, "simulate", "--no-such-flag")[0] == EXIT_USAGE
    assert _run(capsys, "frobnicate")[0] == EXIT_USAGE


def test_numeric_failure_exit_code(tmp_path, capsys):
    rc, _, err = _run(capsys, "fit", "--coeff", "power:-0.5", *SMALL, "--window", "1,1.01",
                      "--out", str(tmp_path))
    assert rc == EXIT_NUMERIC and "numerical failure" in err


def test_config_error_reports_line(tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[experiment]\ncoefficient = power:-0.5\n\n[time]\nt_max = -3\n")
    rc, _, err = _run(capsys, "simulate", "--config", str(cfg), "--out", str(tmp_path))
    assert rc == EXIT_USAGE
    assert f"{cfg}:5: field 'time.t_max'" in err
    cfg.write_text("[time]\nbogus = 1\n")
    with pytest.raises(ConfigError, match=r":2: field 'time.bogus': unknown field"):
        build_config(cfg)


def test_json_config_and_override(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"experiment": {"coefficient": "exp3", "betas": "2,3"},
                               "time.points": 7}))
    c = build_config(cfg, {("time", "points"): "9"})
    assert c[("experiment", "betas")] == [2.0, 3.0] and c[("time", "points")] == 9
    cfg.write_text('{"time": {"points": }')
    with pytest.raises(ConfigError, match="invalid JSON"):
        build_config(cfg)


def test_zones_and_wkb_artifacts(tmp_path, capsys):
    rc, out, _ = _run(capsys, "zones", "--coeff", "power:-0.5", "--grid", "30",
                      "--out", str(tmp_path))
    info = json.loads(out)
    assert rc == 0 and sum(info["counts"].values()) == 900
    assert open(info["svg_path"]).read().lstrip().startswith("<?xml")
    rc, out, _ = _run(capsys, "wkb-compare", "--coeff", "power:-0.5", "--out", str(tmp_path))
    info = json.loads(out)
    assert rc == 0 and 0.5 <= info["ratio_min"] <= info["ratio_max"] <= 2.0


def test_selftest_summary(tmp_path, capsys):
    rc, out, _ = _run(capsys, "selftest", "--out", str(tmp_path))
    doc = json.loads(out)
    assert rc == EXIT_OK and doc["pass"] is True
    assert len(doc["suites"]) >= 5 and all(s["pass"] for s in doc["suites"].values())
    assert _run(capsys, "selftest", "--suite", "nope", "--out", str(tmp_path))[0] == EXIT_USAGE


def test_console_script_entry(tmp_path):
    p = subprocess.run([sys.executable, "-m", "viscowave", "coeffs", "list", "--json",
                        "--out", str(tmp_path)], capture_output=True, text=True)
    assert p.returncode == 0 and json.loads(p.stdout)
