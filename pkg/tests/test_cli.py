import json
import subprocess
import sys

import pytest

from wardstats import cli


def report(argv):
    rep = cli.run(argv)
    return rep.as_dict()


def test_bayes():
    out = report(["bayes", "--prior", "1e-6", "--pe-hp", "0.99", "--pe-hd", "0.001"])
    assert out["exit_code"] == 0 and out["subcommand"] == "bayes"
    assert out["outputs"]["posterior"] == pytest.approx(0.000989022, rel=1e-5)
    assert len(out["inputs_digest"]) == 64


def test_bayes_grid_and_infinite_ratio():
    out = report(["bayes", "--prior", "0.1", "--pe-hp", "0.5", "--pe-hd", "0", "--grid", "0.01,0.5"])
    assert out["outputs"]["lr"] == "inf"
    assert out["outputs"]["posterior"] == 1.0


def test_rounding_and_full_precision():
    # posterior 0.09 / (0.09 + 0.18) = 1/3
    args = ["bayes", "--prior", "0.1", "--pe-hp", "0.9", "--pe-hd", "0.2"]
    short = report(args)["outputs"]["posterior"]
    full = report(args + ["--full-precision"])["outputs"]["posterior"]
    assert full == pytest.approx(1 / 3, rel=1e-15)
    assert short == 0.333333


def test_predict_k_zero_noise(tmp_path):
    data = tmp_path / "k.csv"
    data.write_text("pmi,k\n" + "".join(f"{x},{2 + 0.5 * x - 0.01 * x * x}\n" for x in range(0, 60, 5)))
    out = report(["predict-k", "--data", str(data), "--pmi", "20", "--full-precision"])
    assert out["exit_code"] == 0
    (pi,) = out["outputs"]["intervals"]
    assert pi["point"] == pytest.approx(8.0, abs=1e-9)
    assert pi["upper"] - pi["lower"] == pytest.approx(0.0, abs=1e-9)


def test_predict_k_bad_level_is_usage_error(tmp_path):
    data = tmp_path / "k.csv"
    data.write_text("1,2\n2,3\n3,5\n4,9\n")
    with pytest.raises(SystemExit) as info:
        cli.run(["predict-k", "--data", str(data), "--pmi", "2", "--level", "1.5"])
    assert info.value.code == 2


def test_unknown_subcommand_exit_2():
    with pytest.raises(SystemExit) as info:
        cli.run(["frobnicate"])
    assert info.value.code == 2


@pytest.mark.parametrize("sub", cli.SUBCOMMANDS)
def test_help(sub, capsys):
    with pytest.raises(SystemExit) as info:
        cli.run([sub, "--help"])
    assert info.value.code == 0
    assert "--pretty" in capsys.readouterr().out


def test_invalid_csv_reports_lines(tmp_path):
    bad = tmp_path / "roster.csv"
    bad.write_text("nurse_id,sector,clock_in,clock_out\n"
                   "n1,A,2013-04-01T07:00,2013-04-01T14:10\n"
                   "n2,Z,2013-04-01T07:00,2013-04-01T14:10\n"
                   "n3,A,2013-04-01T14:00,2013-04-01T07:00\n")
    out = report(["ingest", "--roster", str(bad)])
    assert out["exit_code"] == 1
    text = json.dumps(out["outputs"])
    assert '"line": 3' in text and '"line": 4' in text
    out = report(["attribute", "--roster", str(bad), "--deaths", str(bad)])
    assert out["exit_code"] == 1 and out["outputs"]["errors"][0]["line"] == 3


def test_missing_file_is_domain_error(tmp_path):
    out = report(["attribute", "--roster", str(tmp_path / "nope.csv"), "--deaths", str(tmp_path / "x.csv")])
    assert out["exit_code"] == 1 and "error" in out["outputs"]


def test_ingest_and_attribute_on_synthetic_ward(ward_files):
    out = report(["ingest", *sum((["--" + k, v] for k, v in ward_files.items()), [])])
    assert out["exit_code"] == 0 and out["outputs"]["valid"] is True
    out = report(["attribute", "--roster", ward_files["roster"], "--deaths", ward_files["deaths"],
                  "--nurse", "FT"])
    assert out["exit_code"] == 0
    assert "FT" in json.dumps(out["outputs"])


def test_risk_table_counts_inf(tmp_path):
    counts = tmp_path / "counts.csv"
    counts.write_text("nurse,same_zone,opposite_zone,hours_on_duty\nX,5,0,100\nY,3,1,90\n")
    out = report(["risk-table", "--counts", str(counts)])
    rows = {r["nurse_id"]: r for r in out["outputs"]["rows"]}
    assert rows["X"]["relative_risk"] == "inf"
    assert rows["Y"]["relative_risk"] == 3.0 and rows["Y"]["absolute_risk"] == 0.5


def test_pretty_goes_to_stderr(capsys):
    code = cli.main(["bayes", "--prior", "0.5", "--pe-hp", "0.5", "--pe-hd", "0.25", "--pretty"])
    cap = capsys.readouterr()
    assert code == 0
    assert "P(Hp|E)" in cap.err and "P(Hp|E)" not in cap.out
    assert json.loads(cap.out)["outputs"]["lr"] == 2.0


def test_simulate_seed_fallback(monkeypatch, tmp_path):
    cfg = tmp_path / "sim.cfg"
    cfg.write_text("horizon_days = 7\nintensity = flat:1\nstaff_morning = 2\n")
    base = ["simulate", "--config", str(cfg), "--reps", "5"]
    monkeypatch.setenv("CF_SEED", "77")
    env = report(base)
    assert env["outputs"]["seed"] == 77
    assert report(base + ["--seed", "77"])["outputs"] == env["outputs"]
    assert report(base + ["--seed", "78"])["outputs"] != env["outputs"]
    monkeypatch.delenv("CF_SEED")
    assert report(base)["outputs"]["seed"] == 0


def test_simulate_bad_config(tmp_path):
    cfg = tmp_path / "sim.cfg"
    cfg.write_text("mystery = 1\n")
    out = report(["simulate", "--config", str(cfg), "--reps", "1"])
    assert out["exit_code"] == 1 and "mystery" in out["outputs"]["error"]
    with pytest.raises(SystemExit):
        cli.run(["simulate", "--reps", "-3"])


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "wardstats", "bayes", "--prior", "0.01", "--pe-hp", "1",
                           "--pe-hd", "0.01"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    out = json.loads(proc.stdout)
    assert out["outputs"]["posterior"] == pytest.approx(0.5025, rel=1e-3)
    bad = subprocess.run([sys.executable, "-m", "wardstats"], capture_output=True, text=True, check=False)
    assert bad.returncode == 2
