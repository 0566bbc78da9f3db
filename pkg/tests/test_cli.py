import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from sugarspec.cli import format_table, main
from sugarspec.dataset import load_csv, profile, save_csv, synthesize
from sugarspec.schemas import SCHEMAS

FAST = ["--max-components", "5", "--epochs", "20", "--optimizer", "adam", "--mlp-widths", "8,4",
        "--conv-channels", "2,2,2,2", "--ga-generations", "2", "--ga-population", "40"]


@pytest.fixture(scope="module")
def data_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "scatter.csv"
    save_csv(synthesize(profile("scatter", n_samples=60, dim=256, seed=5)), path)
    return path


def run(*argv):
    return main([str(a) for a in argv])


def usage_error(*argv):
    with pytest.raises(SystemExit) as exc:
        run(*argv)
    return exc.value.code


def test_synth_writes_dataset_and_stats(tmp_path, capsys):
    out = tmp_path / "pear.csv"
    assert run("synth", "--profile", "pear", "--n", 300, "--seed", 7, "--out", out) == 0
    d = load_csv(out)
    assert (d.n, d.dim) == (300, 1600)
    text = capsys.readouterr().out
    assert "synthetic" in text and "mean=" in text
    assert abs(d.sugar.mean() - 12.04) < 0.2 and abs(d.sugar.std() - 0.95) < 0.15


def test_synth_rejects_zero_samples(tmp_path):
    assert usage_error("synth", "--n", 0, "--out", tmp_path / "x.csv") == 2


def test_run_json_report(data_csv, tmp_path):
    out = tmp_path / "r.json"
    assert run("run", "--data", data_csv, "--strategy", "Non>PLS", "--folds", 10, "--seed", 1, "--out", out) == 0
    doc = json.loads(out.read_text())
    jsonschema.validate(doc, SCHEMAS["report"])
    assert doc["folds"] == 10 and len(doc["per_fold_rmse"]) == 10
    assert doc["closeness_pct"] == pytest.approx(100 * doc["rmsecv"] / doc["std"])


def test_run_full_strategy_has_both_traces(data_csv, tmp_path):
    out = tmp_path / "r.json"
    assert run("run", "--data", data_csv, "--strategy", "SG>MSC>SNV>WD(64)>GA(16)>MLP-CNN", "--folds", 5,
               "--out", out, *FAST) == 0
    doc = json.loads(out.read_text())
    jsonschema.validate(doc, SCHEMAS["report"])
    assert len(doc["ga_trace"]) == 5 and len(doc["nn_loss_trace"]) == 5


def test_run_table_format(data_csv, capsys):
    assert run("run", "--data", data_csv, "--strategy", "SNV>PLS", "--folds", 5, "--format", "table") == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split() == ["strategy", "RMSECV", "R2", "STD", "Closeness%"]
    assert all(len(c.split(".")[1]) == 3 for c in lines[1].split()[1:])


def test_run_bad_strategy_points_at_token(data_csv, capsys):
    assert usage_error("run", "--data", data_csv, "--strategy", "SG>FOO>PLS") == 2
    assert "'FOO'" in capsys.readouterr().err


def test_run_missing_file(tmp_path, capsys):
    assert run("run", "--data", tmp_path / "none.csv", "--strategy", "Non>PLS") == 1
    assert "not found" in capsys.readouterr().err


def test_run_fit_error_exits_nonzero(data_csv, capsys):
    assert run("run", "--data", data_csv, "--strategy", "WD(100)>PLS", "--folds", 5) == 1
    assert "fold 0" in capsys.readouterr().err


def test_compare_single_row_equals_run(data_csv, tmp_path):
    assert run("run", "--data", data_csv, "--strategy", "SNV>PLS", "--folds", 5, "--seed", 2,
               "--out", tmp_path / "r.json") == 0
    assert run("compare", "--data", data_csv, "--strategy", "SNV>PLS", "--folds", 5, "--seed", 2,
               "--format", "json", "--out", tmp_path / "c.json") == 0
    report = json.loads((tmp_path / "r.json").read_text())
    table = json.loads((tmp_path / "c.json").read_text())
    jsonschema.validate(table, SCHEMAS["compare"])
    (row,) = table["rows"]
    assert row["rmsecv"] == report["rmsecv"] and row["closeness_pct"] == report["closeness_pct"]


def test_compare_records_row_failures_and_keeps_going(data_csv, capsys):
    code = run("compare", "--data", data_csv, "--strategy", "Non>PLS", "--strategy", "WD(100)>PLS",
               "--strategy", "SNV>PLS", "--folds", 5)
    out = capsys.readouterr().out
    assert code == 1
    rows = out.splitlines()
    assert rows[1].startswith("Non>PLS") and "failed" in rows[2] and rows[3].startswith("SNV>PLS")
    assert "# WD(100)>PLS" in out


def test_compare_ordering_on_scatter_data(tmp_path):
    data = tmp_path / "scatter.csv"
    save_csv(synthesize(profile("scatter", n_samples=100, dim=800, seed=0)), data)
    out = tmp_path / "c.json"
    run("compare", "--data", data, "--strategy", "Non>PLS", "--strategy", "SG>MSC>SNV>WD(200)>PLS",
        "--folds", 5, "--format", "json", "--out", out)
    rows = json.loads(out.read_text())["rows"]
    assert rows[1]["rmsecv"] < rows[0]["rmsecv"]


def test_anova_report(tmp_path, capsys):
    data = tmp_path / "pear.csv"
    save_csv(synthesize(profile("pear", n_samples=150, dim=64, seed=3)), data)
    out = tmp_path / "a.json"
    assert run("anova", "--data", data, "--t1", 11.0, "--t2", 13.5, "--repeats", 5, "--out", out) == 0
    doc = json.loads(out.read_text())
    jsonschema.validate(doc, SCHEMAS["anova"])
    assert sum(doc["group_sizes"].values()) == 150


def test_anova_iid_data_is_near_null(tmp_path):
    rng = np.random.default_rng(0)
    lines = ["id," + ",".join(f"w{i}" for i in range(100)) + ",sugar"]
    for i in range(150):
        lines.append(f"s{i}," + ",".join(map(repr, rng.normal(size=100).tolist())) + f",{float(rng.uniform(8, 16))!r}")
    data = tmp_path / "iid.csv"
    data.write_text("\n".join(lines) + "\n")
    out = tmp_path / "a.json"
    assert run("anova", "--data", data, "--repeats", 30, "--out", out) == 0
    doc = json.loads(out.read_text())
    values = list(doc["between_pct"].values()) + list(doc["within_pct"].values())
    assert all(40 <= v <= 60 for v in values)


def test_anova_rejects_reversed_thresholds(data_csv):
    assert usage_error("anova", "--data", data_csv, "--t1", 13.5, "--t2", 11.0) == 2


def test_schema_command(capsys):
    assert run("schema", "report") == 0
    assert json.loads(capsys.readouterr().out)["title"] == "EvalReport"


def test_format_table_alignment():
    text = format_table(["strategy", "RMSECV"], [["Non>PLS", "1.736"], ["SG>PLS", "10.100"]])
    lines = text.splitlines()
    assert len({len(line) for line in lines}) == 1
    assert lines[1].endswith(" 1.736")


def test_console_entry_point(tmp_path):
    out = tmp_path / "c.csv"
    proc = subprocess.run([sys.executable, "-m", "sugarspec.cli", "synth", "--n", "3", "--dim", "64",
                           "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0 and out.exists()
    proc = subprocess.run([sys.executable, "-m", "sugarspec.cli", "run", "--data", str(out),
                           "--strategy", "Non>XYZ"], capture_output=True, text=True)
    assert proc.returncode == 2 and "XYZ" in proc.stderr
