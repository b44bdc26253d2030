import hashlib
import json
import subprocess
import sys
from pathlib import Path

import pandas as pd
import pytest

from lmsfeat.cli import run
from lmsfeat.config import ConfigError, load_config, parse_grid

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def tree_digest(root):
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(Path(root).rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    assert run(["synth", "--students", "300", "--seed", "5", "--out", str(d), "-q"]) == 0
    return d


def test_synth_then_validate(data, tmp_path):
    assert run(["validate", "--in", str(data), "--out", str(tmp_path), "-q"]) == 0
    report = json.loads((tmp_path / "validation.json").read_text())
    assert report["total_skipped"] == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["command"] == "validate"
    assert set(manifest["inputs"]) == {str(data / f) for f in ("logins.csv", "grades.csv", "enrollments.csv", "roster.csv", "terms.csv")}


def test_synth_audit(tmp_path):
    assert run(["synth", "--students", "200", "--audit", "--out", str(tmp_path), "-q"]) == 0
    audit = json.loads((tmp_path / "audit.json").read_text())
    assert audit["ok"]
    cfg = json.loads((tmp_path / "synth_config.json").read_text())
    assert cfg["n_students"] == 200 and cfg["seed"] == 0


def test_sweep_grid_rows(data, tmp_path):
    assert run(["sweep", "--in", str(data), "--outcome", "semester_gpa", "--grid", "0:48:0.5", "--out", str(tmp_path), "-q"]) == 0
    sweep = pd.read_csv(tmp_path / "sweep.csv")
    assert len(sweep) == 97
    assert list(sweep.columns) == ["gap_hours", "correlation"]


def test_sweep_with_cohorts(data, tmp_path):
    assert run(["sweep", "--in", str(data), "--grid", "0:24:6", "--cohort", "major", "--out", str(tmp_path), "-q"]) == 0
    frame = pd.read_csv(tmp_path / "cohort_sweep.csv")
    assert list(frame.columns) == ["gap_hours", "correlation", "cohort"]
    summary = json.loads((tmp_path / "sweep.json").read_text())
    assert summary["cohorts"]["DUAL"]["low_n"]


def test_train_is_deterministic(data, tmp_path):
    args = ["train", "--in", str(data), "--features", "periodic_logins,grade_value", "--outcome", "semester_gpa", "--seed", "7", "-q"]
    assert run(args + ["--out", str(tmp_path / "a")]) == 0
    assert run(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("eval.json", "model.json", "predictions.csv", "run.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_train_evaluate_importance(data, tmp_path):
    model_dir = tmp_path / "train"
    assert run(["train", "--in", str(data), "--outcome", "discontinued", "--features", "periodic_logins,grade_value,midterm_grade", "--out", str(model_dir), "-q"]) == 0
    assert (model_dir / "roc.csv").exists()
    ev = tmp_path / "eval"
    assert run(["evaluate", "--in", str(data), "--model", str(model_dir), "--out", str(ev), "-q"]) == 0
    a = json.loads((model_dir / "eval.json").read_text())["metrics"]
    b = json.loads((ev / "eval.json").read_text())["metrics"]
    assert a == b
    imp = tmp_path / "imp"
    assert run(["importance", "--in", str(data), "--model", str(model_dir), "--repeats", "2", "--out", str(imp), "-q"]) == 0
    assert set(pd.read_csv(imp / "importance.csv").feature) == {"periodic_logins", "grade_value", "midterm_grade"}


def test_combined_window_has_four_columns(data, tmp_path):
    assert run(["train", "--in", str(data), "--window", "combined", "--features", "periodic_logins", "--family", "linear", "--out", str(tmp_path), "-q"]) == 0
    record = json.loads((tmp_path / "run.json").read_text())
    assert record["columns"] == [f"periodic_logins@{w}" for w in ("4", "8", "12", "full")]


def test_feature_commands(data, tmp_path):
    assert run(["login-features", "--in", str(data), "--features", "periodic_logins,daily_logins,capped_logins", "--max-gap", "48", "--out", str(tmp_path), "-q"]) == 0
    logins = pd.read_csv(tmp_path / "login_features.csv")
    assert list(logins.columns) == ["student_id", "term_id", "periodic_logins", "daily_logins", "capped_logins"]
    assert run(["grade-features", "--in", str(data), "--variant", "value,median_credit", "--window", "8", "--out", str(tmp_path), "-q"]) == 0
    grades = pd.read_csv(tmp_path / "grade_features.csv")
    assert list(grades.columns) == ["student_id", "term_id", "grade_value", "grade_median_credit"]
    assert run(["login-features", "--in", str(data), "--features", "grade_value", "--out", str(tmp_path), "-q"]) == 1


def test_summarize_and_rank(data, tmp_path):
    assert run(["summarize", "--in", str(data), "--full-time-threshold", "0", "--out", str(tmp_path), "-q"]) == 0
    summary = pd.read_csv(tmp_path / "summary.csv")
    assert summary.term_id.tolist() == ["2023FA", "2024SP", "Total"]
    assert summary.students.tolist() == [300, 300, 600]
    assert run(["rank", "--in", str(data), "--features", "periodic_logins,raw_logins,major,grade_ratio", "--out", str(tmp_path), "-q"]) == 0
    ranking = pd.read_csv(tmp_path / "ranking.csv")
    assert set(ranking.outcome) == {"semester_gpa", "overall_gpa", "discontinued"}
    assert (ranking.n > 0).all()


def test_rfe_command(data, tmp_path):
    feats = "periodic_logins,raw_logins,grade_value,grade_ratio,midterm_grade,begin_gpa"
    assert run(["rfe", "--in", str(data), "--features", feats, "--target-k", "3", "--out", str(tmp_path), "-q"]) == 0
    result = json.loads((tmp_path / "rfe.json").read_text())
    assert len(result["selected"]) == 3 and len(result["eliminated"]) == 3
    assert run(["rfe", "--in", str(data), "--features", feats, "--target-k", "6", "--out", str(tmp_path), "-q"]) == 1


def test_report_layout(data, tmp_path):
    results = tmp_path / "results"
    for w in ("4", "8", "12", "full"):
        assert run(["train", "--in", str(data), "--window", w, "--features", "grade_value", "--family", "linear", "--out", str(results / f"w{w}"), "-q"]) == 0
    assert run(["sweep", "--in", str(data), "--grid", "0:12:6", "--out", str(results / "sweep"), "-q"]) == 0
    out = tmp_path / "report"
    assert run(["report", "--in", str(results), "--out", str(out), "-q"]) == 0
    table = pd.read_csv(out / "windows_1.csv")
    assert list(table.columns) == ["Metric", "First 4 Weeks", "First 8 Weeks", "First 12 Weeks", "Full Semester"]
    assert table.Metric.tolist() == ["MSE", "Within 0.5 Point", "Within 1 Point", "1 - R^2"]
    assert (out / "series" / "sweep_sweep.csv").exists()
    assert len(pd.read_csv(out / "model_comparison.csv")) == 4


def test_report_without_results(tmp_path):
    (tmp_path / "empty").mkdir()
    assert run(["report", "--in", str(tmp_path / "empty"), "--out", str(tmp_path / "o"), "-q"]) == 2


def test_inputs_not_modified(data, tmp_path):
    before = tree_digest(data)
    run(["train", "--in", str(data), "--out", str(tmp_path), "-q"])
    assert tree_digest(data) == before


def test_manifest_reproduces_run(data, tmp_path):
    first = tmp_path / "first"
    assert run(["sweep", "--in", str(data), "--grid", "0:24:2", "--out", str(first), "-q"]) == 0
    manifest = json.loads((first / "manifest.json").read_text())
    cfg = dict(manifest["config"], out=str(tmp_path / "again"))
    toml = "\n".join(f"{k} = {json.dumps(v)}" for k, v in cfg.items() if v is not None and not isinstance(v, (dict, list)))
    (tmp_path / "again.toml").write_text(toml + "\n")
    assert run(["sweep", "--config", str(tmp_path / "again.toml"), "-q"]) == 0
    assert (first / "sweep.csv").read_bytes() == (tmp_path / "again" / "sweep.csv").read_bytes()


def test_usage_errors(capsys):
    assert run(["frobnicate"]) == 1
    assert run(["train", "--bogus"]) == 1
    assert run([]) == 1
    assert "usage" in capsys.readouterr().err.lower()


def test_data_errors(tmp_path):
    assert run(["validate", "--in", str(tmp_path / "missing"), "--out", str(tmp_path / "o"), "-q"]) == 2


def test_bad_config(tmp_path):
    (tmp_path / "c.toml").write_text("wndow = 4\n")
    assert run(["validate", "--config", str(tmp_path / "c.toml")]) == 1


def test_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "lmsfeat.cli", "nope"], capture_output=True, text=True)
    assert proc.returncode == 1 and "invalid choice" in proc.stderr


# --- config ----------------------------------------------------------------


def test_parse_grid():
    assert len(parse_grid("0:48:0.5")) == 97
    assert parse_grid("1,2,4").tolist() == [1, 2, 4]
    for bad in ("5:1:1", "0:4:0", "a,b", "3,2"):
        with pytest.raises(ConfigError):
            parse_grid(bad)


def test_flags_override_file(tmp_path):
    (tmp_path / "c.toml").write_text('outcome = "overall_gpa"\nmin_gap = 9.5\nfeatures = ["raw_logins"]\n')
    cfg = load_config(tmp_path / "c.toml", {"min_gap": 12.0, "outcome": None})
    assert (cfg.outcome, cfg.min_gap, cfg.features) == ("overall_gpa", 12.0, ["raw_logins"])


def test_shipped_configs_load():
    names = sorted(p.name for p in CONFIGS.glob("*.toml"))
    assert "default.toml" in names
    for p in CONFIGS.glob("*.toml"):
        load_config(p)


def test_config_validation():
    for bad in ({"window": "6"}, {"family": "svm"}, {"test_fraction": 1.0}, {"threads": 0}):
        with pytest.raises(ConfigError):
            load_config(None, bad)
