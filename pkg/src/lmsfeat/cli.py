"""Command-line entry point: ``lmsfeat <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data or validation error.
Every command writes only under ``--out`` and leaves a manifest.json there.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import platform
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .analytics import (
    CohortSpec,
    cohort_sweep,
    format_table,
    numeric_column,
    rank_by_correlation,
    ranking_frame,
    summary_frame,
    term_summary,
)
from .config import ConfigError, RunConfig, load_config, parse_grid
from .grade_features import DEFAULT_LETTER_MAP, LetterMap
from .ingest import FILE_NAMES, OUTCOMES, DataValidationError, SchemaError, load_dataset, resolve_paths
from .login_features import gap_sweep
from .models import (
    evaluate,
    fill_missing,
    infer_task,
    load_model,
    permutation_importance,
    predict,
    rfe,
    save_model,
    split,
    train_family,
)
from .models.gbm import GbmParams
from .pipeline import FeatureBuilder, expand_features, feature_kind
from .synth import SynthConfig, audit, generate

log = logging.getLogger("lmsfeat")

COMMANDS = (
    "synth",
    "validate",
    "summarize",
    "login-features",
    "grade-features",
    "sweep",
    "rank",
    "train",
    "evaluate",
    "rfe",
    "importance",
    "report",
)
WINDOW_COLUMNS = {
    "4": "First 4 Weeks",
    "8": "First 8 Weeks",
    "12": "First 12 Weeks",
    "full": "Full Semester",
    "combined": "All Combined",
}


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


# --- io helpers ------------------------------------------------------------------


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _csv(df: pd.DataFrame, path: Path) -> None:
    df.to_csv(path, index=False, lineterminator="\n", float_format="%.10g")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _versions() -> dict:
    import numba
    import scipy

    return {
        "lmsfeat": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "pandas": pd.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


class Run:
    """Output directory, config and the inputs read, for the manifest."""

    def __init__(self, command: str, cfg: RunConfig, config_path):
        self.command = command
        self.cfg = cfg
        self.out = Path(cfg.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.inputs: dict[str, str] = {}
        self.outputs: list[str] = []
        if config_path:
            self.read(Path(config_path))

    def read(self, path: Path) -> Path:
        self.inputs[str(path)] = _sha256(path)
        return path

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        p = self.out / name
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def say(self, text: str) -> None:
        if not self.cfg.quiet:
            print(text)

    def manifest(self) -> None:
        _dump_json(
            {
                "command": self.command,
                "config": self.cfg.to_dict(),
                "seed": self.cfg.seed,
                "inputs": dict(sorted(self.inputs.items())),
                "outputs": sorted(set(self.outputs)),
                "versions": _versions(),
            },
            self.out / "manifest.json",
        )

    def dataset(self):
        if not self.cfg.input:
            raise UsageError(f"{self.command}: --in is required")
        paths = resolve_paths(self.cfg.input)
        for p in paths.values():
            if p.exists():
                self.read(p)
        return load_dataset(paths, max_skip_fraction=self.cfg.max_skip_fraction, tz=self.cfg.tz)

    def letter_map(self) -> LetterMap:
        if not self.cfg.letter_map:
            return DEFAULT_LETTER_MAP
        return LetterMap.from_csv(self.read(Path(self.cfg.letter_map)))

    def builder(self, dataset) -> FeatureBuilder:
        return FeatureBuilder(dataset, self.cfg.min_gap, self.cfg.max_gap, self.letter_map(), self.cfg.window)


# --- commands --------------------------------------------------------------------


def cmd_synth(run: Run, args) -> None:
    overrides = dict(run.cfg.synth)
    # --seed wins, then [synth] seed, then the top-level seed
    if args.seed is not None or "seed" not in overrides:
        overrides["seed"] = run.cfg.seed
    if args.students is not None:
        overrides["n_students"] = args.students
    try:
        config = SynthConfig.from_dict(overrides)
        config.validate()
    except (TypeError, ValueError) as e:
        raise UsageError(f"synth config: {e}") from None
    truth = generate(config, run.out)
    run.outputs += list(FILE_NAMES.values()) + ["planted_truth.json"]
    _dump_json(config.to_dict(), run.path("synth_config.json"))
    if args.audit:
        ds = load_dataset(run.out)
        report = audit(ds, config)
        _dump_json(report, run.path("audit.json"))
        run.say(f"audit: {'ok' if report['ok'] else 'FLAGGED'} ({len(report['checks'])} checks)")
    run.say(f"wrote {config.n_students} students x {len(config.terms)} terms to {run.out}")
    run.say(f"planted peak gap window: {truth.peak_gap_window[0]:g}-{truth.peak_gap_window[1]:g} h")


def cmd_validate(run: Run, args) -> None:
    try:
        ds = run.dataset()
    except DataValidationError as e:
        if e.report is not None:
            _dump_json(e.report.to_dict(), run.path("validation.json"))
        raise
    report = ds.report.to_dict()
    _dump_json(report, run.path("validation.json"))
    rows = [
        {"file": name, "rows": f["rows"], "loaded": f["loaded"], "skipped": f["skipped"]}
        for name, f in report["files"].items()
    ]
    run.say(format_table(pd.DataFrame(rows)))
    run.say(f"orphan logins: {report['orphan_logins']}  orphan grades: {report['orphan_grades']}")


def cmd_summarize(run: Run, args) -> None:
    ds = run.dataset()
    threshold = run.cfg.full_time_threshold or None
    frame = summary_frame(term_summary(ds, threshold))
    _csv(frame, run.path("summary.csv"))
    text = format_table(frame)
    run.path("summary.txt").write_text(text + "\n")
    run.say(text)


def _feature_table(run: Run, names) -> pd.DataFrame:
    ds = run.dataset()
    builder = run.builder(ds)
    names = expand_features(names, run.cfg.window)
    return builder.wide(names)


def cmd_login_features(run: Run, args) -> None:
    names = args.features.split(",") if args.features else ["periodic_logins"]
    for n in names:
        if feature_kind(n) != "login":
            raise UsageError(f"{n!r} is not a login feature")
    table = _feature_table(run, names)
    _csv(table, run.path("login_features.csv"))
    run.say(f"{len(table)} rows, columns: {', '.join(table.columns[2:])}")


def cmd_grade_features(run: Run, args) -> None:
    variants = (args.variant or run.cfg.grade_variant).split(",")
    names = [v if v.startswith("grade_") else f"grade_{v}" for v in variants]
    for n in names:
        if feature_kind(n) != "grade":
            raise UsageError(f"{n!r} is not a grade variant")
    table = _feature_table(run, names)
    _csv(table, run.path("grade_features.csv"))
    run.say(f"{len(table)} rows, columns: {', '.join(table.columns[2:])}")


def _cohort_spec(cfg: RunConfig) -> CohortSpec:
    return CohortSpec(cfg.cohort, top_k=cfg.cohort_top_k, min_population=cfg.cohort_min_population)


def cmd_sweep(run: Run, args) -> None:
    ds = run.dataset()
    cfg = run.cfg
    if cfg.window == "combined":
        raise UsageError("sweep needs a single window")
    grid = parse_grid(cfg.grid)
    builder = run.builder(ds)
    index = builder.index(builder.window if builder.window != "full" else None)
    result = gap_sweep(ds, grid, cfg.outcome, index=index)
    _csv(result.to_frame(), run.path("sweep.csv"))
    summary = {
        "outcome": cfg.outcome,
        "window": cfg.window,
        "n": result.n,
        "degenerate": result.degenerate,
        "peak_gap": result.peak_gap,
        "peak_r": result.peak_r,
        "r_at_first_gap": float(result.correlations[0]),
    }
    if cfg.cohort:
        cs = cohort_sweep(ds, _cohort_spec(cfg), grid, cfg.outcome, index=index)
        _csv(cs.to_frame(), run.path("cohort_sweep.csv"))
        summary["cohorts"] = {
            str(k): {"peak_gap": r.peak_gap, "peak_r": r.peak_r, "n": r.n, "low_n": r.low_n}
            for k, r in cs.results.items()
        }
    _dump_json(summary, run.path("sweep.json"))
    run.say(f"{cfg.outcome}: peak r = {result.peak_r:.4f} at {result.peak_gap:g} h (r = {result.correlations[0]:.4f} at {grid[0]:g} h)")


def cmd_rank(run: Run, args) -> None:
    ds = run.dataset()
    builder = run.builder(ds)
    names = expand_features(run.cfg.features, run.cfg.window)
    frame = builder.wide(names)
    outcomes = args.outcomes.split(",") if args.outcomes else [o for o in OUTCOMES if o in ds.roster.columns]
    for o in outcomes:
        if o not in ds.roster.columns:
            raise DataError(f"roster has no outcome column {o!r}")
        frame[o] = ds.roster[o].to_numpy()
    ranked = ranking_frame(rank_by_correlation(frame, names, outcomes))
    _csv(ranked, run.path("ranking.csv"))
    text = format_table(ranked)
    run.path("ranking.txt").write_text(text + "\n")
    run.say(text)


def _hyper(cfg: RunConfig) -> dict:
    hyper = dict(cfg.hyper)
    if cfg.family == "gbm":
        hyper.setdefault("seed", cfg.seed)
    return hyper


def _run_record(cfg: RunConfig, names, columns, task) -> dict:
    return {
        "features": list(cfg.features),
        "columns": list(columns),
        "outcome": cfg.outcome,
        "task": task,
        "window": cfg.window,
        "family": cfg.family,
        "hyper": _hyper(cfg),
        "seed": cfg.seed,
        "test_fraction": cfg.test_fraction,
        "stratify": cfg.stratify,
        "min_gap": cfg.min_gap,
        "max_gap": cfg.max_gap,
        "letter_map": cfg.letter_map,
    }


def _score(report) -> float:
    """Lower is better."""
    return report.mse if report.task == "regression" else -(report.auc if report.auc is not None else report.accuracy)


def _write_eval(run: Run, record: dict, model, test, prefix: str = "") -> dict:
    report = evaluate(model, test)
    preds = predict(model, test)
    out = {k: record[k] for k in ("features", "columns", "outcome", "window", "family")}
    out["command"] = run.command
    out["metrics"] = report.to_dict()
    _dump_json(out, run.path(f"{prefix}eval.json"))
    pred_frame = test.keys.copy()
    pred_frame["actual"] = test.y
    pred_frame["predicted"] = preds
    _csv(pred_frame, run.path(f"{prefix}predictions.csv"))
    if report.roc_points:
        _csv(pd.DataFrame(report.roc_points, columns=["fpr", "tpr"]), run.path(f"{prefix}roc.csv"))
    return out


def _metric_line(metrics: dict) -> str:
    if metrics["task"] == "regression":
        w = metrics["within_tolerance"]
        r2 = metrics["r2"]
        return f"MSE {metrics['mse']:.4f}  R2 {r2:.4f}  within 0.5: {w.get('0.5', float('nan')):.3f}" if r2 is not None else f"MSE {metrics['mse']:.4f}"
    auc = metrics.get("auc")
    return f"accuracy {metrics['accuracy']:.4f}" + (f"  AUC {auc:.4f}" if auc is not None else "")


def _matrix(run: Run, ds, names, task=None):
    builder = run.builder(ds)
    fm = builder.matrix(names, run.cfg.outcome, task)
    if len(fm) < 2:
        raise DataError("fewer than 2 rows with a known outcome")
    stratify = None if run.cfg.stratify == "none" else run.cfg.stratify
    return fm, split(fm, run.cfg.test_fraction, run.cfg.seed, stratify)


def cmd_train(run: Run, args) -> None:
    cfg = run.cfg
    ds = run.dataset()
    names = expand_features(cfg.features, cfg.window)
    task = infer_task(cfg.outcome)
    fm, (train, test) = _matrix(run, ds, names, task)
    hyper = _hyper(cfg)
    if cfg.grid_search:
        rows = []
        best = None
        for i, h in enumerate(cfg.grid_search):
            h = {**hyper, **h}
            model = train_family(train, cfg.family, h, task)
            rep = evaluate(model, test)
            rows.append({"config": i, "hyper": json.dumps(h, sort_keys=True), **_flat_metrics(rep.to_dict())})
            if best is None or _score(rep) < best[0]:
                best = (_score(rep), h)
        _csv(pd.DataFrame(rows), run.path("grid_results.csv"))
        hyper = best[1]
        cfg.hyper = hyper
    model = train_family(train, cfg.family, hyper, task)
    record = _run_record(cfg, cfg.features, names, task)
    record["hyper"] = hyper
    record["imputation"] = {"medians": fm.medians, "imputed": fm.imputed, "dropped_missing_outcome": fm.dropped_missing_outcome}
    record["rows"] = {"train": len(train), "test": len(test)}
    save_model(model, run.path("model.json"))
    _dump_json(record, run.path("run.json"))
    out = _write_eval(run, record, model, test)
    run.say(f"{cfg.family} on {', '.join(names)} -> {cfg.outcome}: {_metric_line(out['metrics'])}")


def _flat_metrics(d: dict) -> dict:
    flat = {}
    for k, v in d.items():
        if isinstance(v, dict):
            for kk, vv in v.items():
                flat[f"{k}_{kk}"] = vv
        elif not isinstance(v, list):
            flat[k] = v
    return flat


def _load_run(run: Run, model_arg: str):
    path = Path(model_arg)
    model_path = path / "model.json" if path.is_dir() else path
    if not model_path.exists():
        raise DataError(f"model file not found: {model_path}")
    model = load_model(run.read(model_path))
    rec_path = model_path.parent / "run.json"
    record = json.loads(run.read(rec_path).read_text()) if rec_path.exists() else {}
    return model, record


def _apply_record(cfg: RunConfig, record: dict, args) -> None:
    """Settings saved at training time fill in anything not given on the command line."""
    for key in ("outcome", "window", "family", "test_fraction", "stratify", "min_gap", "max_gap", "letter_map", "seed"):
        if key in record and getattr(args, key, None) is None:
            setattr(cfg, key, record[key])
    if "features" in record:
        cfg.features = record["features"]


def cmd_evaluate(run: Run, args) -> None:
    model, record = _load_run(run, args.model)
    _apply_record(run.cfg, record, args)
    ds = run.dataset()
    names = list(model.columns)
    fm, (_, test) = _matrix(run, ds, names, model.task)
    rows = fm if args.split == "all" else test
    # fill gaps with the medians stored at training time, not this dataset's
    wide = run.builder(ds).wide(names)
    for c in names:
        wide[c] = numeric_column(wide[c])
    aligned = rows.keys.merge(wide, on=["student_id", "term_id"], how="left")
    rows = dataclasses.replace(rows, X=fill_missing(aligned, names, model.medians))
    record = {**record, "features": run.cfg.features, "columns": names, "window": run.cfg.window, "family": model.family}
    record["outcome"] = run.cfg.outcome
    out = _write_eval(run, record, model, rows)
    run.say(f"{args.split} rows: {_metric_line(out['metrics'])}")


def cmd_rfe(run: Run, args) -> None:
    cfg = run.cfg
    ds = run.dataset()
    names = expand_features(cfg.features, cfg.window)
    task = infer_task(cfg.outcome)
    fm, (train, _) = _matrix(run, ds, names, task)
    if not 1 <= cfg.target_k < len(names):
        raise UsageError(f"--target-k must be between 1 and {len(names) - 1}")
    params = GbmParams(**{**{"seed": cfg.seed}, **cfg.hyper}) if cfg.family == "gbm" else GbmParams(seed=cfg.seed)
    result = rfe(train, params, cfg.target_k, task)
    rows = [{"rank": i + 1, "feature": f, "selected": f in result.selected} for i, f in enumerate(result.ranking)]
    frame = pd.DataFrame(rows)
    _csv(frame, run.path("rfe.csv"))
    _dump_json({"selected": result.selected, "eliminated": result.eliminated}, run.path("rfe.json"))
    run.say(format_table(frame))


def cmd_importance(run: Run, args) -> None:
    model, record = _load_run(run, args.model)
    _apply_record(run.cfg, record, args)
    ds = run.dataset()
    _, (_, test) = _matrix(run, ds, list(model.columns), model.task)
    imp = permutation_importance(model, test, repeats=run.cfg.repeats, seed=run.cfg.seed)
    frame = pd.DataFrame({"feature": imp.columns, "importance": imp.mean, "std": imp.std})
    frame = frame.sort_values(["importance", "feature"], ascending=[False, True], kind="mergesort").reset_index(drop=True)
    _csv(frame, run.path("importance.csv"))
    run.say(f"baseline {imp.metric}: {imp.baseline:.4f}")
    run.say(format_table(frame))


# --- report ----------------------------------------------------------------------


def _window_table(evals: list[dict]) -> pd.DataFrame:
    by_window = {e["window"]: e["metrics"] for e in evals}
    windows = [w for w in WINDOW_COLUMNS if w in by_window]
    task = next(iter(by_window.values()))["task"]
    if task == "regression":
        rows = [
            ("MSE", lambda m: m["mse"]),
            ("Within 0.5 Point", lambda m: m["within_tolerance"].get("0.5")),
            ("Within 1 Point", lambda m: m["within_tolerance"].get("1")),
            ("1 - R^2", lambda m: m["one_minus_r2"]),
        ]
    else:
        rows = [("Accuracy", lambda m: m["accuracy"]), ("Area under ROC", lambda m: m["auc"]), ("1 - AUC", lambda m: m["one_minus_auc"])]
    data = {"Metric": [name for name, _ in rows]}
    for w in windows:
        data[WINDOW_COLUMNS[w]] = [np.nan if f(by_window[w]) is None else float(f(by_window[w])) for _, f in rows]
    return pd.DataFrame(data)


def cmd_report(run: Run, args) -> None:
    root = Path(run.cfg.input or ".")
    if not root.is_dir():
        raise DataError(f"results directory not found: {root}")
    eval_paths = sorted(p for p in root.rglob("eval.json") if run.out.resolve() not in p.resolve().parents)
    sweep_paths = sorted(p for p in root.rglob("sweep.csv") if run.out.resolve() not in p.resolve().parents)
    if not eval_paths and not sweep_paths:
        raise DataError(f"no results (eval.json or sweep.csv) under {root}")

    evals = []
    for p in eval_paths:
        e = json.loads(run.read(p).read_text())
        e["run"] = str(p.parent.relative_to(root)) or "."
        evals.append(e)

    sections = []
    # windowed tables: same outcome, family and requested features across windows
    groups: dict[tuple, list[dict]] = {}
    for e in evals:
        key = (e["outcome"], e["family"], ",".join(e["features"]), e.get("command", "train"))
        groups.setdefault(key, []).append(e)
    for i, ((outcome, family, feats, command), members) in enumerate(sorted(groups.items())):
        table = _window_table(members)
        _csv(table, run.path(f"windows_{i + 1}.csv"))
        title = f"{outcome} / {family} / {feats}" + ("" if command == "train" else f" ({command})")
        sections.append(f"{title}\n{format_table(table)}")

    # model comparison: one row per model, 1-R^2 or 1-AUC per outcome
    comp: dict[str, dict[str, float]] = {}
    outcomes = []
    for e in evals:
        label = f"{e['family']}: {','.join(e['features'])} [{WINDOW_COLUMNS.get(e['window'], e['window'])}]"
        if e.get("command", "train") != "train":
            label += f" ({e['command']})"
        m = e["metrics"]
        value = m.get("one_minus_r2") if m["task"] == "regression" else m.get("one_minus_auc")
        col = f"{e['outcome']} ({'1 - R^2' if m['task'] == 'regression' else '1 - AUC'})"
        if col not in outcomes:
            outcomes.append(col)
        comp.setdefault(label, {})[col] = np.nan if value is None else float(value)
    if comp:
        frame = pd.DataFrame([{"Model": k, **v} for k, v in comp.items()], columns=["Model"] + outcomes)
        _csv(frame, run.path("model_comparison.csv"))
        sections.append(f"Model comparison\n{format_table(frame)}")

    def series_name(kind: str, p: Path) -> str:
        rel = str(p.parent.relative_to(root)).replace("/", "_").replace("\\", "_")
        return f"series/{kind}_{'root' if rel in ('', '.') else rel}.csv"

    for p in sweep_paths:
        s = pd.read_csv(run.read(p))
        _csv(pd.DataFrame({"x": s["gap_hours"], "y": s["correlation"]}), run.path(series_name("sweep", p)))
    for p in sorted(root.rglob("roc.csv")):
        if run.out.resolve() in p.resolve().parents:
            continue
        s = pd.read_csv(run.read(p))
        _csv(pd.DataFrame({"x": s["fpr"], "y": s["tpr"]}), run.path(series_name("roc", p)))

    text = "\n\n".join(sections)
    run.path("report.txt").write_text(text + "\n")
    run.say(text)


# --- argument parsing -----------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("global options")
    g.add_argument("--config", help="TOML config file; flags override its values")
    g.add_argument("--out", help="output directory (default lmsfeat-out)")
    g.add_argument("--seed", type=int, help="random seed (default 0)")
    g.add_argument("--threads", type=int, help="worker threads for numeric kernels (default 1)")
    g.add_argument("-q", "--quiet", action="store_true", default=None, help="print nothing on success")


def _data(p, required=False):
    p.add_argument("--in", dest="input", required=required, help="directory with the five input CSV files")
    p.add_argument("--tz", help="institution time zone (default UTC)")
    p.add_argument("--max-skip-fraction", type=float, help="fail above this share of bad rows (default 0.01)")


def _feature_opts(p):
    p.add_argument("--window", help="4, 8, 12, full (default) or combined")
    p.add_argument("--min-gap", type=float, help="minimum gap hours for periodic_logins (default 11)")
    p.add_argument("--max-gap", type=float, help="gap cap hours for capped_logins")
    p.add_argument("--letter-map", help="CSV with header raw,value (default built-in A+..C map)")


def _model_opts(p):
    p.add_argument("--features", help="comma-separated feature names (default periodic_logins,grade_value)")
    p.add_argument("--outcome", help="semester_gpa (default), overall_gpa or discontinued")
    p.add_argument("--family", help="gbm (default) or linear")
    p.add_argument("--test-fraction", type=float, help="held-out share (default 0.2)")
    p.add_argument("--stratify", help="none (default), outcome or term")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lmsfeat", description="LMS login and grade features, sweeps and models.")
    parser.add_argument("--version", action="version", version=f"lmsfeat {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic dataset with planted structure")
    _common(p)
    p.add_argument("--students", type=int, help="students per term (default 5000)")
    p.add_argument("--audit", action="store_true", help="reload the output and audit realized rates")

    p = sub.add_parser("validate", help="load and validate input files")
    _common(p)
    _data(p)

    p = sub.add_parser("summarize", help="per-term counts table")
    _common(p)
    _data(p)
    p.add_argument("--full-time-threshold", type=float, help="minimum attempted hours, 0 for everyone (default 12)")

    p = sub.add_parser("login-features", help="login count features per student-term")
    _common(p)
    _data(p)
    _feature_opts(p)
    p.add_argument("--features", help="login feature names (default periodic_logins)")

    p = sub.add_parser("grade-features", help="grade features per student-term")
    _common(p)
    _data(p)
    _feature_opts(p)
    p.add_argument("--variant", help="grade variant(s), e.g. value,ratio_course (default value)")

    p = sub.add_parser("sweep", help="correlation of periodic logins with an outcome across minimum gaps")
    _common(p)
    _data(p)
    p.add_argument("--window", help="4, 8, 12 or full (default)")
    p.add_argument("--outcome", help="roster outcome column (default semester_gpa)")
    p.add_argument("--grid", help="start:stop:step hours, stop inclusive (default 0:48:0.5)")
    p.add_argument("--cohort", help="also sweep per cohort: major, attempted_hours_bin, completed_hours_bin")
    p.add_argument("--cohort-top-k", type=int, help="keep the k most populous majors")

    p = sub.add_parser("rank", help="rank features by correlation with each outcome")
    _common(p)
    _data(p)
    _feature_opts(p)
    p.add_argument("--features", help="comma-separated feature names")
    p.add_argument("--outcomes", help="comma-separated outcomes (default all present)")

    p = sub.add_parser("train", help="train a model and evaluate it on the held-out split")
    _common(p)
    _data(p)
    _feature_opts(p)
    _model_opts(p)

    p = sub.add_parser("evaluate", help="score a trained model")
    _common(p)
    _data(p)
    p.add_argument("--model", required=True, help="model.json or the train output directory")
    p.add_argument("--split", choices=("test", "all"), default="test", help="rows to score (default test)")

    p = sub.add_parser("rfe", help="recursive feature elimination with boosted trees")
    _common(p)
    _data(p)
    _feature_opts(p)
    _model_opts(p)
    p.add_argument("--target-k", type=int, help="features to keep (default 5)")

    p = sub.add_parser("importance", help="permutation importance of a trained model")
    _common(p)
    _data(p)
    p.add_argument("--model", required=True, help="model.json or the train output directory")
    p.add_argument("--repeats", type=int, help="shuffles per column (default 10)")

    p = sub.add_parser("report", help="tables and plot series from result directories")
    _common(p)
    p.add_argument("--in", dest="input", help="directory searched for eval.json, sweep.csv and roc.csv")
    return parser


_CONFIG_KEYS = (
    "input",
    "out",
    "seed",
    "threads",
    "quiet",
    "window",
    "grid",
    "min_gap",
    "max_gap",
    "letter_map",
    "features",
    "outcome",
    "family",
    "test_fraction",
    "stratify",
    "full_time_threshold",
    "cohort",
    "cohort_top_k",
    "target_k",
    "repeats",
    "max_skip_fraction",
    "tz",
)

_HANDLERS = {
    "synth": cmd_synth,
    "validate": cmd_validate,
    "summarize": cmd_summarize,
    "login-features": cmd_login_features,
    "grade-features": cmd_grade_features,
    "sweep": cmd_sweep,
    "rank": cmd_rank,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "rfe": cmd_rfe,
    "importance": cmd_importance,
    "report": cmd_report,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().strip() + "\nlmsfeat: error: a command is required")
        overrides = {k: getattr(args, k, None) for k in _CONFIG_KEYS}
        cfg = load_config(args.config, overrides)
    except SystemExit as e:  # --help / --version
        return int(e.code or 0)
    except (UsageError, ConfigError) as e:
        print(str(e), file=sys.stderr)
        return 1

    logging.basicConfig(level=logging.ERROR if cfg.quiet else logging.WARNING, format="%(levelname)s: %(message)s")
    if cfg.threads > 1:
        import warnings

        import numba

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            numba.set_num_threads(min(cfg.threads, numba.config.NUMBA_NUM_THREADS))

    try:
        r = Run(args.command, cfg, args.config)
        _HANDLERS[args.command](r, args)
        r.manifest()
    except (UsageError, ConfigError) as e:
        print(f"lmsfeat {args.command}: {e}", file=sys.stderr)
        return 1
    except (DataError, DataValidationError, SchemaError, FileNotFoundError, KeyError, ValueError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"lmsfeat {args.command}: {msg}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
