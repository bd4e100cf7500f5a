"""Command-line entry point: ``utilcast <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data or schema error, 3 internal error.
Every command that writes files also writes a JSON run manifest next to them.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import os
import sys
import time
from dataclasses import replace

from . import __version__
from .advisor import AdvicePolicy, batch_advise, estimate_savings, format_advice
from .baselines import GBTConfig, baseline_from_dict, fit_gbt, fit_linear, save_baseline
from .dataset import (
    DEFAULT_TARGET,
    LEAKAGE_POLICIES,
    build_feature_matrix,
    correlation_matrix,
    prune_correlated,
    read_matrix,
    train_test_split,
    write_matrix,
)
from .errors import UtilcastError
from .evaluation import DEFAULT_BIN_EDGES, error_by_bin, evaluate, export_report
from .forest import (
    ForestConfig,
    RandomForestModel,
    fit_forest,
    forest_from_dict,
    load_document,
    predict,
    predict_intervals,
    save_model,
)
from .trace_ingest import (
    PreprocessConfig,
    generate_synthetic_trace,
    parse_trace_file,
    preprocess,
    read_encoders,
    read_records,
    write_encoders,
    write_records,
    write_trace_csv,
)
from .tuning import ParamGrid, randomized_search, write_report, format_table

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

PIPELINE_STAGES = ("synth", "preprocess", "split", "tune", "train", "evaluate", "advise")

DEFAULT_PIPELINE_CONFIG = """\
[pipeline]
seed = 7

[synth]
# set trace = <path> to use a real trace file instead
n = 2000
noise = 0.08

[preprocess]
low_cardinality_threshold = 32
missing_fill = 0.0

[split]
target = average_usage_cpu
leakage = exclude-siblings
test_fraction = 0.2
prune_threshold = 0.95

[tune]
samples = 6
folds = 3

[train]
# forest, linear or gbt; empty keys keep the tuned values
model = forest
n_estimators =
max_depth =
min_samples_split =
min_samples_leaf =

[evaluate]
bin_feature = resource_request_cpus
bin_edges = 0,5,10,20,50

[advise]
requested_col = resource_request_cpus
alpha = 0.1
headroom = 0.0
risk_tolerance = 0.1
granularity = 0.25
cluster_units = 10000
"""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


# --------------------------------------------------------------------------
# seeds and manifests


def stage_seed(master, stage):
    """Seed for one pipeline stage: first 63 bits of sha256("<master>:<stage>")."""
    digest = hashlib.sha256(f"{int(master)}:{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def _file_hash(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _describe(paths):
    out = {}
    for p in paths:
        if p and os.path.isfile(p):
            out[os.fspath(p)] = _file_hash(p)
    return out


def write_manifest(path, command, seed, config, inputs, outputs, started):
    """Record what ran, on what, with which settings and what it produced."""
    config_text = json.dumps(config, sort_keys=True, default=str)
    manifest = {
        "command": command,
        "seed": seed,
        "config": config,
        "config_hash": hashlib.sha256(config_text.encode()).hexdigest(),
        "inputs": _describe(inputs),
        "outputs": _describe(outputs),
        "tool_version": __version__,
        "duration_seconds": round(time.perf_counter() - started, 3),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1, default=str)
        fh.write("\n")
    return path


def _manifest_for(output):
    return f"{output}.manifest.json"


# --------------------------------------------------------------------------
# model files


def load_any_model(path):
    doc = load_document(path)
    if doc.get("kind") == "forest":
        return forest_from_dict(doc)
    return baseline_from_dict(doc)


def _model_rows(model, matrix):
    """The model's feature columns, picked by name from ``matrix``."""
    names = tuple(model.feature_names)
    return matrix.select(names) if matrix.column_names != names else matrix


def _predict_any(model, matrix):
    rows = _model_rows(model, matrix)
    if isinstance(model, RandomForestModel):
        return predict(model, rows)
    return model.predict(rows.values)


def _save_any(model, path):
    if isinstance(model, RandomForestModel):
        save_model(model, path)
    else:
        save_baseline(model, path)


# --------------------------------------------------------------------------
# stage implementations shared by the subcommands and the pipeline


def do_synth(n, seed, noise, output):
    write_trace_csv(generate_synthetic_trace(n, seed, noise=noise), output)


def do_preprocess(trace, output, config, encoders_out=None, encoders_in=None):
    parsed = parse_trace_file(trace, config)
    for err in parsed.skipped:
        print(f"{parsed.source}: line {err.line}: skipped ({err.message})", file=sys.stderr)
    if not parsed.records:
        raise UtilcastError(f"{parsed.source}: no usable rows")
    encoders = read_encoders(encoders_in) if encoders_in else None
    result = preprocess(parsed.records, config, encoders)
    write_records(result.rows, output)
    if encoders_out:
        write_encoders(result.encoders, encoders_out)
    return parsed.skip_count


def do_split(records_path, target, leakage, test_fraction, seed, train_out, test_out):
    matrix = build_feature_matrix(read_records(records_path), target, leakage)
    split = train_test_split(matrix, test_fraction, seed)
    write_matrix(matrix.take(split.train), train_out)
    write_matrix(matrix.take(split.test), test_out)


def do_correlate(matrix_path, output):
    m = read_matrix(matrix_path)
    corr = correlation_matrix(m)
    with open(output, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["feature"] + list(m.column_names))
        for name, row in zip(m.column_names, corr):
            writer.writerow([name] + [repr(float(v)) for v in row])


def do_prune(matrix_path, threshold, output):
    m = read_matrix(matrix_path)
    pruned = prune_correlated(m, threshold)
    write_matrix(pruned, output)
    return [c for c in m.column_names if c not in pruned.column_names]


def do_tune(matrix_path, samples, folds, seed, n_jobs, report):
    m = read_matrix(matrix_path)
    result = randomized_search(m, grid=ParamGrid(), n_samples=samples, k=folds, seed=seed, n_jobs=n_jobs)
    write_report(result, report)
    return result


def _forest_config(args_like, seed, tuned=None):
    base = ForestConfig(seed=seed)
    if tuned:
        with open(tuned, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        best = doc.get("best", doc)
        base = replace(ForestConfig.from_dict(best), seed=seed)
    overrides = {k: v for k, v in args_like.items() if v is not None}
    return replace(base, **overrides)


def do_train(kind, matrix_path, output, seed, n_jobs, forest_overrides=None, tuned=None, gbt=None):
    m = read_matrix(matrix_path)
    if kind == "forest":
        config = _forest_config(forest_overrides or {}, seed, tuned)
        model = fit_forest(m, config=config, n_jobs=n_jobs)
    elif kind == "linear":
        config = {}
        model = fit_linear(m)
    elif kind == "gbt":
        config = gbt or GBTConfig()
        model = fit_gbt(m, config=config)
    else:
        raise UsageError(f"unknown model kind {kind!r}")
    _save_any(model, output)
    return model, config


def do_evaluate(model_path, matrix_path, out_dir, bin_feature, edges):
    model = load_any_model(model_path)
    m = read_matrix(matrix_path)
    predicted = _predict_any(model, m)
    report = evaluate(m.target, predicted)
    bins = None
    if bin_feature:
        bins = error_by_bin(m.target, predicted, m.column(bin_feature), edges, bin_feature)
    rows = _model_rows(model, m)
    corr = correlation_matrix(rows) if rows.rows >= 2 else None
    paths = export_report(report, bins, corr, out_dir, rows.column_names)
    return report, paths


def do_predict(model_path, matrix_path, output, alpha):
    model = load_any_model(model_path)
    m = read_matrix(matrix_path)
    with open(output, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if isinstance(model, RandomForestModel):
            point, lo, hi, conf = predict_intervals(model, _model_rows(model, m), alpha)
            writer.writerow(["point", "lo", "hi", "confidence"])
            for row in zip(point, lo, hi, conf):
                writer.writerow([repr(float(v)) for v in row])
        else:
            writer.writerow(["point"])
            for v in _predict_any(model, m):
                writer.writerow([repr(float(v))])


def do_advise(model_path, matrix_path, requested_col, policy):
    model = load_any_model(model_path)
    if not isinstance(model, RandomForestModel):
        raise UtilcastError("advice needs a forest model (intervals come from its trees)")
    m = read_matrix(matrix_path)
    requested = m.column(requested_col)
    advice, summary = batch_advise(model, _model_rows(model, m), requested, policy)
    return format_advice(advice, summary), summary


# --------------------------------------------------------------------------
# argument parsing


def _edges(text):
    try:
        edges = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bin edges must be comma-separated numbers: {text!r}") from None
    if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise argparse.ArgumentTypeError(f"bin edges must be strictly increasing, at least two: {text!r}")
    return edges


def _names(text):
    return tuple(c.strip() for c in text.split(",") if c.strip())


def _depth(text):
    return None if text.lower() in ("none", "") else int(text)


def build_parser():
    p = _Parser(prog="utilcast", description="Cluster-job utilization prediction and provisioning advice.")
    p.add_argument("--version", action="version", version=f"utilcast {__version__}")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("synth", help="write a synthetic trace CSV")
    s.add_argument("--n", type=int, default=5000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noise", type=float, default=0.08)
    s.add_argument("--output", required=True)

    s = sub.add_parser("preprocess", help="clean a trace file into flat JSON-lines records")
    s.add_argument("--input", required=True)
    s.add_argument("--output", required=True)
    s.add_argument("--encoders", help="write the fitted frequency encoders here")
    s.add_argument("--apply-encoders", help="reuse encoders from an earlier run")
    s.add_argument("--cardinality-threshold", type=int, default=32)
    s.add_argument("--drop", type=_names, help="comma-separated columns to drop (default: the standard drop list)")
    s.add_argument("--missing-fill", type=float, default=0.0)

    s = sub.add_parser("split", help="build a feature matrix and split it into train/test")
    s.add_argument("--input", required=True)
    s.add_argument("--target", default=DEFAULT_TARGET)
    s.add_argument("--leakage", choices=LEAKAGE_POLICIES, default="exclude-siblings")
    s.add_argument("--test-fraction", type=float, default=0.2)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--train", required=True)
    s.add_argument("--test", required=True)

    s = sub.add_parser("correlate", help="write the feature correlation grid")
    s.add_argument("--input", required=True)
    s.add_argument("--output", required=True)

    s = sub.add_parser("prune", help="drop features highly correlated with earlier ones")
    s.add_argument("--input", required=True)
    s.add_argument("--output", required=True)
    s.add_argument("--threshold", type=float, default=0.95)

    s = sub.add_parser("tune", help="randomized search over the forest grid")
    s.add_argument("--input", required=True)
    s.add_argument("--report", required=True)
    s.add_argument("--samples", type=int, default=20)
    s.add_argument("--folds", type=int, default=3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--n-jobs", type=int, default=1)

    s = sub.add_parser("train", help="fit a forest or a baseline model")
    s.add_argument("--model", choices=("forest", "linear", "gbt"), default="forest")
    s.add_argument("--input", required=True)
    s.add_argument("--output", "--model-out", dest="output", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--n-jobs", type=int, default=1)
    s.add_argument("--config", "--tuned", dest="tuned", help="forest config JSON or tuning report (its best config)")
    s.add_argument("--n-estimators", type=int)
    s.add_argument("--max-depth", type=_depth)
    s.add_argument("--min-samples-split", type=int)
    s.add_argument("--min-samples-leaf", type=int)
    s.add_argument("--rounds", type=int, default=100, help="gbt only")
    s.add_argument("--learning-rate", type=float, default=0.1, help="gbt only")
    s.add_argument("--gbt-depth", type=_depth, default=3, help="gbt only")

    s = sub.add_parser("evaluate", help="score a model and write report files")
    s.add_argument("--model", required=True)
    s.add_argument("--input", required=True)
    s.add_argument("--report-dir", "--output-dir", dest="output_dir", required=True)
    s.add_argument("--bin-feature", default="resource_request_cpus")
    s.add_argument("--bins", "--bin-edges", dest="bin_edges", type=_edges, default=DEFAULT_BIN_EDGES)

    s = sub.add_parser("predict", help="point predictions (and intervals for forests)")
    s.add_argument("--model", required=True)
    s.add_argument("--input", required=True)
    s.add_argument("--output", required=True)
    s.add_argument("--alpha", type=float, default=0.1)

    s = sub.add_parser("advise", help="per-job provisioning advice")
    s.add_argument("--model", required=True)
    s.add_argument("--input", required=True)
    s.add_argument("--requested-col", default="resource_request_cpus")
    s.add_argument("--alpha", type=float, default=0.1)
    s.add_argument("--headroom", type=float, default=0.0)
    s.add_argument("--risk-tolerance", type=float, default=0.1)
    s.add_argument("--granularity", type=float, default=1.0)
    s.add_argument("--output", help="write the records here instead of stdout")

    s = sub.add_parser("savings", help="units saved by a fractional reduction")
    s.add_argument("--cores", type=float, required=True)
    s.add_argument("--reduction", type=float, required=True)

    s = sub.add_parser("pipeline", help="run every stage from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--output-dir", required=True)
    s.add_argument("--n-jobs", type=int, default=1)
    return p


# --------------------------------------------------------------------------
# commands


def cmd_synth(a, t0):
    do_synth(a.n, a.seed, a.noise, a.output)
    write_manifest(_manifest_for(a.output), "synth", a.seed, {"n": a.n, "noise": a.noise}, [], [a.output], t0)


def cmd_preprocess(a, t0):
    config = PreprocessConfig(low_cardinality_threshold=a.cardinality_threshold, missing_fill=a.missing_fill)
    if a.drop is not None:
        config.drop_columns = a.drop
    skipped = do_preprocess(a.input, a.output, config, a.encoders, a.apply_encoders)
    settings = {
        "low_cardinality_threshold": a.cardinality_threshold,
        "missing_fill": a.missing_fill,
        "drop_columns": list(config.drop_columns),
        "skipped": skipped,
    }
    write_manifest(
        _manifest_for(a.output), "preprocess", None, settings,
        [a.input, a.apply_encoders], [a.output, a.encoders], t0,
    )


def cmd_split(a, t0):
    do_split(a.input, a.target, a.leakage, a.test_fraction, a.seed, a.train, a.test)
    settings = {"target": a.target, "leakage": a.leakage, "test_fraction": a.test_fraction}
    write_manifest(_manifest_for(a.train), "split", a.seed, settings, [a.input], [a.train, a.test], t0)


def cmd_correlate(a, t0):
    do_correlate(a.input, a.output)
    write_manifest(_manifest_for(a.output), "correlate", None, {}, [a.input], [a.output], t0)


def cmd_prune(a, t0):
    dropped = do_prune(a.input, a.threshold, a.output)
    for name in dropped:
        print(f"dropped {name}", file=sys.stderr)
    settings = {"threshold": a.threshold, "dropped": dropped}
    write_manifest(_manifest_for(a.output), "prune", None, settings, [a.input], [a.output], t0)


def cmd_tune(a, t0):
    result = do_tune(a.input, a.samples, a.folds, a.seed, a.n_jobs, a.report)
    print(format_table(result))
    settings = {"samples": a.samples, "folds": a.folds}
    write_manifest(_manifest_for(a.report), "tune", a.seed, settings, [a.input], [a.report], t0)


def cmd_train(a, t0):
    overrides = {
        "n_estimators": a.n_estimators,
        "max_depth": a.max_depth,
        "min_samples_split": a.min_samples_split,
        "min_samples_leaf": a.min_samples_leaf,
    }
    gbt = GBTConfig(a.rounds, a.learning_rate, a.gbt_depth)
    _, config = do_train(a.model, a.input, a.output, a.seed, a.n_jobs, overrides, a.tuned, gbt)
    settings = {"model": a.model, "config": getattr(config, "__dict__", config)}
    write_manifest(_manifest_for(a.output), "train", a.seed, settings, [a.input, a.tuned], [a.output], t0)


def cmd_evaluate(a, t0):
    report, paths = do_evaluate(a.model, a.input, a.output_dir, a.bin_feature, a.bin_edges)
    print(f"mae={report.mae!r} rmse={report.rmse!r} r2={report.r2!r} n={report.n}")
    settings = {"bin_feature": a.bin_feature, "bin_edges": list(a.bin_edges)}
    write_manifest(
        os.path.join(a.output_dir, "manifest.json"), "evaluate", None, settings,
        [a.model, a.input], sorted(paths.values()), t0,
    )


def cmd_predict(a, t0):
    do_predict(a.model, a.input, a.output, a.alpha)
    write_manifest(_manifest_for(a.output), "predict", None, {"alpha": a.alpha}, [a.model, a.input], [a.output], t0)


def _policy(section):
    return AdvicePolicy(
        alpha=float(section.get("alpha", 0.1)),
        headroom=float(section.get("headroom", 0.0)),
        risk_tolerance=float(section.get("risk_tolerance", 0.1)),
        granularity=float(section.get("granularity", 1.0)),
    )


def cmd_advise(a, t0):
    policy = AdvicePolicy(a.alpha, a.headroom, a.risk_tolerance, a.granularity)
    text, _ = do_advise(a.model, a.input, a.requested_col, policy)
    if a.output:
        with open(a.output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        settings = {"requested_col": a.requested_col, "policy": policy.__dict__}
        write_manifest(_manifest_for(a.output), "advise", None, settings, [a.model, a.input], [a.output], t0)
    else:
        print(text)


def cmd_savings(a, t0):
    est = estimate_savings(a.cores, a.reduction)
    print(f"cluster_units={est.cluster_units!r} reduction_fraction={est.reduction_fraction!r} "
          f"saved_units={est.saved_units!r}")


# --------------------------------------------------------------------------
# pipeline


def read_pipeline_config(path):
    """Parse the INI pipeline config; every stage needs its own section."""
    cp = configparser.ConfigParser(interpolation=None)
    if not cp.read(path, encoding="utf-8"):
        raise FileNotFoundError(f"config file not found: {path}")
    for stage in PIPELINE_STAGES:
        if not cp.has_section(stage):
            raise UsageError(f"{path}: config is missing the [{stage}] stage")
    if not cp.has_option("pipeline", "seed"):
        raise UsageError(f"{path}: config needs a [pipeline] section with a master seed")
    return cp


def run_pipeline(config_path, out_dir, n_jobs=1):
    cp = read_pipeline_config(config_path)
    master = cp.getint("pipeline", "seed")
    try:
        edges = _edges(cp["evaluate"].get("bin_edges", ",".join(str(e) for e in DEFAULT_BIN_EDGES)))
    except argparse.ArgumentTypeError as exc:
        raise UsageError(f"{config_path}: [evaluate] {exc}") from None
    os.makedirs(out_dir, exist_ok=True)
    path = lambda name: os.path.join(out_dir, name)  # noqa: E731

    def stage(name, settings, inputs, outputs, work):
        t0 = time.perf_counter()
        seed = stage_seed(master, name)
        print(f"[{name}] seed={seed}", file=sys.stderr)
        extra = work(seed)
        if isinstance(extra, dict):
            settings = {**settings, **extra}
        write_manifest(path(f"manifest-{name}.json"), name, seed, settings, inputs, outputs, t0)

    sy = cp["synth"]
    trace = sy.get("trace", "").strip()
    if trace:
        stage("synth", {"trace": trace}, [trace], [], lambda seed: None)
    else:
        trace = path("trace.csv")
        n, noise = sy.getint("n", 2000), sy.getfloat("noise", 0.08)
        stage("synth", {"n": n, "noise": noise}, [], [trace], lambda seed: do_synth(n, seed, noise, trace))

    pp = cp["preprocess"]
    pconf = PreprocessConfig(
        low_cardinality_threshold=pp.getint("low_cardinality_threshold", 32),
        missing_fill=pp.getfloat("missing_fill", 0.0),
    )
    stage(
        "preprocess", {"low_cardinality_threshold": pconf.low_cardinality_threshold, "missing_fill": pconf.missing_fill},
        [trace], [path("records.jsonl"), path("encoders.json")],
        lambda seed: do_preprocess(trace, path("records.jsonl"), pconf, path("encoders.json")),
    )

    sp = cp["split"]
    target = sp.get("target", DEFAULT_TARGET)
    leakage = sp.get("leakage", "exclude-siblings")
    fraction = sp.getfloat("test_fraction", 0.2)
    threshold = sp.getfloat("prune_threshold", 0.95)

    def split_work(seed):
        do_split(path("records.jsonl"), target, leakage, fraction, seed, path("train_full.csv"), path("test.csv"))
        do_prune(path("train_full.csv"), threshold, path("train.csv"))

    stage(
        "split", {"target": target, "leakage": leakage, "test_fraction": fraction, "prune_threshold": threshold},
        [path("records.jsonl")], [path("train_full.csv"), path("train.csv"), path("test.csv")], split_work,
    )

    tu = cp["tune"]
    samples, folds = tu.getint("samples", 20), tu.getint("folds", 3)
    stage(
        "tune", {"samples": samples, "folds": folds}, [path("train.csv")], [path("tuning.json")],
        lambda seed: do_tune(path("train.csv"), samples, folds, seed, n_jobs, path("tuning.json")),
    )

    tr = cp["train"]
    kind = tr.get("model", "forest")
    overrides = {}
    for key in ("n_estimators", "min_samples_split", "min_samples_leaf"):
        if tr.get(key, "").strip():
            overrides[key] = tr.getint(key)
    if tr.get("max_depth", "").strip():
        overrides["max_depth"] = _depth(tr.get("max_depth"))
    def train_work(seed):
        _, config = do_train(kind, path("train.csv"), path("model.json"), seed, n_jobs, overrides, path("tuning.json"))
        return {"resolved": getattr(config, "__dict__", config)}

    stage(
        "train", {"model": kind, "overrides": overrides}, [path("train.csv"), path("tuning.json")],
        [path("model.json")], train_work,
    )

    ev = cp["evaluate"]
    bin_feature = ev.get("bin_feature", "resource_request_cpus")
    report_dir = path("report")
    holder = {}

    def eval_work(seed):
        holder["report"], holder["paths"] = do_evaluate(path("model.json"), path("test.csv"), report_dir, bin_feature, edges)

    stage("evaluate", {"bin_feature": bin_feature, "bin_edges": list(edges)}, [path("model.json"), path("test.csv")],
          [os.path.join(report_dir, f) for f in ("metrics.csv", "parity.csv", "residuals.csv", "bins.csv", "correlation.csv")],
          eval_work)

    ad = cp["advise"]
    policy = _policy(ad)
    requested_col = ad.get("requested_col", "resource_request_cpus")
    cluster_units = ad.getfloat("cluster_units", 10000.0)

    def advise_work(seed):
        # baselines have no prediction intervals to advise from
        if kind != "forest":
            print(f"[advise] skipped: needs a forest, got {kind}", file=sys.stderr)
            return {"skipped": f"model is {kind}"}
        text, summary = do_advise(path("model.json"), path("test.csv"), requested_col, policy)
        with open(path("advice.txt"), "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        holder["summary"] = summary

    stage("advise", {"requested_col": requested_col, "policy": policy.__dict__}, [path("model.json"), path("test.csv")],
          [path("advice.txt")], advise_work)

    report = holder["report"]
    lines = [
        f"model={kind}",
        f"mae={report.mae!r}",
        f"rmse={report.rmse!r}",
        f"r2={report.r2!r}",
        f"n={report.n}",
    ]
    summary = holder.get("summary")
    if summary is not None:
        fraction = min(1.0, max(0.0, summary.reduction_fraction))
        savings = estimate_savings(cluster_units, fraction)
        lines += [
            f"jobs_advised={summary.n}",
            f"reduction_fraction={summary.reduction_fraction!r}",
            f"risk_count={summary.risk_count}",
            f"cluster_units={savings.cluster_units!r}",
            f"saved_units={savings.saved_units!r}",
        ]
    with open(path("summary.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))


def cmd_pipeline(a, t0):
    run_pipeline(a.config, a.output_dir, a.n_jobs)


COMMANDS = {
    "synth": cmd_synth,
    "preprocess": cmd_preprocess,
    "split": cmd_split,
    "correlate": cmd_correlate,
    "prune": cmd_prune,
    "tune": cmd_tune,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "predict": cmd_predict,
    "advise": cmd_advise,
    "savings": cmd_savings,
    "pipeline": cmd_pipeline,
}


def run(argv=None):
    """Run one command; returns the process exit code."""
    try:
        args = build_parser().parse_args(argv)
        t0 = time.perf_counter()
        COMMANDS[args.command](args, t0)
        return EXIT_OK
    except SystemExit as exc:  # --help and --version
        return exc.code or EXIT_OK
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        name = exc.filename or str(exc)
        print(f"error: file not found: {name}", file=sys.stderr)
        return EXIT_DATA
    except (UtilcastError, ValueError, KeyError, OSError, csv.Error, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - last resort
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
