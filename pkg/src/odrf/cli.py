"""Command-line interface: ``odrf {train,predict,evaluate,benchmark,diagnose,stats}``.

Machine-readable artifacts go to files; a one-line human summary goes to
stdout. Exit codes are listed in :data:`EXIT_CODES`.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from . import diagnostics, stats
from .data import DataError, Dataset, load_dataset
from .forest import (
    FeatureMismatch,
    Forest,
    ForestConfig,
    ModelFormatError,
    confusion_matrix,
    default_workers,
    dumps_forest,
    evaluate,
    load_forest,
    predict_forest_batch,
    train_forest,
)
from .tree import VARIANTS, TreeConfig, UnknownVariant, normalize_variant

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_UNKNOWN_VARIANT = 3
EXIT_DATA = 4
EXIT_WRITE = 5
EXIT_MISMATCH = 6
EXIT_MODEL = 7
EXIT_PRECONDITION = 8
EXIT_BENCHMARK_FAILED = 9
EXIT_DEGENERATE = 10

EXIT_CODES = {
    EXIT_OK: "success",
    EXIT_USAGE: "bad command-line usage",
    EXIT_UNKNOWN_VARIANT: "unknown variant name",
    EXIT_DATA: "unreadable or invalid data file",
    EXIT_WRITE: "output could not be written",
    EXIT_MISMATCH: "feature count of data does not match the model",
    EXIT_MODEL: "unreadable or invalid model file",
    EXIT_PRECONDITION: "diagnostic precondition failed (e.g. fewer than two trees)",
    EXIT_BENCHMARK_FAILED: "benchmark finished with failed runs",
    EXIT_DEGENERATE: "statistic undefined for the given input",
}


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _write(path, text):
    try:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        with p.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(EXIT_WRITE, f"cannot write {path}: {exc}") from exc


def _emit(text, out):
    if out:
        _write(out, text)
    else:
        sys.stdout.write(text)


def _load_data(path, label_column="last", class_names=None) -> Dataset:
    try:
        return load_dataset(path, label_column, class_names)
    except DataError as exc:
        raise CliError(EXIT_DATA, str(exc)) from exc


def _load_model(path) -> Forest:
    try:
        return load_forest(path)
    except (OSError, ModelFormatError, ValueError) as exc:
        raise CliError(EXIT_MODEL, f"cannot load model {path}: {exc}") from exc


def _variant(name) -> str:
    try:
        return normalize_variant(name)
    except UnknownVariant as exc:
        raise CliError(EXIT_UNKNOWN_VARIANT, str(exc)) from exc


def _forest_config(variant, trees=50, mtry=None, minleaf=1, seed=0, routing="proximity",
                   fallback="node") -> ForestConfig:
    try:
        tc = TreeConfig(_variant(variant), mtry=mtry, minleaf=minleaf, routing=routing,
                        fallback=fallback)
        return ForestConfig(tc, n_trees=trees, master_seed=seed)
    except UnknownVariant as exc:
        raise CliError(EXIT_UNKNOWN_VARIANT, str(exc)) from exc
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from exc


def _mtry(value):
    if value in (None, "auto"):
        return None
    return int(value)


def _read_features(path, forest: Forest, label_column="last") -> np.ndarray:
    """Feature matrix for prediction; a label column is dropped when present."""
    try:
        with Path(path).open(newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise CliError(EXIT_DATA, f"cannot read {path}: {exc}") from exc
    if len(rows) < 2:
        raise CliError(EXIT_DATA, f"{path}: no data rows")
    header = [h.strip() for h in rows[0]]
    n = forest.n_features
    if len(header) == n:
        keep = list(range(n))
    elif len(header) == n + 1:
        drop = len(header) - 1 if label_column == "last" else (
            header.index(label_column) if label_column in header else len(header) - 1)
        keep = [j for j in range(len(header)) if j != drop]
    else:
        raise CliError(EXIT_MISMATCH, f"model expects {n} features, {path} has {len(header)} columns")
    try:
        X = np.array([[float(r[j]) for j in keep] for r in rows[1:]])
    except (ValueError, IndexError) as exc:
        raise CliError(EXIT_DATA, f"{path}: non-numeric or missing feature cell ({exc})") from exc
    if not np.all(np.isfinite(X)):
        raise CliError(EXIT_DATA, f"{path}: non-finite feature cell")
    return X


# -- commands ----------------------------------------------------------------

def cmd_train(args):
    config = _forest_config(args.variant, args.trees, _mtry(args.mtry), args.minleaf, args.seed,
                            args.routing, args.fallback)
    data = _load_data(args.data, args.label_column)
    start = time.perf_counter()
    forest = train_forest(data, config, args.workers)
    elapsed = time.perf_counter() - start
    _write(args.out, dumps_forest(forest))
    acc, _ = evaluate(forest, data)
    profile = diagnostics.node_profile(forest)
    print(f"variant={config.tree_config.variant} trees={config.n_trees} train_accuracy={acc:.4f} "
          f"mean_nodes={profile.mean:.2f} time={elapsed:.2f}s -> {args.out}")
    return EXIT_OK


def cmd_predict(args):
    forest = _load_model(args.model)
    X = _read_features(args.data, forest, args.label_column)
    preds = predict_forest_batch(forest, X)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row_index", "predicted_label"])
    for i, k in enumerate(preds):
        w.writerow([i, forest.class_names[k]])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_evaluate(args):
    forest = _load_model(args.model)
    data = _load_data(args.data, args.label_column, forest.class_names)
    if data.n_features != forest.n_features:
        raise CliError(EXIT_MISMATCH,
                       f"model expects {forest.n_features} features, data has {data.n_features}")
    acc, preds = evaluate(forest, data)
    report = {
        "accuracy": acc,
        "n_samples": data.n_samples,
        "labels": list(forest.class_names),
        "confusion_matrix": confusion_matrix(data.labels, preds, forest.n_classes).tolist(),
    }
    text = json.dumps(report, indent=2) + "\n"
    if args.out:
        _write(args.out, text)
        print(f"accuracy={acc:.4f} n={data.n_samples} -> {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _benchmark_run(job):
    name, variant, train_path, test_path, cfg = job
    try:
        train = load_dataset(train_path)
        test = load_dataset(test_path, class_names=train.class_names)
        config = _forest_config(variant, cfg["trees"], cfg["mtry"], cfg["minleaf"], cfg["seed"],
                                cfg["routing"], cfg["fallback"])
        start = time.perf_counter()
        forest = train_forest(train, config, 1)
        elapsed = time.perf_counter() - start
        acc, _ = evaluate(forest, test)
        return {"dataset": name, "variant": variant, "accuracy": acc, "time": elapsed,
                "mean_nodes": diagnostics.node_profile(forest).mean,
                "model": dumps_forest(forest), "error": None}
    except Exception as exc:  # a failed run is recorded, the benchmark continues
        return {"dataset": name, "variant": variant, "error": f"{type(exc).__name__}: {exc}"}


def _read_manifest(path):
    path = Path(path)
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(EXIT_DATA, f"cannot read manifest {path}: {exc}") from exc
    base = path.parent
    try:
        datasets = [(d["name"], str(base / d["train"]), str(base / d["test"])) for d in manifest["datasets"]]
        variants = [_variant(v) for v in manifest.get("variants", list(VARIANTS))]
    except (KeyError, TypeError) as exc:
        raise CliError(EXIT_DATA, f"malformed manifest: {exc}") from exc
    names = [d[0] for d in datasets]
    if len(set(names)) != len(names):
        raise CliError(EXIT_DATA, "dataset names in the manifest must be distinct")
    if len({p for d in datasets for p in d[1:]}) != 2 * len(datasets):
        raise CliError(EXIT_DATA, "dataset paths in the manifest must be distinct")
    c = manifest.get("config", {})
    cfg = {"trees": int(c.get("trees", 50)), "mtry": _mtry(c.get("mtry")),
           "minleaf": int(c.get("minleaf", 1)), "seed": int(c.get("seed", 0)),
           "routing": c.get("routing", "proximity"), "fallback": c.get("fallback", "node")}
    out = manifest.get("output_dir", "benchmark_out")
    return datasets, variants, cfg, str(base / out), bool(manifest.get("save_models", True))


def _csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x):
    return "" if x is None else repr(float(x))


def cmd_benchmark(args):
    datasets, variants, cfg, out_dir, save_models = _read_manifest(args.manifest)
    if args.out_dir:
        out_dir = args.out_dir
    for key in ("trees", "minleaf", "seed"):
        if getattr(args, key) is not None:
            cfg[key] = getattr(args, key)
    jobs = [(name, v, tr, te, cfg) for name, tr, te in datasets for v in variants]
    workers = args.workers or default_workers()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_benchmark_run, jobs))
    else:
        results = [_benchmark_run(j) for j in jobs]
    by_key = {(r["dataset"], r["variant"]): r for r in results}
    out = Path(out_dir)

    acc_rows = [["dataset", *variants]]
    node_rows = [["dataset", *variants]]
    time_rows = [["dataset", *variants]]
    for name, _, _ in datasets:
        runs = [by_key[name, v] for v in variants]
        acc_rows.append([name, *(_fmt(r.get("accuracy")) for r in runs)])
        node_rows.append([name, *(_fmt(r.get("mean_nodes")) for r in runs)])
        time_rows.append([name, *(f"{r['time']:.3f}" if r.get("time") is not None else "" for r in runs)])
    avg_time = []
    for v in variants:
        t = [by_key[n, v]["time"] for n, _, _ in datasets if by_key[n, v].get("time") is not None]
        avg_time.append(f"{np.mean(t):.3f}" if t else "")
    time_rows.append(["average", *avg_time])
    _write(out / "accuracy.csv", _csv(acc_rows))
    _write(out / "nodes.csv", _csv(node_rows))
    _write(out / "timing.csv", _csv(time_rows))

    failed = [r for r in results if r["error"]]
    complete = [name for name, _, _ in datasets if all(by_key[name, v]["error"] is None for v in variants)]
    overall = [["variant", "rank", "average_rank", "average_accuracy"]]
    if complete:
        A = np.array([[by_key[n, v]["accuracy"] for v in variants] for n in complete])
        avg_rank = rankdata(-A, method="average", axis=1).mean(axis=0)
        order = np.argsort(avg_rank, kind="stable")
        for pos, j in enumerate(order, start=1):
            overall.append([variants[j], pos, repr(float(avg_rank[j])), repr(float(A[:, j].mean()))])
    _write(out / "overall.csv", _csv(overall))
    if save_models:
        for r in results:
            if r["error"] is None:
                _write(out / "models" / f"{r['dataset']}__{r['variant']}.json", r["model"])
    if failed:
        _write(out / "failures.csv", _csv([["dataset", "variant", "error"]] +
                                         [[r["dataset"], r["variant"], r["error"]] for r in failed]))
        print(f"benchmark: {len(failed)} of {len(results)} runs failed; see {out / 'failures.csv'}")
        return EXIT_BENCHMARK_FAILED
    print(f"benchmark: {len(datasets)} datasets x {len(variants)} variants -> {out}")
    return EXIT_OK


def cmd_diagnose(args):
    if args.diag == "kappa":
        forest = _load_model(args.model)
        if len(forest.trees) < 2:
            raise CliError(EXIT_PRECONDITION, "kappa-error diagram needs a model with at least two trees")
        data = _load_data(args.data, args.label_column, forest.class_names)
        if data.n_features != forest.n_features:
            raise CliError(EXIT_MISMATCH, "feature count of data does not match the model")
        diagram = diagnostics.kappa_error_diagram(forest, data)
        _emit(diagnostics.format_kappa_csv(diagram), args.out)
        if args.out:
            print(f"kappa-error: {len(diagram.points)} pairs, centroid kappa={diagram.centroid[0]:.4f} "
                  f"error={diagram.centroid[1]:.4f} -> {args.out}")
        return EXIT_OK
    if args.diag == "biasvar":
        config = _forest_config(args.variant, args.trees, _mtry(args.mtry), args.minleaf, args.seed,
                                args.routing, args.fallback)
        if args.repeats < 2:
            raise CliError(EXIT_PRECONDITION, "--repeats must be at least 2")
        train = _load_data(args.train, args.label_column)
        test = _load_data(args.test, args.label_column, train.class_names)
        if test.n_features != train.n_features:
            raise CliError(EXIT_MISMATCH, "train and test feature counts differ")
        report = diagnostics.bias_variance(train, test, config, args.repeats, args.seed, args.workers)
        _emit(diagnostics.format_bias_variance(report), args.out)
        return EXIT_OK
    # nodes
    rows = [["model", "mean_nodes", "min_nodes", "max_nodes", "mean_depth", "max_depth"]]
    for path in args.model:
        forest = _load_model(path)
        p = diagnostics.node_profile(forest)
        rows.append([Path(path).stem, repr(p.mean), p.min, p.max, repr(p.mean_depth), p.max_depth])
    _emit(_csv(rows), args.out)
    return EXIT_OK


def cmd_stats(args):
    try:
        if args.stat == "signtest":
            verdict = stats.sign_test(args.wins, args.ties, args.losses, args.alpha, args.n)
            n = args.n if args.n is not None else args.wins + args.ties + args.losses
            text = {
                "row_better": "row significantly better",
                "column_better": "column significantly better",
                "no_difference": "no significant difference",
            }[verdict]
            report = {"verdict": verdict, "threshold": stats.sign_test_threshold(n, args.alpha),
                      "adjusted_wins": args.wins + args.ties // 2,
                      "adjusted_losses": args.losses + args.ties // 2}
            if args.out:
                _write(args.out, json.dumps(report, indent=2) + "\n")
            print(text)
            return EXIT_OK
        if args.stat == "nemenyi" and args.table is None and args.avg_ranks is None:
            if args.k is None or args.n is None:
                raise CliError(EXIT_USAGE, "nemenyi needs --k and --n, or a rank source")
            q = args.q_alpha if args.q_alpha is not None else stats.q_alpha_for(args.k)
            cd = stats.nemenyi_cd(args.k, args.n, q)
            _emit(json.dumps({"k": args.k, "n": args.n, "q_alpha": q, "cd": cd}, indent=2) + "\n", args.out)
            return EXIT_OK
        if args.table is not None:
            try:
                text = Path(args.table).read_text(encoding="utf-8")
            except OSError as exc:
                raise CliError(EXIT_DATA, f"cannot read {args.table}: {exc}") from exc
            names, _, scores = stats.read_score_table(text)
            report = stats.friedman(stats.rank_accuracies(scores, names, not args.lower_is_better),
                                    args.q_alpha)
        elif args.avg_ranks is not None:
            if args.n is None:
                raise CliError(EXIT_USAGE, "--avg-ranks needs --n (number of datasets)")
            ranks = [float(x) for x in args.avg_ranks.split(",")]
            names = args.names.split(",") if args.names else None
            report = stats.friedman_from_ranks(ranks, args.n, names, args.q_alpha)
        else:
            raise CliError(EXIT_USAGE, "give --table or --avg-ranks")
    except stats.DegenerateStatistic as exc:
        raise CliError(EXIT_DEGENERATE, str(exc)) from exc
    except ValueError as exc:
        raise CliError(EXIT_DATA, str(exc)) from exc
    _emit(json.dumps(report.to_dict(), indent=2) + "\n", args.out)
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def _add_forest_flags(p):
    p.add_argument("--variant", required=True, help=f"one of: {', '.join(VARIANTS)}")
    p.add_argument("--trees", type=int, default=50)
    p.add_argument("--mtry", default="auto", help="features per node, or 'auto' for round(sqrt(n))")
    p.add_argument("--minleaf", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--routing", choices=["proximity", "bisector"], default="proximity")
    p.add_argument("--fallback", choices=["node", "subtree"], default="node")
    p.add_argument("--workers", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="odrf", description="Oblique and rotation double random forests.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a forest and write a model file")
    p.add_argument("--data", required=True)
    p.add_argument("--label-column", default="last")
    p.add_argument("--out", default="model.json")
    _add_forest_flags(p)
    p.set_defaults(func=cmd_train)

    for name, func in (("predict", cmd_predict), ("evaluate", cmd_evaluate)):
        p = sub.add_parser(name)
        p.add_argument("--model", required=True)
        p.add_argument("--data", required=True)
        p.add_argument("--label-column", default="last")
        p.add_argument("--out")
        p.set_defaults(func=func)

    p = sub.add_parser("benchmark", help="run every variant on every dataset of a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir")
    p.add_argument("--trees", type=int)
    p.add_argument("--minleaf", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("diagnose", help="kappa-error, bias/variance and node-count reports")
    dsub = p.add_subparsers(dest="diag", required=True)
    k = dsub.add_parser("kappa")
    k.add_argument("--model", required=True)
    k.add_argument("--data", required=True)
    k.add_argument("--label-column", default="last")
    k.add_argument("--out")
    b = dsub.add_parser("biasvar")
    b.add_argument("--train", required=True)
    b.add_argument("--test", required=True)
    b.add_argument("--label-column", default="last")
    b.add_argument("--repeats", type=int, default=10)
    b.add_argument("--out")
    _add_forest_flags(b)
    nd = dsub.add_parser("nodes")
    nd.add_argument("--model", required=True, nargs="+")
    nd.add_argument("--out")
    for q in (k, b, nd):
        q.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("stats", help="Friedman / Nemenyi / sign tests")
    ssub = p.add_subparsers(dest="stat", required=True)
    for name in ("friedman", "nemenyi"):
        s = ssub.add_parser(name)
        s.add_argument("--table", help="CSV score matrix: rows datasets, columns models")
        s.add_argument("--avg-ranks", help="comma-separated average ranks")
        s.add_argument("--names", help="comma-separated model names for --avg-ranks")
        s.add_argument("--n", type=int, help="number of datasets")
        s.add_argument("--k", type=int, help="number of models (nemenyi without ranks)")
        s.add_argument("--q-alpha", type=float)
        s.add_argument("--lower-is-better", action="store_true",
                       help="rank ascending (e.g. for bias or variance tables)")
        s.add_argument("--out")
        s.set_defaults(func=cmd_stats)
    s = ssub.add_parser("signtest")
    s.add_argument("--wins", type=int, required=True)
    s.add_argument("--ties", type=int, required=True)
    s.add_argument("--losses", type=int, required=True)
    s.add_argument("--n", type=int)
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--out")
    s.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except FeatureMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH


if __name__ == "__main__":
    sys.exit(main())
