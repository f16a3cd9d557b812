"""Command-line entry point: ``rsgslm <command> ...``.

Outputs go under ``<artifact root>/<dataset name>/``; the root defaults to
./artifacts and can be moved with RSGSLM_ARTIFACT_ROOT or --artifacts.
Nothing is ever written into the dataset directory.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 numerical failure.
"""

import argparse
import csv
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from rsgslm import __version__
from rsgslm.artifacts import MANIFEST, load_graphs, save_graphs
from rsgslm.config import config_hash, dump_config, load_config, load_synth_spec
from rsgslm.dataset import SplitSpec, generate_synthetic, load_dataset, make_split, normalize_columns, save_dataset
from rsgslm.errors import ConfigError, DatasetError, NumericalError
from rsgslm.gcn import GcnParams, concat_features, forward, propagation_operator
from rsgslm.io import (FLOAT_FMT, artifact_root, fingerprint_files, read_json, read_matrix, write_json,
                       write_matrix)
from rsgslm.trainer import (EpochRecord, prepare_graphs, run_ablation_suite, summarize, sweep_lambdas,
                            sweep_weight_range, train_baseline_multi, train_baseline_xstar, train_rsgslm,
                            gradient_check)

log = logging.getLogger("rsgslm")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
TRAIN_METHODS = ("rsgslm", "gcn-xstar", "gcn-multi")
GRAPH_KEYS = ("solver", "renode", "split.train_per_class", "split.val_per_class", "split.seed")
GRADCHECK_TOL = 1e-4
LOSS_FIELDS = [f.name for f in fields(EpochRecord)]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# ---------------------------------------------------------------- shared helpers

class Context:
    """Resolved dataset, config and output locations for one invocation."""

    def __init__(self, args):
        self.args = args
        self.run_config = load_config(args.config, args.set or ())
        if getattr(args, "runs", None) is not None:
            self.run_config = replace(self.run_config, runs=args.runs)
        self.config = self.run_config.train
        self.dataset_dir = Path(args.dataset).resolve()
        self.fixed_split = getattr(args, "split", None)
        if self.fixed_split is not None:
            self.run_config = replace(self.run_config, runs=1)
        self.dataset = load_dataset(self.dataset_dir, split=self.fixed_split)
        root = Path(args.artifacts) if args.artifacts else artifact_root()
        self.out = root / self.dataset.name

    @property
    def runs(self):
        return self.run_config.runs

    def fingerprint(self):
        files = sorted((self.dataset_dir / "views").glob("view_*.csv")) + [self.dataset_dir / "labels.csv"]
        if self.fixed_split is not None:
            files.append(self.dataset_dir / "splits" / f"{self.fixed_split}.csv")
        return fingerprint_files(files)

    def split_seeds(self):
        if self.fixed_split is not None:
            return [self.fixed_split]
        return [self.run_config.split.seed + r for r in range(self.runs)]

    def split(self, r):
        if self.fixed_split is not None:
            return self.dataset
        s = self.run_config.split
        return make_split(self.dataset, SplitSpec(s.train_per_class, s.val_per_class, s.seed + r))

    def graph_dir(self, r):
        tag = f"fixed-{self.fixed_split}" if self.fixed_split is not None else f"split_{r}"
        return self.out / "graphs" / tag

    def graph_hash(self, r):
        return config_hash(self.run_config, GRAPH_KEYS) + ":" + self.fingerprint() + f":{r}"

    def load_graphs(self, r):
        gdir = self.graph_dir(r)
        hint = f"run `rsgslm graphs {self.dataset_dir}` with the same config first"
        if not (gdir / MANIFEST).is_file():
            raise DatasetError(f"graph artifacts for split {r} not found in {gdir}; {hint}")
        if read_json(gdir / MANIFEST).get("hash") != self.graph_hash(r):
            raise DatasetError(f"graph artifacts in {gdir} were built from a different config or dataset; {hint}")
        return load_graphs(normalize_columns(self.dataset), gdir)

    def manifest(self, command, paths, extra=None):
        data = {
            "command": command,
            "config_hash": config_hash(self.run_config),
            "dataset": str(self.dataset_dir),
            "dataset_fingerprint": self.fingerprint(),
            "seeds": {"train": self.config.seed, "splits": self.split_seeds()},
            "artifacts": sorted(str(Path(p).relative_to(self.out)) for p in paths),
            "version": __version__,
        }
        data.update(extra or {})
        return data


def _write_csv(path, rows, columns):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row[k]) for k in columns})
    return path


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return FLOAT_FMT % value
    return value


def _write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


# ---------------------------------------------------------------- commands

def cmd_synth(args):
    spec = load_synth_spec(args.spec)
    out = Path(args.out)
    if out.exists() and any(out.iterdir()) and not args.force:
        raise DatasetError(f"{out} is not empty; pass --force to overwrite")
    save_dataset(generate_synthetic(spec), out)
    print(f"wrote {spec.num_views} views of {spec.n} rows to {out}")
    return EXIT_OK


def _ensure_graphs(ctx, r, force=False):
    gdir = ctx.graph_dir(r)
    h = ctx.graph_hash(r)
    if not force and (gdir / MANIFEST).is_file() and read_json(gdir / MANIFEST).get("hash") == h:
        log.info("split %d: graph artifacts up to date, skipping", r)
        return False
    graphs = prepare_graphs(ctx.split(r), ctx.config)
    paths = save_graphs(graphs, gdir)
    paths.append(gdir / MANIFEST)
    write_json(gdir / MANIFEST, ctx.manifest("graphs", paths, {
        "hash": h,
        "split_index": r,
        "alphas": graphs.fused.alphas,
        "objective_traces": [res.surrogate_objective_trace for res in graphs.view_results],
        "seconds": graphs.seconds,
    }))
    return True


def cmd_graphs(args):
    ctx = Context(args)
    built = sum(_ensure_graphs(ctx, r, force=args.force) for r in range(ctx.runs))
    print(f"graph artifacts: {built} built, {ctx.runs - built} up to date, under {ctx.out / 'graphs'}")
    return EXIT_OK


def _run_dir(ctx, method):
    return ctx.out / "runs" / f"{method}-{config_hash(ctx.run_config)[:12]}"


def _save_params(folder, params, suffix=""):
    write_matrix(folder / f"W0{suffix}.csv", params.W0)
    write_matrix(folder / f"W1{suffix}.csv", params.W1)
    return [folder / f"W0{suffix}.csv", folder / f"W1{suffix}.csv"]


def cmd_train(args):
    ctx = Context(args)
    method = args.method
    run_dir = _run_dir(ctx, method)
    paths, loss_rows, per_split, timings = [], [], [], []
    if method != "gcn-xstar":
        graph_sets = [ctx.load_graphs(r) for r in range(ctx.runs)]  # fail before writing anything
    for r in range(ctx.runs):
        if method == "gcn-xstar":
            result = train_baseline_xstar(ctx.split(r), ctx.config)
        else:
            graphs = graph_sets[r]
            if method == "rsgslm":
                result = train_rsgslm(graphs.dataset, graphs.fused, graphs.view_results, graphs.node_weights,
                                      ctx.config)
            else:
                result = train_baseline_multi(graphs.dataset, ctx.config, graphs)
        folder = run_dir / f"split_{r}"
        if isinstance(result.best_params, list):
            for v, p in enumerate(result.best_params):
                paths += _save_params(folder, p, f"_view{v}")
        else:
            paths += _save_params(folder, result.best_params)
        write_matrix(folder / "Z.csv", result.Z)
        paths.append(folder / "Z.csv")
        for rec in result.epoch_records:
            loss_rows.append({"split": r, **rec.__dict__})
        per_split.append({"split": r, "best_epoch": result.best_epoch, "epochs_ran": result.epochs_ran,
                          "val_acc": result.best_val_accuracy, "test_acc": result.test_accuracy})
        timings.append(result.seconds)
        log.info("split %d: test accuracy %.4f (best epoch %d)", r, result.test_accuracy, result.best_epoch)

    test = summarize([s["test_acc"] for s in per_split])
    val = summarize([s["val_acc"] for s in per_split])
    metrics = {
        "method": method,
        "runs": ctx.runs,
        "test_acc_mean": test["mean"],
        "test_acc_std": test["std"],
        "test_acc": test["summary"],
        "val_acc_mean": val["mean"],
        "val_acc_std": val["std"],
        "per_split": per_split,
    }
    paths.append(run_dir / "metrics.json")
    write_json(paths[-1], metrics)
    paths.append(_write_csv(run_dir / "losses.csv", loss_rows, ["split"] + LOSS_FIELDS))
    paths.append(_write_text(run_dir / "config.txt", dump_config(ctx.run_config)))
    # wall-clock numbers live apart so the other files are reproducible byte for byte
    paths.append(run_dir / "timings.json")
    write_json(paths[-1], timings)
    paths.append(run_dir / MANIFEST)
    write_json(paths[-1], ctx.manifest("train", paths, {
        "method": method,
        "runs": ctx.runs,
        "graph_dirs": [str(ctx.graph_dir(r)) for r in range(ctx.runs)] if method != "gcn-xstar" else [],
    }))
    print(f"{method}: test accuracy {test['summary']} over {ctx.runs} run(s); outputs in {run_dir}")
    return EXIT_OK


ABLATION_COLUMNS = ["row", "smooth", "pseudo", "renode", "oracle_pseudo", "seeds", "runs",
                    "test_acc_mean", "test_acc_std"]


def cmd_ablate(args):
    ctx = Context(args)
    per_split = []
    graph_sets = [ctx.load_graphs(r) for r in range(ctx.runs)]
    for r, graphs in enumerate(graph_sets):
        for row in run_ablation_suite(None, ctx.config, graphs):
            per_split.append({**row, "split": r})
    table = []
    for key in dict.fromkeys(row["row"] for row in per_split):
        rows = [row for row in per_split if row["row"] == key]
        s = summarize([row["test_acc"] for row in rows])
        first = rows[0]
        table.append({**{k: first[k] for k in ("row", "smooth", "pseudo", "renode", "oracle_pseudo")},
                      "seeds": ";".join(str(x) for x in ctx.split_seeds()), "runs": len(rows),
                      "test_acc_mean": s["mean"], "test_acc_std": s["std"]})
    reports = ctx.out / "reports"
    paths = [_write_csv(reports / "ablation.csv", table, ABLATION_COLUMNS),
             _write_csv(reports / "ablation_runs.csv", per_split,
                        ["row", "split", "smooth", "pseudo", "renode", "oracle_pseudo", "seed", "val_acc", "test_acc"])]
    paths.append(reports / "ablation_manifest.json")
    write_json(paths[-1], ctx.manifest("ablate", paths))
    for row in table:
        print(f"row {row['row']:>6}: {100 * row['test_acc_mean']:.2f}±{100 * row['test_acc_std']:.1f}")
    return EXIT_OK


def cmd_sweep(args):
    ctx = Context(args)
    graphs = ctx.load_graphs(args.split_index)
    reports = ctx.out / "reports"
    paths = []
    if args.what in ("lambda", "both"):
        rows = sweep_lambdas(graphs, ctx.config)
        paths.append(_write_csv(reports / "lambda_grid.csv", rows, ["lambda1", "lambda2", "seed", "val_acc", "test_acc"]))
    if args.what in ("w-range", "both"):
        rows = sweep_weight_range(graphs, ctx.config)
        paths.append(_write_csv(reports / "w_range.csv", rows,
                                ["w_range", "w_min", "w_max", "seed", "val_acc", "test_acc"]))
    paths.append(reports / "sweep_manifest.json")
    write_json(paths[-1], ctx.manifest("sweep", paths, {"split_index": args.split_index}))
    print("wrote " + ", ".join(str(p) for p in paths[:-1]))
    return EXIT_OK


def _labelled_csv(path, labels, matrix, prefix):
    header = ",".join(["label"] + [f"{prefix}{j}" for j in range(matrix.shape[1])])
    data = np.column_stack([labels, matrix])
    fmt = ["%d"] + [FLOAT_FMT] * matrix.shape[1]
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, data, fmt=fmt, delimiter=",", header=header, comments="")
    return path


def cmd_export_embeddings(args):
    run_dir = Path(args.run_dir)
    if not (run_dir / MANIFEST).is_file():
        raise DatasetError(f"{run_dir} is not a training run directory (no {MANIFEST})")
    manifest = read_json(run_dir / MANIFEST)
    folder = run_dir / f"split_{args.split_index}"
    method = manifest.get("method")
    ds = normalize_columns(load_dataset(manifest["dataset"]))
    out = Path(args.out) if args.out else run_dir / "embeddings" / f"split_{args.split_index}"
    if method == "rsgslm":
        if not (folder / "W0.csv").is_file() or not (folder / "W1.csv").is_file():
            raise DatasetError(f"missing checkpoint W0.csv/W1.csv in {folder}")
        params = GcnParams(read_matrix(folder / "W0.csv"), read_matrix(folder / "W1.csv"))
        graph_dirs = manifest.get("graph_dirs", [])
        if not 0 <= args.split_index < len(graph_dirs):
            raise DatasetError(f"run has no split {args.split_index}")
        graphs = load_graphs(ds, graph_dirs[args.split_index])
        features = concat_features(graphs.view_results)
        config = load_config(run_dir / "config.txt").train
        operator = propagation_operator(graphs.fused, config.add_self_loops)
        Z = forward(params, operator, features).Z
        _labelled_csv(out / "F_star.csv", ds.labels, features, "f")
    else:
        if not (folder / "Z.csv").is_file():
            raise DatasetError(f"missing checkpoint outputs in {folder}")
        Z = read_matrix(folder / "Z.csv")
    _labelled_csv(out / "Z.csv", ds.labels, Z, "z")
    _labelled_csv(out / "X_star.csv", ds.labels, ds.concatenated(), "x")
    print(f"wrote embeddings to {out}")
    return EXIT_OK


def cmd_gradcheck(args):
    config = load_config(args.config, args.set or ()).train
    report = gradient_check(config, seed=args.seed)
    for row in report["rows"]:
        flags = ",".join(name for name in ("smooth", "pseudo", "renode") if row[name]) or "ce-only"
        print(f"row {row['row']} [{flags}]: max relative error {row['max_rel_error']:.3e}")
    ok = report["max_rel_error"] < GRADCHECK_TOL
    print(f"overall {report['max_rel_error']:.3e} ({'ok' if ok else 'FAILED'}, tolerance {GRADCHECK_TOL:g})")
    if args.out:
        write_json(args.out, {**report, "tolerance": GRADCHECK_TOL, "passed": ok})
    return EXIT_OK if ok else EXIT_NUMERIC


# ---------------------------------------------------------------- parser

def _common(p, runs=True):
    p.add_argument("dataset", help="dataset directory (views/view_<v>.csv, labels.csv)")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key (repeatable)")
    p.add_argument("--artifacts", help="artifact root (default $RSGSLM_ARTIFACT_ROOT or ./artifacts)")
    p.add_argument("--split", help="use splits/<name>.csv from the dataset instead of generated splits")
    if runs:
        p.add_argument("--runs", type=int, help="number of random splits (overrides split.runs)")


def build_parser():
    parser = _Parser(prog="rsgslm", description="Multi-view graph learning with a re-weighted GCN.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic multi-view dataset")
    p.add_argument("spec", help="generator spec file (n, c, views, dims, spread, noise, seed)")
    p.add_argument("out", help="dataset directory to create")
    p.add_argument("--force", action="store_true", help="write into a non-empty directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("graphs", help="learn per-view graphs, fuse them and compute node weights")
    _common(p)
    p.add_argument("--force", action="store_true", help="rebuild even when the manifest hash matches")
    p.set_defaults(func=cmd_graphs)

    p = sub.add_parser("train", help="train a method over one or more splits")
    _common(p)
    p.add_argument("--method", required=True, choices=TRAIN_METHODS)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("ablate", help="eight loss-term combinations plus ground-truth pseudo-labels")
    _common(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("sweep", help="lambda1 x lambda2 grid and weight-range sweep")
    _common(p)
    p.add_argument("--split-index", type=int, default=0)
    p.add_argument("--what", choices=("lambda", "w-range", "both"), default="both")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export-embeddings", help="write Z, F_* and X_* with labels for a trained run")
    p.add_argument("run_dir")
    p.add_argument("--split-index", type=int, default=0)
    p.add_argument("--out", help="output directory (default <run_dir>/embeddings/split_<i>)")
    p.set_defaults(func=cmd_export_embeddings)

    p = sub.add_parser("gradcheck", help="compare analytic and finite-difference gradients")
    p.add_argument("--config")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the report as JSON")
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"rsgslm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"rsgslm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"rsgslm: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DatasetError, ValueError, OSError) as exc:
        print(f"rsgslm: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
