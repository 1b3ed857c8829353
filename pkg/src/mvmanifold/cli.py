"""Command line entry point: ``mvmanifold run | generate | ablation``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .dataset import SyntheticScenario, generate_synthetic, load_directory, save_dataset
from .errors import ConfigurationError, MVManifoldError
from .harness import (DEFAULT_GRID, METHODS, METRICS, SNE_METHODS, SweepSpec, default_pretrain,
                      embed_prepared, emit_embedding, emit_scatter, prepare, run_sweep, view_ablation)
from .pretrain import PRETRAIN_MODES, PretrainConfig

log = logging.getLogger("mvmanifold")


def load_data(spec, seed=0, header=False, delimiter=","):
    """A directory of CSV views or a scenario name (mmds, nds, mcs, nds+<c>)."""
    path = Path(spec)
    if path.is_dir():
        return load_directory(path, header=header, delimiter=delimiter)
    return generate_synthetic(SyntheticScenario.from_name(spec, seed))


def parse_grid(text):
    if text is None or text == "sweep":
        return DEFAULT_GRID
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"cannot parse parameter list {text!r}")
    return tuple(int(v) if v.is_integer() else v for v in vals)


def parse_weights(text, M):
    if text is None or text == "uniform":
        return None
    if text == "auto":
        return "auto"
    if text.startswith("csv:"):
        with open(text[4:], newline="") as fh:
            vals = [float(v) for row in csv.reader(fh) for v in row if v.strip()]
        return np.asarray(vals)
    raise ConfigurationError(f"weights must be uniform, auto or csv:<path>, got {text!r}")


def _common(p):
    p.add_argument("--data", required=True, help="directory of view CSVs or a scenario name")
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--pretrain", choices=PRETRAIN_MODES, help="default: pca for SNE methods, none otherwise")
    p.add_argument("--pca-var", type=float, default=0.8, help="PCA explained-variance threshold")
    p.add_argument("--weights", default="uniform", help="uniform, auto or csv:<path>")
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--cluster", choices=("kmeans", "dbscan"), default="kmeans")
    p.add_argument("--k", type=int, help="number of clusters (default: from labels)")
    p.add_argument("--eps", type=float)
    p.add_argument("--min-pts", type=int, default=5)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--repeats", type=int, default=10, help="runs per grid value; LLE and ISOMAP embed once and repeat K-means")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--header", action="store_true", help="CSV files have a header row")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--literal-eigen", action="store_true", help="ISOMAP: eigendecompose geodesics directly")
    p.add_argument("--select-metric", choices=METRICS, default="nmi")
    p.add_argument("--out", default="out")


def build_parser():
    parser = argparse.ArgumentParser(prog="mvmanifold", description="Multi-view manifold learning.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="embed, cluster and evaluate")
    _common(run)
    g = run.add_mutually_exclusive_group()
    g.add_argument("--param", help="value, comma list, or 'sweep' for the default grid")
    g.add_argument("--perplexity", help="alias of --param for SNE methods")
    g.add_argument("--nn", help="alias of --param for LLE/ISOMAP methods")

    gen = sub.add_parser("generate", help="write a synthetic scenario as CSV files")
    gen.add_argument("scenario", help="mmds, nds, mcs or nds+<c>")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)

    abl = sub.add_parser("ablation", help="run a method on every subset of views")
    _common(abl)
    abl.add_argument("--param", required=True, type=float)
    return parser


def _spec(args, ds, grid):
    pre = None
    if args.pretrain is not None or args.pca_var != 0.8:
        mode = args.pretrain or default_pretrain(args.method).mode
        pre = PretrainConfig(mode, args.pca_var)
    return SweepSpec(args.method, grid, repeats=args.repeats, k=args.k, cluster=args.cluster,
                     restarts=args.restarts, eps=args.eps, min_pts=args.min_pts, seed=args.seed,
                     pretrain=pre, weights=parse_weights(args.weights, ds.n_views), d=args.dim,
                     n_iter=args.iters, literal=args.literal_eigen, select_metric=args.select_metric,
                     workers=args.workers)


def _print_summary(report):
    for row in report.summary():
        vals = " ".join(f"{m}={row[m]:.4f}({row[m + '_sd']:.4f})" for m in METRICS)
        print(f"{row['method']} param={row['parameter']} {vals}")
    print(f"optimum ({report.metric}): {report.optimum}")


def cmd_run(args):
    ds = load_data(args.data, args.seed, args.header, args.delimiter)
    text = args.param or args.perplexity or args.nn
    if text is None:
        text = "30" if args.method in SNE_METHODS else "10"
    spec = _spec(args, ds, parse_grid(text))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = run_sweep(ds, spec)
    report.to_csv(out / "sweep.csv")
    _print_summary(report)
    best = report.optimum if report.optimum is not None else spec.grid[0]
    prepared = prepare(ds, spec.method, spec.pretrain)
    emb = embed_prepared(prepared, spec.method, best, seed=spec.seed, weights=spec.weights,
                         d=spec.d, n_iter=spec.n_iter, literal=spec.literal)
    emit_embedding(emb, out / "embedding.csv", ds.labels)
    emit_scatter(emb, out / "scatter.svg", ds.labels, title=f"{spec.method} {best}")
    if emb.weights is not None:
        with open(out / "weights.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration"] + ds.view_names())
            for t, w in enumerate(emb.weights):
                writer.writerow([t] + [repr(float(v)) for v in w])
    if emb.index is not None:
        dropped = np.setdiff1d(np.arange(ds.n_samples), emb.index)
        print(f"dropped {len(dropped)} disconnected samples: {dropped.tolist()}")
    return 0


def cmd_generate(args):
    ds = generate_synthetic(SyntheticScenario.from_name(args.scenario, args.seed))
    for path in save_dataset(ds, args.out):
        print(path)
    return 0


def cmd_ablation(args):
    ds = load_data(args.data, args.seed, args.header, args.delimiter)
    param = int(args.param) if float(args.param).is_integer() else args.param
    spec = _spec(args, ds, (param,))
    rows = view_ablation(ds, args.method, param, spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fields = ["views", "n_ok"] + [c for m in METRICS for c in (m, m + "_sd")]
    with open(out / "ablation.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({**row, "views": "+".join(str(v + 1) for v in row["views"])})
    for row in rows:
        print(f"views={'+'.join(str(v + 1) for v in row['views'])} nmi={row['nmi']:.4f} acc={row['acc']:.4f}")
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": cmd_run, "generate": cmd_generate, "ablation": cmd_ablation}[args.command]
    try:
        return handler(args)
    except MVManifoldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
