"""Experimental protocol: embed, cluster, evaluate over a parameter grid."""

from __future__ import annotations

import csv
import logging
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from html import escape
from itertools import combinations
from pathlib import Path
from typing import Optional

import numpy as np

from . import cluster as cl
from .dataset import MultiViewDataset
from .errors import ConfigurationError, MVManifoldError
from .isomap import run_isomap, run_misomap, run_multiisomap
from .lle import run_lle, run_mlle, run_multille
from .pretrain import PretrainConfig, apply_pretrain
from .sne import Embedding, SneConfig, run_msne, run_multisne, run_tsne

log = logging.getLogger(__name__)

DEFAULT_GRID = (2, 10, 20, 50, 80, 100, 200)
METRICS = ("acc", "nmi", "ri", "ari", "silhouette")
SNE_METHODS = ("tsne", "tsne-concat", "msne", "multisne")
LLE_METHODS = ("lle", "lle-concat", "mlle", "multille")
ISOMAP_METHODS = ("isomap", "isomap-concat", "misomap", "multiisomap")
METHODS = SNE_METHODS + LLE_METHODS + ISOMAP_METHODS
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _check_method(method):
    if method not in METHODS:
        raise ConfigurationError(f"unknown method {method!r}; expected one of {METHODS}")


def default_pretrain(method) -> PretrainConfig:
    """PCA for the SNE family, nothing for LLE and ISOMAP."""
    return PretrainConfig("pca") if method in SNE_METHODS else PretrainConfig("none")


def prepare(ds: MultiViewDataset, method, pretrain: Optional[PretrainConfig] = None, view=0) -> MultiViewDataset:
    """Reduce ``ds`` to what ``method`` consumes, then apply the pre-reduction.

    Concatenation methods see one view holding all features; single-view
    methods see view ``view`` only.
    """
    _check_method(method)
    pretrain = default_pretrain(method) if pretrain is None else pretrain
    if method.endswith("-concat"):
        ds = MultiViewDataset([ds.concatenated()], ds.labels, ["concat"])
    elif method in ("tsne", "lle", "isomap"):
        ds = ds.select_views([view])
    if pretrain.mode == "multicca" and ds.n_views < 2:
        raise ConfigurationError("multi-CCA pre-reduction needs a multi-view method")
    return apply_pretrain(ds, pretrain)


def embed_prepared(ds: MultiViewDataset, method, param, seed=0, weights=None, d=2,
                   n_iter=1000, literal=False) -> Embedding:
    """Run ``method`` on an already prepared dataset.

    ``param`` is the perplexity for SNE methods and the neighbour count
    otherwise. ``weights`` is None (uniform), a vector, or "auto" (multi-SNE).
    """
    _check_method(method)
    N = ds.n_samples
    if isinstance(weights, str) and weights == "uniform":
        weights = None
    if isinstance(weights, str) and method != "multisne":
        raise ConfigurationError("automatic weights are only available for multisne")
    if method in SNE_METHODS:
        if not 0 < param < N - 1:
            raise ConfigurationError(f"perplexity must satisfy 0 < Perp < N-1={N - 1}, got {param}")
        cfg = SneConfig(perplexity=float(param), n_iter=n_iter, d=d, seed=int(seed))
        if method == "multisne":
            return run_multisne(ds, cfg, weights)
        if method == "msne":
            return run_msne(ds, cfg, weights)
        emb = run_tsne(ds.views[0], cfg)
        emb.method = method
        return emb
    K = int(param)
    if K != param or not 1 <= K < N:
        raise ConfigurationError(f"neighbour count must be an integer in [1, N-1={N - 1}], got {param}")
    if method == "multille":
        return run_multille(ds, K, weights, d)
    if method == "mlle":
        return run_mlle(ds, K, weights, d)
    if method == "multiisomap":
        return run_multiisomap(ds, K, weights, d, literal)
    if method == "misomap":
        return run_misomap(ds, K, weights, d, literal)
    if method in ("lle", "lle-concat"):
        emb = run_lle(ds.views[0], K, d)
    else:
        emb = run_isomap(ds.views[0], K, d, literal)
    emb.method = method
    return emb


def embed(ds: MultiViewDataset, method, param, pretrain=None, seed=0, weights=None, d=2,
          n_iter=1000, literal=False, view=0) -> Embedding:
    return embed_prepared(prepare(ds, method, pretrain, view), method, param, seed, weights, d, n_iter, literal)


# --------------------------------------------------------------------------- sweeps


@dataclass
class SweepSpec:
    method: str
    grid: tuple = DEFAULT_GRID
    repeats: int = 10
    k: Optional[int] = None
    cluster: str = "kmeans"
    restarts: int = cl.DEFAULT_RESTARTS
    eps: Optional[float] = None
    min_pts: int = cl.DEFAULT_MIN_PTS
    seed: int = 0
    pretrain: Optional[PretrainConfig] = None
    weights: object = None
    d: int = 2
    n_iter: int = 1000
    literal: bool = False
    view: int = 0
    select_metric: str = "nmi"
    workers: int = 1

    def __post_init__(self):
        _check_method(self.method)
        self.grid = tuple(self.grid)
        if not self.grid:
            raise ConfigurationError("empty parameter grid")
        if self.repeats < 1:
            raise ConfigurationError("repeats must be >= 1")
        if self.cluster not in ("kmeans", "dbscan"):
            raise ConfigurationError(f"unknown clustering {self.cluster!r}")
        if self.select_metric not in METRICS:
            raise ConfigurationError(f"selection metric must be one of {METRICS}")

    def validate_for(self, ds: MultiViewDataset):
        N = ds.n_samples
        limit = N - 1 if self.method in SNE_METHODS else N
        bad = [v for v in self.grid if not 0 < v < limit]
        if bad:
            raise ConfigurationError(f"grid values {bad} are out of range for N={N}")
        if self.cluster == "kmeans" and self._k(ds) is None:
            raise ConfigurationError("number of clusters unknown: pass k or provide labels")

    def _k(self, ds):
        return self.k if self.k is not None else ds.n_clusters


@dataclass
class SweepReport:
    rows: list
    metric: str = "nmi"
    optimum: Optional[float] = None
    embeddings: dict = field(default_factory=dict)

    def table(self, parameter):
        return [r for r in self.rows if r["parameter"] == parameter]

    def summary(self):
        """Per-parameter mean and sd of every measure over successful repeats."""
        out = []
        for p in dict.fromkeys(r["parameter"] for r in self.rows):
            ok = [r for r in self.table(p) if r["status"] == "ok"]
            row = {"method": self.rows[0]["method"], "parameter": p, "n_ok": len(ok)}
            for m in METRICS:
                vals = np.array([r[m] for r in ok], dtype=float)
                vals = vals[np.isfinite(vals)]
                row[m] = float(vals.mean()) if vals.size else float("nan")
                row[m + "_sd"] = float(vals.std(ddof=1)) if vals.size > 1 else 0.0 if vals.size else float("nan")
            out.append(row)
        return out

    def select(self, metric=None):
        metric = metric or self.metric
        best, best_val = None, -math.inf
        for row in self.summary():
            v = row[metric]
            if np.isfinite(v) and v > best_val:
                best, best_val = row["parameter"], v
        return best

    def to_csv(self, path):
        fields = ["method", "parameter", "repeat", *METRICS, "wall_time", "status"]
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
            writer.writeheader()
            writer.writerows(self.rows)


def cell_seeds(master, cell):
    """(embedding seed, clustering seed) for one grid cell."""
    a, b = np.random.SeedSequence([int(master), int(cell)]).generate_state(2)
    return int(a), int(b)


def cluster_embedding(emb: Embedding, spec: SweepSpec, k, seed):
    if spec.cluster == "kmeans":
        return cl.kmeans(emb.coords, k, spec.restarts, seed).labels
    return cl.dbscan(emb.coords, spec.eps, spec.min_pts).labels


def full_prediction(emb: Embedding, pred, n):
    """Expand a prediction on embedded rows to all n samples.

    Samples left out of the embedding (disconnected ISOMAP graphs) get the
    label -1, so they count as one extra cluster instead of vanishing from
    the evaluation.
    """
    pred = np.asarray(pred)
    if emb.index is None:
        return pred
    full = np.full(n, -1, dtype=int)
    full[emb.index] = pred
    return full


def _score(emb, labels, pred, n):
    try:
        sil = cl.silhouette(emb.coords, pred)
    except MVManifoldError:
        sil = float("nan")
    if labels is None:
        return {"acc": float("nan"), "nmi": float("nan"), "ri": float("nan"), "ari": float("nan"), "silhouette": sil}
    t = cl.contingency(full_prediction(emb, pred, n), labels)
    return {"acc": cl.accuracy(t), "nmi": cl.nmi(t), "ri": cl.rand_index(t), "ari": cl.ari(t), "silhouette": sil}


def _run_cell(prepared, labels, spec: SweepSpec, k, gi, param):
    """All repeats for one grid value; failures become rows."""
    rows, emb = [], None
    stochastic = spec.method in SNE_METHODS
    for r in range(spec.repeats):
        cell = gi * spec.repeats + r
        emb_seed, km_seed = cell_seeds(spec.seed, cell)
        row = {"method": spec.method, "parameter": param, "repeat": r}
        t0 = time.perf_counter()
        try:
            if emb is None or stochastic:
                emb = embed_prepared(prepared, spec.method, param, emb_seed, spec.weights,
                                     spec.d, spec.n_iter, spec.literal)
            pred = cluster_embedding(emb, spec, k, km_seed)
            row.update(_score(emb, labels, pred, prepared.n_samples))
            row["status"] = "ok"
        except MVManifoldError as exc:
            log.warning("%s at %s (repeat %d) failed: %s", spec.method, param, r, exc)
            emb = None if stochastic else emb
            row.update({m: float("nan") for m in METRICS})
            row["status"] = f"failed: {type(exc).__name__}: {exc}"
        row["wall_time"] = time.perf_counter() - t0
        rows.append(row)
    return rows, emb


def _run_cell_args(args):
    return _run_cell(*args)


def run_sweep(ds: MultiViewDataset, spec: SweepSpec, keep_embeddings=False) -> SweepReport:
    """Embed, cluster and score at every grid value and repeat.

    Output is independent of ``spec.workers``: each cell's seeds depend only
    on the master seed and the cell position.
    """
    spec.validate_for(ds)
    prepared = prepare(ds, spec.method, spec.pretrain, spec.view)
    k = spec._k(ds)
    jobs = [(prepared, ds.labels, spec, k, gi, p) for gi, p in enumerate(spec.grid)]
    if spec.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_run_cell_args, jobs))
    else:
        results = [_run_cell_args(j) for j in jobs]
    rows, embeddings = [], {}
    for (rs, emb), p in zip(results, spec.grid):
        rows.extend(rs)
        if keep_embeddings and emb is not None:
            embeddings[p] = emb
    report = SweepReport(rows, spec.select_metric, embeddings=embeddings)
    report.optimum = report.select()
    return report


def view_ablation(ds: MultiViewDataset, method, param, spec: Optional[SweepSpec] = None):
    """Run ``method`` on every non-empty subset of views (singletons first).

    Returns one summary dict per subset with the chosen view indices.
    """
    if ds.n_views < 2:
        raise ConfigurationError("view ablation needs at least two views")
    spec = spec or SweepSpec(method)
    spec = replace(spec, method=method, grid=(param,))
    out = []
    for size in range(1, ds.n_views + 1):
        for subset in combinations(range(ds.n_views), size):
            rep = run_sweep(ds.select_views(list(subset)), spec)
            row = rep.summary()[0]
            row["views"] = subset
            out.append(row)
    return out


# --------------------------------------------------------------------------- output


def emit_embedding(emb, path, labels=None):
    Y = np.asarray(getattr(emb, "coords", emb), dtype=float)
    if labels is not None and getattr(emb, "index", None) is not None:
        labels = np.asarray(labels)[emb.index]
    header = [f"y{j + 1}" for j in range(Y.shape[1])] + (["label"] if labels is not None else [])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, y in enumerate(Y):
            row = [repr(float(v)) for v in y]
            if labels is not None:
                row.append(labels[i])
            writer.writerow(row)
    return Path(path)


def load_embedding(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    has_label = header[-1] == "label"
    data = rows[1:]
    n_coord = len(header) - has_label
    Y = np.array([[float(v) for v in r[:n_coord]] for r in data]).reshape(len(data), n_coord)
    labels = np.array([r[-1] for r in data]) if has_label else None
    return Y, labels


def emit_scatter(emb, path, labels=None, size=600, title=None):
    """Axis-free SVG scatter plot, one colour per label, with a legend."""
    Y = np.asarray(getattr(emb, "coords", emb), dtype=float)
    if Y.ndim != 2 or Y.shape[1] < 1:
        raise ConfigurationError("embedding must be a 2-D array")
    if Y.shape[1] > 2:
        warnings.warn(f"{Y.shape[1]}-dimensional embedding; plotting the first two coordinates",
                      RuntimeWarning, stacklevel=2)
    if Y.shape[1] == 1:
        Y = np.column_stack([Y[:, 0], np.zeros(len(Y))])
    Y = Y[:, :2]
    if labels is not None and getattr(emb, "index", None) is not None:
        labels = np.asarray(labels)[emb.index]
    groups = np.zeros(len(Y), dtype=int) if labels is None else np.unique(np.asarray(labels), return_inverse=True)[1]
    names = ["all"] if labels is None else [str(v) for v in np.unique(np.asarray(labels))]
    margin, legend_w = 20, 110
    lo, hi = Y.min(axis=0), Y.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    P = margin + (Y - lo) / span * (size - 2 * margin)
    P[:, 1] = size - P[:, 1]  # svg y axis points down
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size + legend_w}" height="{size}" '
             f'viewBox="0 0 {size + legend_w} {size}">',
             '<rect width="100%" height="100%" fill="white"/>']
    if title:
        parts.append(f'<text x="{margin}" y="14" font-family="sans-serif" font-size="12">{escape(title)}</text>')
    for g, name in enumerate(names):
        colour = PALETTE[g % len(PALETTE)]
        parts.append(f'<g class="group" data-label="{escape(name)}" fill="{colour}" fill-opacity="0.8">')
        parts.extend(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3"/>' for x, y in P[groups == g])
        parts.append("</g>")
    parts.append('<g class="legend" font-family="sans-serif" font-size="12">')
    for g, name in enumerate(names):
        y = margin + 18 * g
        parts.append(f'<circle cx="{size + 10}" cy="{y}" r="5" fill="{PALETTE[g % len(PALETTE)]}"/>')
        parts.append(f'<text x="{size + 20}" y="{y + 4}">{escape(name)}</text>')
    parts.append("</g></svg>")
    Path(path).write_text("\n".join(parts) + "\n")
    return Path(path)
