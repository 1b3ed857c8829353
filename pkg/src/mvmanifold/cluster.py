"""Clustering of embeddings and the external/internal evaluation measures."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import comb
from sklearn.cluster import DBSCAN, KMeans
from sklearn.metrics import silhouette_score

from .errors import ConfigurationError, DatasetError, UndefinedMetricError

DEFAULT_RESTARTS = 10
DEFAULT_MIN_PTS = 5


@dataclass
class ClusteringResult:
    labels: np.ndarray
    k: int
    inertia: Optional[float] = None
    eps: Optional[float] = None


def _coords(Y):
    return np.asarray(getattr(Y, "coords", Y), dtype=float)


def kmeans(Y, k, restarts=DEFAULT_RESTARTS, seed=0, max_iter=300) -> ClusteringResult:
    """K-means with k-means++ seeding; the best of ``restarts`` runs by inertia."""
    X = _coords(Y)
    if not 1 <= k <= X.shape[0]:
        raise ConfigurationError(f"k must satisfy 1 <= k <= N={X.shape[0]}, got {k}")
    if restarts < 1:
        raise ConfigurationError("restarts must be >= 1")
    km = KMeans(n_clusters=k, init="k-means++", n_init=restarts, max_iter=max_iter,
                random_state=np.random.RandomState(seed % 2**32), algorithm="lloyd")
    labels = km.fit_predict(X)
    return ClusteringResult(labels.astype(int), int(k), float(km.inertia_))


def inertia(Y, labels):
    X = _coords(Y)
    labels = np.asarray(labels)
    total = 0.0
    for c in np.unique(labels):
        Z = X[labels == c]
        total += float(((Z - Z.mean(axis=0)) ** 2).sum())
    return total


def k_distance_eps(Y, min_pts=DEFAULT_MIN_PTS):
    """Elbow of the sorted k-distance curve (k = min_pts).

    The elbow is the point farthest from the chord joining the curve's
    endpoints.
    """
    X = _coords(Y)
    N = X.shape[0]
    k = min(max(int(min_pts), 1), N - 1)
    sq = np.einsum("ij,ij->i", X, X)
    D = np.sqrt(np.maximum(sq[:, None] + sq[None, :] - 2 * X @ X.T, 0))
    np.fill_diagonal(D, np.inf)
    kd = np.sort(np.partition(D, k - 1, axis=1)[:, k - 1])
    x = np.arange(N, dtype=float)
    dx, dy = x[-1] - x[0], kd[-1] - kd[0]
    norm = np.hypot(dx, dy)
    if norm == 0:
        return float(kd[0]) if kd[0] > 0 else 1.0
    dist = np.abs(dy * (x - x[0]) - dx * (kd - kd[0])) / norm
    eps = float(kd[np.argmax(dist)])
    return eps if eps > 0 else float(kd[kd > 0].min()) if np.any(kd > 0) else 1.0


def dbscan(Y, eps=None, min_pts=DEFAULT_MIN_PTS) -> ClusteringResult:
    """DBSCAN labelling; noise is -1. ``eps`` defaults to the k-distance elbow."""
    X = _coords(Y)
    if min_pts < 1:
        raise ConfigurationError("min_pts must be >= 1")
    if eps is None:
        eps = k_distance_eps(X, min_pts)
    if eps <= 0:
        raise ConfigurationError("eps must be positive")
    labels = DBSCAN(eps=eps, min_samples=int(min_pts)).fit_predict(X).astype(int)
    k = int(labels.max() + 1) if labels.size else 0
    return ClusteringResult(labels, k, eps=float(eps))


# --------------------------------------------------------------------------- measures


@dataclass
class ContingencyTable:
    counts: np.ndarray   # rows: truth classes, columns: predicted clusters
    row_labels: np.ndarray
    col_labels: np.ndarray

    @property
    def a(self):
        return self.counts.sum(axis=1)

    @property
    def b(self):
        return self.counts.sum(axis=0)

    @property
    def total(self):
        return int(self.counts.sum())


def contingency(pred, truth) -> ContingencyTable:
    pred, truth = np.asarray(pred).ravel(), np.asarray(truth).ravel()
    if pred.shape != truth.shape:
        raise DatasetError(f"label vectors differ in length: {len(pred)} vs {len(truth)}")
    rl, ri = np.unique(truth, return_inverse=True)
    cl, ci = np.unique(pred, return_inverse=True)
    counts = np.zeros((len(rl), len(cl)), dtype=np.int64)
    np.add.at(counts, (ri, ci), 1)
    return ContingencyTable(counts, rl, cl)


def _table(x, truth=None):
    return x if isinstance(x, ContingencyTable) else contingency(x, truth)


def accuracy(table, truth=None) -> float:
    """Matched accuracy: the diagonal share after the best cluster-to-class assignment."""
    t = _table(table, truth)
    if t.total == 0:
        return 0.0
    r, c = linear_sum_assignment(t.counts, maximize=True)
    return float(t.counts[r, c].sum() / t.total)


def misclustering_error(table, truth=None) -> float:
    return 1.0 - accuracy(table, truth)


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def nmi(table, truth=None) -> float:
    """2 I(X, Y) / (H(X) + H(Y)), natural logs; 0 when both entropies vanish."""
    t = _table(table, truth)
    n = t.total
    if n == 0:
        return 0.0
    hx, hy = _entropy(t.a, n), _entropy(t.b, n)
    nz = t.counts > 0
    nij = t.counts[nz]
    outer = np.outer(t.a, t.b)[nz]
    mi = float((nij / n * np.log(nij * n / outer)).sum())
    if hx + hy == 0:
        return 0.0
    return float(min(max(2 * mi / (hx + hy), 0.0), 1.0))


def _pair_sums(t):
    n = t.total
    if n < 2:
        raise UndefinedMetricError("pair-counting measures need at least two samples")
    sum_ij = comb(t.counts, 2).sum()
    sum_a = comb(t.a, 2).sum()
    sum_b = comb(t.b, 2).sum()
    return float(sum_ij), float(sum_a), float(sum_b), float(comb(n, 2))


def rand_index(table, truth=None) -> float:
    """Share of sample pairs on which the two partitions agree."""
    s_ij, s_a, s_b, pairs = _pair_sums(_table(table, truth))
    # agreements: together in both, plus apart in both
    return (pairs + 2 * s_ij - s_a - s_b) / pairs


def ari(table, truth=None) -> float:
    s_ij, s_a, s_b, pairs = _pair_sums(_table(table, truth))
    expected = s_a * s_b / pairs
    top = 0.5 * (s_a + s_b)
    if top == expected:
        # both partitions trivial in the same way; agreement is perfect
        return 1.0
    return (s_ij - expected) / (top - expected)


def silhouette(Y, labels) -> float:
    """Mean silhouette width in embedding space; singleton clusters score 0."""
    X = _coords(Y)
    labels = np.asarray(labels)
    n_labels = len(np.unique(labels))
    if n_labels < 2:
        raise UndefinedMetricError("silhouette needs at least two clusters")
    if n_labels >= X.shape[0]:
        raise UndefinedMetricError("silhouette needs fewer clusters than samples")
    return float(silhouette_score(X, labels))


def evaluate(Y, pred, truth) -> dict:
    """All five measures; silhouette is NaN when undefined."""
    t = contingency(pred, truth)
    try:
        sil = silhouette(Y, pred)
    except UndefinedMetricError:
        sil = float("nan")
    return {"acc": accuracy(t), "nmi": nmi(t), "ri": rand_index(t), "ari": ari(t), "silhouette": sil}
