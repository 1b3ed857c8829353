"""ISOMAP with combined-graph (multi-ISOMAP) and averaged (m-ISOMAP) variants."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.linalg import eigh
from scipy.sparse.csgraph import connected_components, dijkstra

from .dataset import MultiViewDataset
from .errors import ConfigurationError, DegenerateInputError, NumericalError
from .lle import average_embeddings, knn
from .sne import Embedding, as_weights, squared_distances

log = logging.getLogger(__name__)


@dataclass
class NeighborGraph:
    """Symmetrized kNN graph; ``edges`` holds Euclidean lengths.

    Zero-length edges between duplicate points are stored explicitly so
    they still count as connections.
    """

    edges: sparse.csr_matrix
    K: int

    @property
    def n_vertices(self):
        return self.edges.shape[0]

    def components(self):
        return connected_components(self.edges, directed=False)

    @property
    def n_components(self):
        return self.components()[0]


def _distances(X):
    return np.sqrt(squared_distances(np.asarray(X, dtype=float)))


def knn_mask(view, K):
    X = np.asarray(view, dtype=float)
    N = X.shape[0]
    nbrs = knn(X, K)
    mask = np.zeros((N, N), dtype=bool)
    mask[np.repeat(np.arange(N), nbrs.shape[1]), nbrs.ravel()] = True
    return mask | mask.T


def _graph_from(mask, lengths, K):
    rows, cols = np.nonzero(mask)
    E = sparse.csr_matrix((lengths[rows, cols], (rows, cols)), shape=mask.shape)
    return NeighborGraph(E, int(K))


def build_graph(view, K) -> NeighborGraph:
    """kNN graph where (i, j) is an edge if either point is among the other's K nearest."""
    mask = knn_mask(view, K)
    return _graph_from(mask, _distances(view), K)


def shortest_paths(g: NeighborGraph) -> np.ndarray:
    """All-pairs geodesic lengths by Dijkstra from every source; unreachable pairs are inf."""
    D = dijkstra(g.edges, directed=False)
    return 0.5 * (D + D.T)


def largest_component(g: NeighborGraph):
    """Sorted vertex indices of the largest connected component (lowest label on ties)."""
    n, labels = g.components()
    if n == 1:
        return np.arange(g.n_vertices)
    sizes = np.bincount(labels)
    return np.flatnonzero(labels == np.argmax(sizes))


def classical_embed(D, d=2, literal=False):
    """Spectral embedding of a distance matrix.

    By default this is classical MDS: B = -1/2 H D^2 H is eigendecomposed
    and coordinate p is sqrt(lambda_p) u_p for the d largest eigenvalues.
    With ``literal=True`` the eigendecomposition is applied to D itself.

    Returns
    -------
    Y : (N, d) array
    vals : (d,) array
        The eigenvalues used, in decreasing order.
    """
    D = np.asarray(D, dtype=float)
    N = D.shape[0]
    if D.ndim != 2 or D.shape[1] != N:
        raise ConfigurationError("distance matrix must be square")
    if not np.all(np.isfinite(D)):
        raise DegenerateInputError("distance matrix has non-finite entries")
    if not 1 <= d < N:
        raise ConfigurationError(f"embedding dimension must satisfy 1 <= d < N={N}")
    if literal:
        B = 0.5 * (D + D.T)
    else:
        D2 = D ** 2
        B = D2 - D2.mean(axis=0) - D2.mean(axis=1)[:, None] + D2.mean()
        B = -0.5 * (B + B.T) / 2
    try:
        vals, vecs = eigh(B, subset_by_index=[N - d, N - 1])
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    vals, vecs = vals[::-1], vecs[:, ::-1]
    tol = 1e-10 * max(1.0, np.abs(vals).max())
    pos = vals > tol
    if not pos.all():
        warnings.warn(f"only {pos.sum()} positive eigenvalues; padding {d - pos.sum()} coordinate(s) with zeros",
                      RuntimeWarning, stacklevel=2)
    Y = np.zeros((N, d))
    Y[:, pos] = vecs[:, pos] * np.sqrt(vals[pos])
    return Y, vals


def _embed_graph(g: NeighborGraph, d, literal, method, config):
    keep = largest_component(g)
    index = None
    if len(keep) < g.n_vertices:
        dropped = np.setdiff1d(np.arange(g.n_vertices), keep)
        shown = dropped[:10].tolist()
        log.warning("graph is disconnected; dropping %d samples (first: %s)", len(dropped), shown)
        g = NeighborGraph(g.edges[keep][:, keep].tocsr(), g.K)
        index = keep
    Y, vals = classical_embed(shortest_paths(g), d, literal)
    return Embedding(Y, method, config, index=index, eigenvalues=vals)


def run_isomap(X, K, d=2, literal=False) -> Embedding:
    method = "isomap"
    if isinstance(X, MultiViewDataset):
        X = X.concatenated() if X.n_views > 1 else X.views[0]
        method = "isomap-concat"
    return _embed_graph(build_graph(X, K), d, literal, method, {"K": int(K), "d": d})


def combined_graph(views, K, w=None, standardize=True) -> NeighborGraph:
    """Union of the per-view kNN graphs with weighted-average edge lengths.

    Each view's distances are divided by its median kNN distance, and the
    average is multiplied back by the weighted mean of those medians so the
    result stays in the original units. Edges absent from a view's own
    graph use that view's Euclidean distance.
    """
    M = len(views)
    w = as_weights(w, M)
    masks, dists = [], []
    for X in views:
        masks.append(knn_mask(X, K))
        dists.append(_distances(X))
    union = np.logical_or.reduce(masks)
    if standardize:
        scales = np.array([np.median(np.sort(Dm + np.diag(np.full(len(Dm), np.inf)), axis=1)[:, :K])
                           for Dm in dists])
        if np.any(scales <= 0):
            scales = np.where(scales > 0, scales, 1.0)
        ref = float(w @ scales)
        factors = ref / scales
    else:
        factors = np.ones(M)
    rows, cols = np.nonzero(union)
    lengths = np.zeros(len(rows))
    for wm, c, Dm in zip(w, factors, dists):
        lengths += (wm * c) * Dm[rows, cols]
    E = sparse.csr_matrix((lengths, (rows, cols)), shape=union.shape)
    return NeighborGraph(E, int(K))


def run_multiisomap(ds: MultiViewDataset, K, w=None, d=2, literal=False, standardize=True) -> Embedding:
    """multi-ISOMAP: ISOMAP on the combined graph of all views."""
    if ds.n_views == 1:
        # a single view needs no averaging; keep the graph bit-identical
        g = build_graph(ds.views[0], K)
    else:
        g = combined_graph(ds.views, K, w, standardize)
    return _embed_graph(g, d, literal, "multiisomap", {"K": int(K), "d": d})


def run_misomap(ds: MultiViewDataset, K, beta=None, d=2, literal=False) -> Embedding:
    """m-ISOMAP: Procrustes-aligned weighted average of per-view ISOMAP embeddings.

    Only samples that lie in the largest component of every view's graph
    are embedded; the restriction is repeated until it is stable.
    """
    graphs = [build_graph(X, K) for X in ds.views]
    keep = np.arange(ds.n_samples)
    while True:
        sub = [NeighborGraph(g.edges[keep][:, keep].tocsr(), g.K) for g in graphs]
        new = keep
        for g in sub:
            new = np.intersect1d(new, keep[largest_component(g)])
        if len(new) == len(keep):
            break
        if len(new) <= d:
            raise DegenerateInputError("views share no sizeable connected sample set")
        keep = new
    if len(keep) < ds.n_samples:
        log.warning("m-ISOMAP: keeping %d of %d samples connected in every view", len(keep), ds.n_samples)
    Ys = [classical_embed(shortest_paths(g), d, literal)[0] for g in sub]
    index = keep if len(keep) < ds.n_samples else None
    return Embedding(average_embeddings(Ys, beta), "misomap", {"K": int(K), "d": d}, index=index)
