"""Locally linear embedding with consensus-weight (multi-LLE) and averaged (m-LLE) variants."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.linalg import eigh, orthogonal_procrustes

from .dataset import MultiViewDataset
from .errors import ConfigurationError, NumericalError
from .sne import Embedding, as_weights, squared_distances

REGULARIZATION = 1e-3
DENSE_LIMIT = 4000


def knn(view, K):
    """Indices of the K nearest neighbours of every row (self excluded).

    Euclidean distance; ties go to the lower index. Row i of the result is
    ordered by increasing distance.
    """
    X = np.asarray(view, dtype=float)
    N = X.shape[0]
    K = int(K)
    if not 1 <= K < N:
        raise ConfigurationError(f"number of neighbours must satisfy 1 <= K < N={N}, got {K}")
    D = squared_distances(X)
    np.fill_diagonal(D, np.inf)
    # stable sort keeps equal distances in index order
    return np.argsort(D, axis=1, kind="stable")[:, :K]


@dataclass
class ReconstructionWeights:
    W: sparse.csr_matrix
    K: int

    def toarray(self):
        return self.W.toarray()


def _local_weights(X, i, nbrs, reg):
    Z = X[nbrs] - X[i]
    G = Z @ Z.T
    K = len(nbrs)
    trace = np.trace(G)
    if K > X.shape[1] or np.linalg.matrix_rank(G) < K:
        G = G + np.eye(K) * (reg * trace / K if trace > 0 else reg)
    try:
        w = np.linalg.solve(G, np.ones(K))
    except np.linalg.LinAlgError:
        w = np.linalg.lstsq(G, np.ones(K), rcond=None)[0]
    return w / w.sum()


def reconstruction_weights(view, neighbors, reg=REGULARIZATION) -> ReconstructionWeights:
    """Affine weights that best rebuild each point from its neighbours.

    Solves the local Gram system G w = 1 per row and rescales to sum one.
    A ridge of ``reg * trace(G) / K`` is added when G is singular or
    K exceeds the feature count.
    """
    X = np.asarray(view, dtype=float)
    neighbors = np.asarray(neighbors)
    N, K = neighbors.shape
    data = np.empty((N, K))
    for i in range(N):
        data[i] = _local_weights(X, i, neighbors[i], reg)
    W = sparse.csr_matrix((data.ravel(), neighbors.ravel(), np.arange(0, N * K + 1, K)), shape=(N, N))
    return ReconstructionWeights(W, K)


def reconstruction_error(view, W):
    X = np.asarray(view, dtype=float)
    W = W.W if isinstance(W, ReconstructionWeights) else W
    R = X - W @ X
    return np.einsum("ij,ij->i", R, R)


def embed_from_weights(W, d=2):
    """Bottom d eigenvectors of (I - W)'(I - W) after the constant mode.

    Since the rows of W sum to one the constant vector spans a null
    direction; it is lifted to the top of the spectrum by a rank-one shift,
    so exactly that mode is discarded and the returned columns have zero
    mean even when the null space is degenerate.
    """
    if isinstance(W, ReconstructionWeights):
        W = W.W
    W = W.toarray() if sparse.issparse(W) else np.asarray(W, dtype=float)
    N = W.shape[0]
    if not 1 <= d < N:
        raise ConfigurationError(f"embedding dimension must satisfy 1 <= d < N={N}")
    if N > DENSE_LIMIT:
        raise ConfigurationError(f"dense eigensolver limited to N <= {DENSE_LIMIT}")
    IW = np.eye(N) - W
    Mat = IW.T @ IW
    Mat = 0.5 * (Mat + Mat.T)
    shift = np.trace(Mat) + 1.0
    try:
        vals, vecs = eigh(Mat + shift / N, subset_by_index=[0, d - 1])
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    residual = np.linalg.norm(Mat @ vecs - vecs * vals, axis=0)
    if np.any(residual > 1e-6 * max(1.0, shift)):
        raise NumericalError(f"eigenpair residuals too large: {residual}")
    return vecs, vals


def _lle_weights(X, K):
    return reconstruction_weights(X, knn(X, K))


def run_lle(X, K, d=2) -> Embedding:
    method = "lle"
    if isinstance(X, MultiViewDataset):
        X = X.concatenated() if X.n_views > 1 else X.views[0]
        method = "lle-concat"
    Y, vals = embed_from_weights(_lle_weights(np.asarray(X, dtype=float), K), d)
    return Embedding(Y, method, {"K": int(K), "d": d}, eigenvalues=vals)


def consensus_weights(W_list, alpha=None):
    alpha = as_weights(alpha, len(W_list))
    W = None
    for a, Wm in zip(alpha, W_list):
        Wm = Wm.W if isinstance(Wm, ReconstructionWeights) else Wm
        W = a * Wm if W is None else W + a * Wm
    return W


def run_multille(ds: MultiViewDataset, K, alpha=None, d=2) -> Embedding:
    """multi-LLE: embed the alpha-weighted sum of per-view reconstruction weights."""
    W_hat = consensus_weights([_lle_weights(X, K) for X in ds.views], alpha)
    Y, vals = embed_from_weights(W_hat, d)
    return Embedding(Y, "multille", {"K": int(K), "d": d}, eigenvalues=vals)


def procrustes_align(Y, reference):
    """Rotate/reflect Y onto ``reference`` (both centred first)."""
    Yc = Y - Y.mean(axis=0)
    Rc = reference - reference.mean(axis=0)
    R, _ = orthogonal_procrustes(Yc, Rc)
    return Yc @ R


def average_embeddings(Ys, beta=None):
    """Procrustes-align each embedding to the first, then take the beta-weighted mean."""
    beta = as_weights(beta, len(Ys))
    ref = Ys[0] - Ys[0].mean(axis=0)
    out = np.zeros_like(ref)
    for b, Y in zip(beta, Ys):
        out += b * (ref if Y is Ys[0] else procrustes_align(Y, ref))
    return out


def run_mlle(ds: MultiViewDataset, K, beta=None, d=2) -> Embedding:
    """m-LLE: weighted average of per-view LLE embeddings."""
    Ys = [embed_from_weights(_lle_weights(X, K), d)[0] for X in ds.views]
    return Embedding(average_embeddings(Ys, beta), "mlle", {"K": int(K), "d": d})
