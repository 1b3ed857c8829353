"""Per-view linear pre-reduction: PCA, or multi-CCA across all views."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Optional

import numpy as np

from .dataset import MultiViewDataset
from .errors import ConfigurationError, DegenerateInputError

PRETRAIN_MODES = ("none", "pca", "multicca")


@dataclass(frozen=True)
class PretrainConfig:
    mode: str = "pca"
    variance_threshold: float = 0.8
    n_components: Optional[int] = None

    def __post_init__(self):
        if self.mode not in PRETRAIN_MODES:
            raise ConfigurationError(f"pretrain mode must be one of {PRETRAIN_MODES}, got {self.mode!r}")
        if not 0 < self.variance_threshold <= 1:
            raise ConfigurationError("variance_threshold must lie in (0, 1]")
        if self.n_components is not None and self.n_components < 1:
            raise ConfigurationError("n_components must be >= 1")


def _fix_signs(loadings, *others):
    """Flip each column so its largest-magnitude loading is positive."""
    idx = np.argmax(np.abs(loadings), axis=0)
    signs = np.sign(loadings[idx, np.arange(loadings.shape[1])])
    signs[signs == 0] = 1.0
    return (loadings * signs,) + tuple(o * signs for o in others)


def pca(view):
    """Full PCA of ``view`` through the SVD of the centred matrix.

    Returns
    -------
    scores : (N, r) array
    loadings : (p, r) array
    ratios : (r,) array
        Explained-variance ratios, nonincreasing, summing to one.
    """
    X = np.asarray(view, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DegenerateInputError("PCA needs a 2-D matrix with at least two rows")
    Xc = X - X.mean(axis=0)
    U, s, Vt = np.linalg.svd(Xc, full_matrices=False)
    var = s ** 2
    total = var.sum()
    if not np.isfinite(total):
        raise DegenerateInputError("non-finite values in PCA input")
    if total <= np.finfo(float).tiny or s[0] <= 1e-12 * max(1.0, np.abs(X).max()):
        raise DegenerateInputError("zero-variance input: all rows are identical")
    loadings, scores = _fix_signs(Vt.T, U * s)
    return scores, loadings, var / total


def n_components_for(ratios, threshold):
    """Smallest q whose cumulative explained variance reaches ``threshold``."""
    cum = np.cumsum(ratios)
    # absorb rounding so that an exact 0.8 is not missed
    q = int(np.searchsorted(cum, threshold - 1e-12) + 1)
    return min(q, len(ratios))


def pca_reduce(view, cfg: PretrainConfig = PretrainConfig()):
    scores, _, ratios = pca(view)
    if cfg.n_components is not None:
        q = min(cfg.n_components, scores.shape[1])
    else:
        q = n_components_for(ratios, cfg.variance_threshold)
    return scores[:, :q]


# --------------------------------------------------------------------------- multi-CCA


@dataclass
class MultiCCAResult:
    weights: list          # per view, (p_m, K) canonical vectors
    variates: list         # per view, (N, K) unit-variance canonical variates
    correlations: np.ndarray  # (K,) mean pairwise correlation per component
    n_iter: list


def _standardize(X):
    X = np.asarray(X, dtype=float)
    Xc = X - X.mean(axis=0)
    sd = Xc.std(axis=0)
    sd[sd == 0] = 1.0
    return Xc / sd


def multicca(views, n_components=None, tol=1e-6, max_iter=100):
    """Unpenalized multiple CCA with a diagonal covariance bound.

    Maximizes the sum over view pairs of ``w_i' X_i' X_j w_j`` subject to
    ``||w_i|| <= 1`` by block coordinate ascent, one component at a time.
    Each view is deflated against its own variate before the next
    component, so variates within a view are uncorrelated.
    """
    Xs = [_standardize(X) for X in views]
    M = len(Xs)
    if M < 2:
        raise ConfigurationError("multi-CCA needs at least two views")
    K = min(X.shape[1] for X in Xs) if n_components is None else int(n_components)
    if K < 1:
        raise ConfigurationError("number of canonical components must be >= 1")
    N = Xs[0].shape[0]
    weights = [np.zeros((X.shape[1], K)) for X in Xs]
    variates = [np.zeros((N, K)) for _ in Xs]
    corrs, iters = np.zeros(K), []
    for k in range(K):
        ws = []
        for X in Xs:
            _, _, Vt = np.linalg.svd(X, full_matrices=False)
            ws.append(Vt[0].copy())
        prev = None
        it = 0
        for it in range(1, max_iter + 1):
            for i in range(M):
                target = sum(Xs[j] @ ws[j] for j in range(M) if j != i)
                w = Xs[i].T @ target
                norm = np.linalg.norm(w)
                ws[i] = w / norm if norm > 0 else w
            crit = sum(float((Xs[i] @ ws[i]) @ (Xs[j] @ ws[j])) for i, j in combinations(range(M), 2))
            if prev is not None and abs(crit - prev) <= tol * max(1.0, abs(prev)):
                break
            prev = crit
        iters.append(it)
        # one sign for all views keeps the pairwise correlations positive
        lead = ws[0][np.argmax(np.abs(ws[0]))]
        sign = -1.0 if lead < 0 else 1.0
        zs = []
        for i in range(M):
            w = sign * ws[i]
            weights[i][:, k] = w
            z = Xs[i] @ w
            zs.append(z)
            sd = z.std()
            variates[i][:, k] = z / sd if sd > 0 else z
            # deflate so the next variate of this view is uncorrelated with z
            zz = z @ z
            if zz > 0:
                Xs[i] = Xs[i] - np.outer(z, z @ Xs[i]) / zz
        pair = [np.corrcoef(zs[i], zs[j])[0, 1] for i, j in combinations(range(M), 2)]
        corrs[k] = np.nanmean(pair)
    return MultiCCAResult(weights, variates, corrs, iters)


def multicca_reduce(ds: MultiViewDataset, n_components=None, tol=1e-6, max_iter=100) -> MultiViewDataset:
    """Replace every view by its K unit-variance canonical variates."""
    if ds.n_views < 2:
        raise ConfigurationError("multi-CCA needs at least two views")
    res = multicca(ds.views, n_components, tol=tol, max_iter=max_iter)
    return MultiViewDataset(res.variates, ds.labels, ds.names)


def apply_pretrain(ds: MultiViewDataset, cfg: PretrainConfig) -> MultiViewDataset:
    if cfg.mode == "none":
        return ds
    if cfg.mode == "pca":
        return MultiViewDataset([pca_reduce(X, cfg) for X in ds.views], ds.labels, ds.names)
    return multicca_reduce(ds, cfg.n_components)
