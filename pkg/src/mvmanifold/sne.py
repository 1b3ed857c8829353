"""Exact t-SNE and its multi-view variants (multi-SNE, m-SNE, concatenation)."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .dataset import MultiViewDataset
from .errors import CalibrationError, ConfigurationError, NumericalError, OptimizationError

log = logging.getLogger(__name__)

FLOOR = 1e-12
SIGMA_BOUNDS = (1e-20, 1e20)
BISECTION_STEPS = 50
ENTROPY_TOL = 1e-5


@dataclass
class AffinityMatrix:
    values: np.ndarray
    kind: str  # "HighDimJoint" or "LowDimStudentT"
    perplexity: Optional[float] = None

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    @property
    def n(self):
        return self.values.shape[0]


@dataclass
class SneConfig:
    perplexity: float = 30.0
    n_iter: int = 1000
    learning_rate: float = 100.0
    momentum: float = 0.5
    final_momentum: float = 0.8
    momentum_switch: int = 250
    exaggeration: float = 4.0
    exaggeration_iters: int = 100
    d: int = 2
    seed: int = 0
    init_std: float = np.sqrt(0.1)
    min_rel_change: Optional[float] = None
    weight_freeze: int = 100

    def __post_init__(self):
        if self.perplexity <= 0:
            raise ConfigurationError("perplexity must be positive")
        if self.n_iter < 1:
            raise ConfigurationError("n_iter must be >= 1")
        if self.d < 1:
            raise ConfigurationError("output dimension must be >= 1")

    def momentum_at(self, t):
        return self.momentum if t < self.momentum_switch else self.final_momentum


@dataclass
class Embedding:
    """Low-dimensional coordinates plus provenance.

    ``index`` lists the dataset rows the coordinates belong to when some
    samples were dropped (ISOMAP on disconnected graphs); otherwise None.
    """

    coords: np.ndarray
    method: str
    config: dict = field(default_factory=dict)
    index: Optional[np.ndarray] = None
    cost: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    eigenvalues: Optional[np.ndarray] = None

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)
        if self.coords.ndim != 2 or self.coords.shape[1] < 1:
            raise ConfigurationError("embedding coordinates must be an (N, d) matrix with d >= 1")
        if not np.all(np.isfinite(self.coords)):
            raise OptimizationError(-1, "embedding contains non-finite coordinates")

    @property
    def n(self):
        return self.coords.shape[0]

    @property
    def d(self):
        return self.coords.shape[1]


def _values(a):
    return a.values if isinstance(a, AffinityMatrix) else np.asarray(a, dtype=float)


def as_weights(w, M) -> np.ndarray:
    """Validate a per-view weight vector (``None`` means uniform)."""
    if w is None:
        return np.full(M, 1.0 / M)
    w = np.asarray(w, dtype=float).ravel()
    if w.size != M:
        raise ConfigurationError(f"expected {M} view weights, got {w.size}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ConfigurationError("view weights must be finite and nonnegative")
    if abs(w.sum() - 1.0) > 1e-10:
        raise ConfigurationError(f"view weights must sum to 1, got {w.sum():.12g}")
    return w


def squared_distances(X):
    X = np.asarray(X, dtype=float)
    sq = np.einsum("ij,ij->i", X, X)
    D = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(D, 0.0, out=D)
    np.fill_diagonal(D, 0.0)
    return D


# --------------------------------------------------------------------------- high-dimensional affinities


def _entropies(D, log_sigma):
    """Conditional rows and their entropies (bits) for row-wise sigmas.

    ``D`` is (n, k) squared distances to the candidate neighbours; entries may
    be +inf. Rows are shifted by their minimum so tiny sigmas do not underflow.
    """
    finite = np.isfinite(D)
    shift = np.where(finite, D, np.inf).min(axis=1, keepdims=True)
    shift[~np.isfinite(shift)] = 0.0
    inv = 0.5 * np.exp(-2.0 * log_sigma)[:, None]
    P = np.exp(-(D - shift) * inv)
    P /= P.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0, P * np.log2(P), 0.0)
    return P, -terms.sum(axis=1)


def _calibrate(D, perplexity):
    """Bisection on log(sigma), all rows at once, at most BISECTION_STEPS rounds."""
    n = D.shape[0]
    target = np.log2(perplexity)
    lo = np.full(n, np.log(SIGMA_BOUNDS[0]))
    hi = np.full(n, np.log(SIGMA_BOUNDS[1]))
    best_log = np.zeros(n)
    best_err = np.full(n, np.inf)
    active = np.ones(n, dtype=bool)
    for _ in range(BISECTION_STEPS):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        mid = 0.5 * (lo[idx] + hi[idx])
        _, H = _entropies(D[idx], mid)
        err = H - target
        better = np.abs(err) < np.abs(best_err[idx])
        best_log[idx[better]] = mid[better]
        best_err[idx[better]] = err[better]
        done = np.abs(err) < ENTROPY_TOL
        active[idx[done]] = False
        too_wide = err > 0
        hi[idx[too_wide]] = mid[too_wide]
        lo[idx[~too_wide]] = mid[~too_wide]
    bad = np.flatnonzero(np.abs(best_err) >= ENTROPY_TOL)
    if bad.size:
        i = bad[0]
        raise CalibrationError(
            f"perplexity {perplexity} unattainable for sample {i}: closest entropy "
            f"{best_err[i] + target:.6f} bits vs target {target:.6f}")
    P, _ = _entropies(D, best_log)
    return np.exp(best_log), P


def calibrate_row(sq_distances, perplexity):
    """Find sigma_i so that 2**H(P_i) equals ``perplexity``.

    ``sq_distances`` holds the squared distances from sample i to every
    other sample (self excluded).

    Returns
    -------
    sigma : float
    row : ndarray
        Conditional probabilities p_{j|i}, same order as the input.
    """
    d = np.asarray(sq_distances, dtype=float)
    if d.ndim != 1 or d.size < 1:
        raise CalibrationError("need at least one neighbour distance")
    if np.any(d < 0) or np.any(np.isnan(d)):
        raise CalibrationError("squared distances must be nonnegative")
    if not np.isfinite(d).any():
        raise CalibrationError("all neighbours are at infinite distance")
    sigma, P = _calibrate(d[None, :], perplexity)
    return float(sigma[0]), P[0]


def conditional_affinities(X, perplexity):
    """Row-stochastic matrix with entry (i, j) = p_{j|i}; also returns sigmas."""
    X = np.asarray(X, dtype=float)
    N = X.shape[0]
    if not 0 < perplexity < N:
        raise ConfigurationError(f"perplexity must lie in (0, N={N}), got {perplexity}")
    D = squared_distances(X)
    mask = ~np.eye(N, dtype=bool)
    sigmas, rows = _calibrate(D[mask].reshape(N, N - 1), perplexity)
    P = np.zeros((N, N))
    P[mask] = rows.ravel()
    return P, sigmas


def joint_affinities(X, perplexity) -> AffinityMatrix:
    """Symmetrized p_ij = (p_{i|j} + p_{j|i}) / 2N."""
    X = np.asarray(X, dtype=float)
    N = X.shape[0]
    if N < 3:
        raise ConfigurationError("joint affinities need at least 3 samples")
    C, _ = conditional_affinities(X, perplexity)
    P = (C + C.T) / (2.0 * N)
    return AffinityMatrix(P, "HighDimJoint", float(perplexity))


# --------------------------------------------------------------------------- low-dimensional affinities


def _student_t_kernel(Y):
    """(1 + ||y_i - y_j||^2)^-1 with a zero diagonal, built in place."""
    sq = np.einsum("ij,ij->i", Y, Y)
    num = Y @ Y.T
    num *= -2.0
    num += sq[:, None]
    num += sq[None, :]
    np.maximum(num, 0.0, out=num)
    num += 1.0
    np.reciprocal(num, out=num)
    np.fill_diagonal(num, 0.0)
    return num


_LOG_FLOOR = np.log(FLOOR)


def _log_q(num, total):
    """Elementwise log(max(q, FLOOR)); the diagonal is set to zero."""
    with np.errstate(divide="ignore"):
        out = np.log(num)
    out -= np.log(total)
    np.maximum(out, _LOG_FLOOR, out=out)
    np.fill_diagonal(out, 0.0)
    return out


def student_t_affinities(Y) -> AffinityMatrix:
    Y = Y.coords if isinstance(Y, Embedding) else np.asarray(Y, dtype=float)
    num = _student_t_kernel(Y)
    num = 0.5 * (num + num.T)  # matmul rounding is not exactly symmetric
    return AffinityMatrix(num / num.sum(), "LowDimStudentT")


# --------------------------------------------------------------------------- cost and gradient


def kl_divergence(P, Q):
    """KL(P || Q) with 0 log 0 = 0 and logs floored at 1e-12."""
    P, Q = _values(P), _values(Q)
    if np.any((Q <= 0) & (P > 0)):
        raise NumericalError("q_ij = 0 where p_ij > 0")
    mask = P > 0
    return float(np.sum(P[mask] * (np.log(np.maximum(P[mask], FLOOR)) - np.log(np.maximum(Q[mask], FLOOR)))))


def multisne_cost(P_list, Q, w=None) -> float:
    """Weighted sum over views of KL(P^m || Q)."""
    w = as_weights(w, len(P_list))
    return float(sum(w_m * kl_divergence(P, Q) for w_m, P in zip(w, P_list)))


def _view_gradient(P, Qnum, num, Y, scale, exaggeration=1.0):
    """Gradient of ``scale * KL(P || Q)``; ``Qnum`` is Q * num precomputed."""
    A = P * num
    if exaggeration != 1.0:
        A *= exaggeration
    A -= Qnum
    return (4.0 * scale) * (A.sum(axis=1)[:, None] * Y - A @ Y)


def multisne_gradient(P_list, Y, w=None) -> np.ndarray:
    """Gradient of ``multisne_cost`` with respect to Y, summed view by view."""
    Y = np.asarray(Y, dtype=float)
    w = as_weights(w, len(P_list))
    num = _student_t_kernel(Y)
    Qnum = num * (num / num.sum())
    G = np.zeros_like(Y)
    for w_m, P in zip(w, P_list):
        G += _view_gradient(_values(P), Qnum, num, Y, w_m)
    return G


def update_weights(kl) -> np.ndarray:
    """KL-driven view weights: normalize k, take 1 - k, renormalize to sum 1."""
    k = np.asarray(kl, dtype=float).ravel()
    M = k.size
    if M == 0:
        raise ConfigurationError("empty KL vector")
    if np.any(k < 0) or not np.all(np.isfinite(k)):
        raise ConfigurationError("KL divergences must be finite and nonnegative")
    total = k.sum()
    if total <= 0:
        return np.full(M, 1.0 / M)
    raw = 1.0 - k / total
    s = raw.sum()
    if s <= 0:  # M == 1
        return np.ones(M)
    return raw / s


# --------------------------------------------------------------------------- optimizer


def _optimize(P_list, N, cfg: SneConfig, w, auto_weights, method):
    rng = np.random.default_rng(cfg.seed)
    Y = rng.normal(0.0, cfg.init_std, size=(N, cfg.d))
    Y_prev = Y.copy()
    M = len(P_list)
    w = np.array(w, dtype=float)
    # sum p log p per view, so KL_m = neg_entropy[m] - sum P_m log Q
    neg_entropy = np.array([float(np.sum(P[P > 0] * np.log(np.maximum(P[P > 0], FLOOR)))) for P in P_list])

    def view_kl(num, total):
        logQ = _log_q(num, total)
        return np.array([neg_entropy[m] - float(np.vdot(P_list[m], logQ)) for m in range(M)])

    num = _student_t_kernel(Y)
    total = num.sum()
    Q = num / total
    kl = view_kl(num, total)
    costs = [float(w @ kl)]
    trajectory = [w.copy()] if auto_weights else None
    for t in range(1, cfg.n_iter + 1):
        exag = cfg.exaggeration if t <= cfg.exaggeration_iters else 1.0
        Qnum = Q * num
        G = np.zeros_like(Y)
        for m in range(M):
            G += _view_gradient(P_list[m], Qnum, num, Y, w[m], exag)
        step = Y - Y_prev
        Y_prev = Y
        Y = Y - cfg.learning_rate * G + cfg.momentum_at(t) * step
        if not np.all(np.isfinite(Y)):
            raise OptimizationError(t)
        num = _student_t_kernel(Y)
        total = num.sum()
        Q = num / total
        kl = view_kl(num, total)
        if auto_weights and t > cfg.weight_freeze:
            w = update_weights(kl)
        if auto_weights:
            trajectory.append(w.copy())
        costs.append(float(w @ kl))
        if (cfg.min_rel_change is not None and t > cfg.exaggeration_iters and
                abs(costs[-2] - costs[-1]) <= cfg.min_rel_change * max(abs(costs[-2]), FLOOR)):
            log.debug("%s: relative cost change below %g at iteration %d", method, cfg.min_rel_change, t)
            break
    return Embedding(Y, method, asdict(cfg), cost=np.array(costs),
                     weights=None if trajectory is None else np.array(trajectory))


def _affinities_for(views, perplexity):
    return [joint_affinities(X, perplexity).values for X in views]


def run_multisne(ds: MultiViewDataset, cfg: SneConfig = SneConfig(), weights=None) -> Embedding:
    """multi-SNE: one embedding minimizing the weighted sum of per-view KLs.

    ``weights`` is None (uniform), a length-M vector, or ``"auto"`` for
    KL-driven updates after ``cfg.weight_freeze`` iterations; the weight
    trajectory is then stored on the returned embedding.
    """
    auto = isinstance(weights, str)
    if auto and weights != "auto":
        raise ConfigurationError(f"unknown weights mode {weights!r}")
    w = as_weights(None if auto else weights, ds.n_views)
    P_list = _affinities_for(ds.views, cfg.perplexity)
    return _optimize(P_list, ds.n_samples, cfg, w, auto, "multisne")


def combined_affinities(P_list, beta=None) -> np.ndarray:
    beta = as_weights(beta, len(P_list))
    P = np.zeros_like(_values(P_list[0]))
    for b, Pm in zip(beta, P_list):
        P += b * _values(Pm)
    return P


def run_msne(ds: MultiViewDataset, cfg: SneConfig = SneConfig(), beta=None) -> Embedding:
    """m-SNE: t-SNE on the beta-weighted mixture of the per-view joint P."""
    P = combined_affinities(_affinities_for(ds.views, cfg.perplexity), beta)
    return _optimize([P], ds.n_samples, cfg, np.ones(1), False, "msne")


def run_tsne(X, cfg: SneConfig = SneConfig()) -> Embedding:
    """Single-view exact t-SNE. A MultiViewDataset is column-concatenated first."""
    method = "tsne"
    if isinstance(X, MultiViewDataset):
        X = X.concatenated() if X.n_views > 1 else X.views[0]
        method = "tsne-concat"
    X = np.asarray(X, dtype=float)
    P = joint_affinities(X, cfg.perplexity).values
    return _optimize([P], X.shape[0], cfg, np.ones(1), False, method)
