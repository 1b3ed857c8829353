import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import subspace_angles

from mvmanifold.dataset import MultiViewDataset
from mvmanifold.errors import ConfigurationError
from mvmanifold.lle import (average_embeddings, consensus_weights, embed_from_weights, knn,
                            procrustes_align, reconstruction_error, reconstruction_weights, run_lle,
                            run_mlle, run_multille)


def test_knn_hand_table():
    X = np.array([[0.0], [1.0], [3.0], [7.0]])
    assert knn(X, 1)[:, 0].tolist() == [1, 0, 1, 2]


def test_knn_full_and_ties():
    X = np.array([[0.0], [1.0], [-1.0], [2.0]])
    nb = knn(X, 3)
    for i in range(4):
        assert sorted(nb[i]) == [j for j in range(4) if j != i]
    # 1 and 2 are both at distance 1 from 0; the lower index wins
    assert nb[0, 0] == 1


def test_knn_duplicates_first():
    X = np.array([[0.0, 0.0], [5.0, 5.0], [0.0, 0.0], [1.0, 1.0]])
    nb = knn(X, 1)
    assert nb[0, 0] == 2 and nb[2, 0] == 0


def test_knn_bounds():
    with pytest.raises(ConfigurationError):
        knn(np.zeros((4, 2)), 4)
    with pytest.raises(ConfigurationError):
        knn(np.zeros((4, 2)), 0)


def test_midpoint_weights():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
    W = reconstruction_weights(X, np.array([[1, 2], [0, 2], [0, 1]])).toarray()
    np.testing.assert_allclose(W[1], [0.5, 0, 0.5], atol=1e-12)
    # collinear triple reconstructs exactly
    assert reconstruction_error(X, W)[1] < 1e-20


def _lagrange_oracle(X, i, nbrs):
    # minimize ||x_i - Z' w||^2 s.t. 1'w = 1 via the KKT system
    Z = X[nbrs]
    K = len(nbrs)
    A = np.zeros((K + 1, K + 1))
    A[:K, :K] = 2 * Z @ Z.T
    A[:K, K] = 1
    A[K, :K] = 1
    b = np.concatenate([2 * Z @ X[i], [1.0]])
    return np.linalg.solve(A, b)[:K]


def test_weights_match_constrained_least_squares(rng):
    X = rng.normal(size=(8, 3))
    nb = knn(X, 3)
    W = reconstruction_weights(X, nb).toarray()
    for i in range(8):
        np.testing.assert_allclose(W[i, nb[i]], _lagrange_oracle(X, i, nb[i]), atol=1e-8)


@given(st.integers(6, 10), st.integers(2, 4), st.integers(0, 10_000))
def test_weights_beat_random_feasible_rows(n, K, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 5))
    nb = knn(X, K)
    W = reconstruction_weights(X, nb).toarray()
    np.testing.assert_allclose(W.sum(axis=1), 1.0, atol=1e-10)
    assert np.all(np.diag(W) == 0)
    err = reconstruction_error(X, W)
    for i in range(n):
        probes = rng.normal(size=(1000, K)) * 2
        probes += (1 - probes.sum(axis=1, keepdims=True)) / K
        res = X[i] - probes @ X[nb[i]]
        assert err[i] <= np.einsum("ij,ij->i", res, res).min() + 1e-12


def test_regularized_when_k_exceeds_dim(rng):
    X = rng.normal(size=(20, 2))
    W = reconstruction_weights(X, knn(X, 6))
    assert np.all(np.isfinite(W.W.data))
    np.testing.assert_allclose(np.asarray(W.W.sum(axis=1)).ravel(), 1.0, atol=1e-10)
    mask = W.toarray() != 0
    for i, nb in enumerate(knn(X, 6)):
        assert set(np.flatnonzero(mask[i])) <= set(nb)


def test_embedding_properties(rng):
    X = rng.normal(size=(60, 3))
    W = reconstruction_weights(X, knn(X, 8))
    Y, vals = embed_from_weights(W, 2)
    np.testing.assert_allclose(Y.mean(axis=0), 0, atol=1e-8)
    np.testing.assert_allclose(Y.T @ Y, np.eye(2), atol=1e-8)
    I_W = np.eye(60) - W.toarray()
    M = I_W.T @ I_W
    for j in range(2):
        assert np.linalg.norm(M @ Y[:, j] - vals[j] * Y[:, j]) < 1e-8
    assert 0 < vals[0] <= vals[1]


def test_polygon_cyclic_symmetry():
    # each vertex is the midpoint of its two neighbours' projection; the
    # circulant spectrum puts the first Fourier pair at the bottom
    n = 12
    W = np.zeros((n, n))
    for i in range(n):
        W[i, (i - 1) % n] = W[i, (i + 1) % n] = 0.5
    Y, vals = embed_from_weights(W, 2)
    expected = (1 - np.cos(2 * np.pi / n)) ** 2
    np.testing.assert_allclose(vals, [expected, expected], atol=1e-10)
    radii = np.linalg.norm(Y, axis=1)
    np.testing.assert_allclose(radii, radii[0], atol=1e-10)
    angles = np.unwrap(np.arctan2(Y[:, 1], Y[:, 0]))
    steps = np.abs(np.diff(angles))
    np.testing.assert_allclose(steps, 2 * np.pi / n, atol=1e-8)


def test_translation_invariance(rng):
    X = rng.normal(size=(40, 3))
    Y1 = run_lle(X, 6).coords
    Y2 = run_lle(X + 100.0, 6).coords
    assert np.max(subspace_angles(Y1, Y2)) < 1e-6


def test_single_view_reductions(rng):
    X = rng.normal(size=(40, 3))
    ref = run_lle(X, 6).coords
    ds = MultiViewDataset([X])
    np.testing.assert_allclose(run_multille(ds, 6).coords, ref, atol=1e-12)
    np.testing.assert_allclose(run_mlle(ds, 6).coords, ref - ref.mean(axis=0), atol=1e-12)


def test_identical_views(rng):
    X = rng.normal(size=(40, 3))
    ref = run_lle(X, 6).coords
    Y = run_multille(MultiViewDataset([X, X, X]), 6).coords
    assert np.max(subspace_angles(Y, ref)) < 1e-8


def test_consensus_rows_sum_to_one(rng):
    Ws = [reconstruction_weights(X, knn(X, 5)) for X in (rng.normal(size=(30, 4)) for _ in range(3))]
    W = consensus_weights(Ws, [0.2, 0.3, 0.5])
    np.testing.assert_allclose(np.asarray(W.sum(axis=1)).ravel(), 1.0, atol=1e-10)


def test_mlle_degenerate_beta(rng):
    views = [rng.normal(size=(40, 3)) for _ in range(2)]
    ref = run_lle(views[0], 6).coords
    Y = run_mlle(MultiViewDataset(views), 6, [1.0, 0.0]).coords
    np.testing.assert_allclose(Y, ref - ref.mean(axis=0), atol=1e-12)


def test_procrustes_recovers_rotation(rng):
    R = np.linalg.qr(rng.normal(size=(2, 2)))[0]
    Y = rng.normal(size=(30, 2))
    Y -= Y.mean(axis=0)
    np.testing.assert_allclose(procrustes_align(Y @ R, Y), Y, atol=1e-10)
    np.testing.assert_allclose(average_embeddings([Y, Y @ R]), Y, atol=1e-10)


def test_embedding_bounds(rng):
    with pytest.raises(ConfigurationError):
        embed_from_weights(np.eye(3), 3)
