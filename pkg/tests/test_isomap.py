import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import sparse
from scipy.linalg import orthogonal_procrustes
from scipy.spatial.distance import cdist

from mvmanifold.dataset import MultiViewDataset
from mvmanifold.errors import DegenerateInputError
from mvmanifold.isomap import (NeighborGraph, build_graph, classical_embed, combined_graph,
                               largest_component, run_isomap, run_misomap, run_multiisomap,
                               shortest_paths)


def floyd_warshall(W):
    """Dense all-pairs oracle; W[i, j] = inf where there is no edge."""
    D = W.copy()
    np.fill_diagonal(D, 0.0)
    for k in range(len(D)):
        D = np.minimum(D, D[:, [k]] + D[[k], :])
    return D


def union_find_components(n, edges):
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in edges:
        parent[find(i)] = find(j)
    return len({find(i) for i in range(n)})


def _random_graph(rng, n):
    X = rng.normal(size=(n, 2))
    mask = np.triu(rng.uniform(size=(n, n)) < 0.15, 1)
    mask |= mask.T
    lengths = rng.uniform(0.1, 5, size=(n, n))
    lengths = np.triu(lengths, 1) + np.triu(lengths, 1).T
    rows, cols = np.nonzero(mask)
    E = sparse.csr_matrix((lengths[rows, cols], (rows, cols)), shape=(n, n))
    W = np.where(mask, lengths, np.inf)
    return NeighborGraph(E, 0), W, X


def test_path_graph():
    g = build_graph(np.arange(5.0)[:, None], 1)
    A = g.edges.toarray()
    assert np.array_equal(A, np.diag(np.ones(4), 1) + np.diag(np.ones(4), -1))
    assert shortest_paths(g)[0, 2] == 2.0


def test_complete_graph_equals_direct_lengths(rng):
    X = rng.normal(size=(8, 3))
    g = build_graph(X, 7)
    assert g.edges.nnz == 56
    np.testing.assert_allclose(shortest_paths(g), cdist(X, X), atol=1e-12)


def test_two_far_clusters():
    rng = np.random.default_rng(3)
    X = np.vstack([rng.normal(size=(10, 2)), rng.normal(size=(10, 2)) + 100])
    g = build_graph(X, 3)
    rows, cols = g.edges.nonzero()
    assert g.n_components == union_find_components(20, zip(rows, cols)) == 2


def test_symmetrized_edges(rng):
    X = rng.normal(size=(30, 3))
    g = build_graph(X, 4)
    A = g.edges.toarray()
    assert np.array_equal(A, A.T)
    assert np.all(A[A > 0] > 0) and np.all(g.edges.data > 0)
    from mvmanifold.lle import knn
    nb = knn(X, 4)
    mask = np.zeros((30, 30), dtype=bool)
    for i in range(30):
        mask[i, nb[i]] = True
    assert np.array_equal(A > 0, mask | mask.T)


def test_duplicates_stay_connected():
    X = np.array([[0.0], [0.0], [1.0], [2.0]])
    g = build_graph(X, 1)
    assert g.n_components == 2 or shortest_paths(g)[0, 1] == 0.0
    g = build_graph(X, 2)
    assert g.n_components == 1 and shortest_paths(g)[0, 1] == 0.0


@pytest.mark.parametrize("seed", range(50))
def test_dijkstra_matches_floyd_warshall(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 51))
    g, W, _ = _random_graph(rng, n)
    D = shortest_paths(g)
    assert np.array_equal(np.isinf(D), np.isinf(floyd_warshall(W)))
    finite = np.isfinite(D)
    np.testing.assert_allclose(D[finite], floyd_warshall(W)[finite], rtol=1e-12, atol=1e-12)


def test_geodesic_triangle_inequality(rng):
    X = rng.normal(size=(60, 3))
    D = shortest_paths(build_graph(X, 6))
    assert np.array_equal(D, D.T) and np.all(np.diag(D) == 0)
    i, j, k = rng.integers(0, 60, size=(3, 1000))
    assert np.all(D[i, j] <= D[i, k] + D[k, j] + 1e-12)


def test_mds_collinear():
    X = np.array([[0.0], [1.0], [2.0]])
    Y, vals = classical_embed(cdist(X, X), 1)
    np.testing.assert_allclose(cdist(Y, Y), cdist(X, X), atol=1e-8)


def test_mds_square_congruent():
    S = np.array([[0, 0], [1, 0], [1, 1], [0, 1.0]])
    Y, _ = classical_embed(cdist(S, S), 2)
    Sc = S - S.mean(axis=0)
    R, _ = orthogonal_procrustes(Y, Sc)
    assert np.abs(Y @ R - Sc).max() < 1e-8
    np.testing.assert_allclose(Y.mean(axis=0), 0, atol=1e-10)


@given(st.integers(4, 30), st.integers(1, 4), st.integers(0, 10_000))
def test_mds_reconstructs_euclidean(n, d, seed):
    X = np.random.default_rng(seed).normal(size=(n, d)) * 3
    if n <= d:
        return
    Y, _ = classical_embed(cdist(X, X), d)
    assert np.abs(cdist(Y, Y) - cdist(X, X)).max() < 1e-8


def test_mds_pads_low_rank():
    X = np.array([[0.0], [1.0], [2.0], [4.0]])
    with pytest.warns(RuntimeWarning):
        Y, _ = classical_embed(cdist(X, X), 2)
    assert np.all(Y[:, 1] == 0)
    np.testing.assert_allclose(cdist(Y, Y), cdist(X, X), atol=1e-8)


def test_literal_eigen_option(rng):
    X = rng.normal(size=(10, 2))
    D = cdist(X, X)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        Y, vals = classical_embed(D, 2, literal=True)
    top = np.linalg.eigvalsh(D)[-1]
    assert vals[0] == pytest.approx(top)
    assert not np.allclose(cdist(Y, Y), D, atol=1e-3)


def test_mds_rejects_infinite():
    with pytest.raises(DegenerateInputError):
        classical_embed(np.array([[0, np.inf], [np.inf, 0]]), 1)


def test_disconnected_restricted_to_largest():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(size=(15, 2)), rng.normal(size=(8, 2)) + 100])
    emb = run_isomap(X, 3)
    np.testing.assert_array_equal(emb.index, np.arange(15))
    assert emb.coords.shape == (15, 2)
    np.testing.assert_array_equal(largest_component(build_graph(X, 3)), np.arange(15))


def test_single_view_reductions(rng):
    X = rng.normal(size=(40, 3))
    ref = run_isomap(X, 6)
    ds = MultiViewDataset([X])
    np.testing.assert_array_equal(run_multiisomap(ds, 6).coords, ref.coords)
    # the averaging path with one view also reproduces the graph exactly
    g1, g2 = build_graph(X, 6), combined_graph([X], 6)
    assert (g1.edges != g2.edges).nnz == 0
    np.testing.assert_allclose(run_misomap(ds, 6).coords, ref.coords - ref.coords.mean(axis=0), atol=1e-12)


def test_identical_views(rng):
    X = rng.normal(size=(40, 3))
    ref = run_isomap(X, 6).coords
    Y = run_multiisomap(MultiViewDataset([X, X, X]), 6).coords
    R, _ = orthogonal_procrustes(Y, ref)
    assert np.abs(Y @ R - ref).max() < 1e-8
    g = combined_graph([X, X], 6)
    np.testing.assert_allclose(g.edges.toarray(), build_graph(X, 6).edges.toarray(), rtol=1e-14)


def test_combined_graph_union_and_average(rng):
    A, B = rng.normal(size=(25, 2)), rng.normal(size=(25, 2))
    gA, gB = build_graph(A, 3), build_graph(B, 3)
    g = combined_graph([A, B], 3, standardize=False)
    union = (gA.edges.toarray() > 0) | (gB.edges.toarray() > 0)
    assert np.array_equal(g.edges.toarray() > 0, union)
    expected = 0.5 * (cdist(A, A) + cdist(B, B))
    np.testing.assert_allclose(g.edges.toarray()[union], expected[union], rtol=1e-12)


def test_standardization_removes_scale(rng):
    A, B = rng.normal(size=(25, 2)), rng.normal(size=(25, 2))
    g1 = combined_graph([A, B], 3)
    g2 = combined_graph([A, B * 1000], 3)
    # scaling one view only rescales the pooled units
    r = g2.edges.data / g1.edges.data
    np.testing.assert_allclose(r, r[0], rtol=1e-10)


def test_misomap_weighted(rng):
    views = [rng.normal(size=(30, 3)) for _ in range(2)]
    ref = run_isomap(views[0], 6).coords
    Y = run_misomap(MultiViewDataset(views), 6, [1.0, 0.0]).coords
    np.testing.assert_allclose(Y, ref - ref.mean(axis=0), atol=1e-10)
