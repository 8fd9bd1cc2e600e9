import numpy as np
import pytest

import oracles
from pmdrom import embed_points, geodesic_distances, knn_graph, spectral_embedding
from pmdrom.embedding import (
    TransitionMatrix,
    WeightedGraph,
    affinity,
    default_n_neighbors,
    markov_normalize,
    select_bandwidth,
    transition_spectrum,
)
from pmdrom.exceptions import (
    AllZeroDistancesError,
    DegeneratePointsError,
    DisconnectedGraphError,
    EigSolveFailureError,
    RankTooLargeError,
    ZeroRowError,
)


def test_collinear_knn_edges():
    # points 0, 1, 3 on a line with k=1: edges 0-1 (w=1) and 1-3 (w=2)
    pts = np.array([[0.0, 1.0, 3.0]])
    graph = knn_graph(pts, n_neighbors=1)
    w = graph.weights
    assert w[0, 1] == 1.0 and w[1, 0] == 1.0
    assert w[1, 2] == 2.0 and w[2, 1] == 2.0
    assert np.isinf(w[0, 2])


def test_complete_graph_at_max_k(rng):
    pts = rng.normal(size=(2, 6))
    graph = knn_graph(pts, n_neighbors=5)
    off_diag = ~np.eye(6, dtype=bool)
    assert np.all(np.isfinite(graph.weights[off_diag]))


def test_two_clusters_raise_k_until_connected(rng):
    left = rng.normal(size=(2, 6)) * 0.01
    right = rng.normal(size=(2, 6)) * 0.01 + 100.0
    graph = knn_graph(np.hstack([left, right]), n_neighbors=2)
    assert graph.n_neighbors > 2
    assert oracles.graph_is_connected(graph.weights)


def test_degenerate_points_rejected():
    with pytest.raises(DegeneratePointsError):
        knn_graph(np.zeros((2, 5)))


def test_default_neighbor_rule():
    assert default_n_neighbors(2) == 2
    assert default_n_neighbors(30) == 4  # ceil(log 30) = ceil(3.40) = 4


def test_geodesics_path_graph():
    w = np.array([[0.0, 1.0, np.inf],
                  [1.0, 0.0, 2.0],
                  [np.inf, 2.0, 0.0]])
    d = geodesic_distances(WeightedGraph(weights=w, n_neighbors=1))
    assert d[0, 2] == 3.0


def test_geodesics_shortcut():
    # direct edge 5 loses to the 1+1 two-hop path
    w = np.array([[0.0, 1.0, 5.0],
                  [1.0, 0.0, 1.0],
                  [5.0, 1.0, 0.0]])
    d = geodesic_distances(WeightedGraph(weights=w, n_neighbors=2))
    assert d[0, 2] == 2.0


def test_geodesics_match_dijkstra(rng):
    for _ in range(25):
        n = int(rng.integers(4, 25))
        w = oracles.random_connected_graph(rng, n, extra_edges=n)
        ours = geodesic_distances(WeightedGraph(weights=w.copy(), n_neighbors=1))
        ref = oracles.dijkstra_all_pairs(w)
        assert np.allclose(ours, ref, rtol=0, atol=1e-12)
        # shortest paths never exceed direct edges and obey the triangle inequality
        assert np.all(ours <= w + 1e-12)
        assert np.all(ours[:, :, None] <= ours[:, None, :] + ours[None, :, :] + 1e-9)


def test_disconnected_graph_rejected():
    w = np.full((3, 3), np.inf)
    np.fill_diagonal(w, 0.0)
    w[0, 1] = w[1, 0] = 1.0
    with pytest.raises(DisconnectedGraphError):
        geodesic_distances(WeightedGraph(weights=w, n_neighbors=1))


def test_bandwidth_median_rule():
    d = np.array([[0.0, 1.0, 2.0],
                  [1.0, 0.0, 3.0],
                  [2.0, 3.0, 0.0]])
    # off-diagonal squares {1, 4, 9}: median 4, bandwidth 2
    assert select_bandwidth(d) == 2.0
    equal = np.full((3, 3), 7.0)
    np.fill_diagonal(equal, 0.0)
    assert select_bandwidth(equal) == 7.0
    with pytest.raises(AllZeroDistancesError):
        select_bandwidth(np.zeros((3, 3)))


def test_affinity_values():
    d = np.array([[0.0, 2.0], [2.0, 0.0]])
    a = affinity(d, 2.0)
    assert a[0, 0] == 1.0
    assert np.isclose(a[0, 1], np.exp(-1.0))
    # monotone decrease in distance
    assert affinity(np.array([[0.0, 1.0], [1.0, 0.0]]), 2.0)[0, 1] > a[0, 1]


def test_markov_normalization():
    p = markov_normalize(np.ones((2, 2)))
    assert np.allclose(p.matrix, 0.5)
    e = np.exp(-1.0)
    p = markov_normalize(np.array([[1.0, e], [e, 1.0]]))
    assert np.allclose(p.matrix[0], [1 / (1 + e), e / (1 + e)])
    with pytest.raises(ZeroRowError):
        markov_normalize(np.array([[0.0, 0.0], [0.0, 1.0]]))


def test_markov_invariants(rng):
    for _ in range(10):
        d = oracles.random_connected_graph(rng, int(rng.integers(4, 12)), extra_edges=6)
        geo = oracles.dijkstra_all_pairs(d)
        trans = markov_normalize(affinity(geo, select_bandwidth(geo)))
        assert np.allclose(trans.matrix.sum(axis=1), 1.0, atol=1e-12)
        vals, vecs = transition_spectrum(trans)
        assert vals[0] <= 1 + 1e-10 and vals[-1] >= -1 - 1e-10
        assert np.isclose(vals[0], 1.0, atol=1e-10)
        # top eigenvector is constant
        assert np.allclose(vecs[:, 0], vecs[0, 0], atol=1e-8)
        # eigenvalues of P match those of the symmetrized route (direct solve check)
        direct = np.sort(np.linalg.eigvals(trans.matrix).real)
        assert np.allclose(direct, np.sort(vals), atol=1e-10)


def test_two_point_embedding_analytic():
    # P = [[.6,.4],[.4,.6]]: eigenvalues 1 and 0.2; nontrivial vector [1,-1]/sqrt(2)
    trans = TransitionMatrix(matrix=np.array([[0.6, 0.4], [0.4, 0.6]]),
                             degrees=np.ones(2))
    emb = spectral_embedding(trans, embed_dim=1, power=1)
    assert np.allclose(emb.eigenvalues, [0.2], atol=1e-12)
    assert np.allclose(emb.coordinates, [[0.2 / np.sqrt(2), -0.2 / np.sqrt(2)]])
    assert np.allclose(emb.coordinates[0], [0.141421, -0.141421], atol=1e-6)
    # diffusion power 2 scales by the eigenvalue again
    emb2 = spectral_embedding(trans, embed_dim=1, power=2)
    assert np.allclose(emb2.coordinates, 0.2 * emb.coordinates)
    assert np.allclose(emb2.coordinates[0], [0.028284, -0.028284], atol=1e-6)


def test_embed_dim_bounds():
    trans = TransitionMatrix(matrix=np.array([[0.6, 0.4], [0.4, 0.6]]),
                             degrees=np.ones(2))
    with pytest.raises(RankTooLargeError):
        spectral_embedding(trans, embed_dim=2)
    with pytest.raises(RankTooLargeError):
        spectral_embedding(trans, embed_dim=1, power=0)


def test_nonpositive_eigenvalue_rejected():
    # maximally mixing chain: second eigenvalue is 0
    trans = markov_normalize(np.ones((3, 3)))
    with pytest.raises(EigSolveFailureError):
        spectral_embedding(trans, embed_dim=1)


def test_permutation_equivariance(rng):
    pts = rng.normal(size=(3, 9))
    emb, _ = embed_points(pts, embed_dim=2, n_neighbors=3)
    perm = rng.permutation(9)
    emb_p, _ = embed_points(pts[:, perm], embed_dim=2, n_neighbors=3)
    assert np.allclose(emb_p.coordinates, emb.coordinates[:, perm], atol=1e-9)


def test_embed_points_pipeline(rng):
    pts = rng.normal(size=(4, 10))
    emb, info = embed_points(pts, embed_dim=2)
    assert emb.coordinates.shape == (2, 10)
    assert info["bandwidth"] > 0
    assert np.allclose(info["transition"].matrix.sum(axis=1), 1.0, atol=1e-12)
    # rows are eigenvalue-scaled unit eigenvectors
    norms = np.linalg.norm(emb.coordinates, axis=1)
    assert np.allclose(norms, emb.eigenvalues, atol=1e-10)
