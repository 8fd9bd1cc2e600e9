"""Probabilistic manifold embedding of residual columns.

Pipeline: symmetrized k-nearest-neighbor graph on the columns, all-pairs
geodesics by Floyd-Warshall, Gaussian affinity with a median-rule bandwidth,
row-stochastic normalization, and a spectral embedding from the leading
nontrivial eigenvectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.spatial.distance import cdist

from .exceptions import (
    AllZeroDistancesError,
    DegeneratePointsError,
    DisconnectedGraphError,
    EigSolveFailureError,
    RankTooLargeError,
    ShapeMismatchError,
    ZeroRowError,
)
from .validation import as_float_matrix, check_square

#: Retained eigenvalues must exceed this fraction of the trivial eigenvalue;
#: anything smaller is numerically zero and the embedding dimension is too
#: large for the data.
EIG_FLOOR = 1e-12


@dataclass
class WeightedGraph:
    """Undirected graph with Euclidean edge lengths.

    ``weights[i, j]`` is the edge length, ``inf`` where no edge exists; the
    diagonal is zero. ``n_neighbors`` is the neighbor count actually used
    (it may exceed the requested one when connectivity required it).
    """

    weights: np.ndarray
    n_neighbors: int

    @property
    def n_nodes(self) -> int:
        return self.weights.shape[0]


def default_n_neighbors(n_points: int) -> int:
    """Neighborhood size max(2, ceil(log n)) used when none is given."""
    return max(2, math.ceil(math.log(n_points)))


def _is_connected(adjacency: np.ndarray) -> bool:
    # breadth-first sweep over the boolean adjacency
    n = adjacency.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    frontier = np.array([0])
    while frontier.size:
        reachable = adjacency[frontier].any(axis=0) & ~seen
        seen |= reachable
        frontier = np.flatnonzero(reachable)
    return bool(seen.all())


def knn_graph(points, n_neighbors: int | None = None) -> WeightedGraph:
    """Symmetrized union k-nearest-neighbor graph on matrix columns.

    An edge {i, j} exists when i is among the k nearest neighbors of j or
    vice versa; its weight is the Euclidean distance. If the union graph is
    disconnected, k is raised until it connects (k = n-1 always connects).

    Parameters
    ----------
    points : ndarray, shape (dim, n_points)
        One column per point.
    n_neighbors : int, optional
        Requested k; defaults to max(2, ceil(log n_points)).

    Returns
    -------
    WeightedGraph
    """
    pts = as_float_matrix(points, "points")
    n = pts.shape[1]
    if n < 2:
        raise ShapeMismatchError("need at least two points")
    dist = cdist(pts.T, pts.T)
    if not np.any(dist > 0):
        raise DegeneratePointsError("all points are identical")

    k = default_n_neighbors(n) if n_neighbors is None else int(n_neighbors)
    if not 1 <= k:
        raise ShapeMismatchError("n_neighbors must be positive")
    k = min(k, n - 1)

    order = np.argsort(dist, axis=1, kind="stable")
    while True:
        adjacency = np.zeros((n, n), dtype=bool)
        for i in range(n):
            neighbors = [j for j in order[i] if j != i][:k]
            adjacency[i, neighbors] = True
        adjacency |= adjacency.T
        if _is_connected(adjacency) or k >= n - 1:
            break
        k += 1

    weights = np.where(adjacency, dist, np.inf)
    np.fill_diagonal(weights, 0.0)
    return WeightedGraph(weights=weights, n_neighbors=k)


def geodesic_distances(graph: WeightedGraph) -> np.ndarray:
    """All-pairs shortest-path distances by Floyd-Warshall.

    Pivots are processed in index order; within a pivot the relaxation is a
    single vectorized minimum, so the result is deterministic.

    Returns
    -------
    ndarray, shape (n, n)
        Symmetric, zero diagonal.
    """
    d = check_square(np.array(graph.weights, dtype=np.float64), "weights")
    np.fill_diagonal(d, 0.0)
    n = d.shape[0]
    for k in range(n):
        np.minimum(d, d[:, k, None] + d[None, k, :], out=d)
    if np.isinf(d).any():
        raise DisconnectedGraphError("graph is disconnected; geodesics undefined")
    return d


def select_bandwidth(distances: np.ndarray) -> float:
    """Median-rule kernel bandwidth: sqrt of the median off-diagonal squared distance."""
    d = check_square(np.asarray(distances, dtype=np.float64), "distances")
    iu = np.triu_indices(d.shape[0], k=1)
    squared = d[iu] ** 2
    if squared.size == 0:
        raise ShapeMismatchError("need at least two points")
    med = float(np.median(squared))
    if med <= 0.0:
        raise AllZeroDistancesError("all off-diagonal distances are zero")
    return math.sqrt(med)


def affinity(distances: np.ndarray, bandwidth: float) -> np.ndarray:
    """Gaussian affinity exp(-d_ij^2 / bandwidth^2) with unit diagonal."""
    d = check_square(np.asarray(distances, dtype=np.float64), "distances")
    if not bandwidth > 0:
        raise AllZeroDistancesError("bandwidth must be positive")
    return np.exp(-((d / bandwidth) ** 2))


@dataclass
class TransitionMatrix:
    """Row-stochastic Markov matrix with the degrees that normalized it."""

    matrix: np.ndarray
    degrees: np.ndarray
    bandwidth: float | None = None
    power: int = 1


def markov_normalize(affinities: np.ndarray, bandwidth: float | None = None) -> TransitionMatrix:
    """Row-normalize a nonnegative symmetric affinity matrix."""
    a = check_square(np.asarray(affinities, dtype=np.float64), "affinities")
    if np.any(a < 0):
        raise ZeroRowError("affinities must be nonnegative")
    degrees = a.sum(axis=1)
    if np.any(degrees <= 0):
        raise ZeroRowError("a row of the affinity matrix sums to zero")
    return TransitionMatrix(matrix=a / degrees[:, None], degrees=degrees, bandwidth=bandwidth)


@dataclass
class EmbeddingMatrix:
    """Spectral embedding coordinates of the graph nodes.

    Row k of ``coordinates`` is eigenvalue[k]**power times the k-th
    nontrivial unit-norm eigenvector of the transition matrix; column i is
    the embedded point i.
    """

    coordinates: np.ndarray
    eigenvalues: np.ndarray
    power: int = 1

    @property
    def n_points(self) -> int:
        return self.coordinates.shape[1]

    @property
    def dim(self) -> int:
        return self.coordinates.shape[0]


def transition_spectrum(transition: TransitionMatrix):
    """Full eigensystem of the transition matrix, descending.

    Solved through the symmetric similar matrix D^{1/2} P D^{-1/2}; the
    returned eigenvectors are mapped back by D^{-1/2}, unit-normalized, and
    sign-fixed (largest-magnitude entry positive).

    Returns
    -------
    eigenvalues : ndarray, shape (n,)
    eigenvectors : ndarray, shape (n, n)
        Column k belongs to eigenvalues[k].
    """
    p = check_square(transition.matrix, "transition matrix")
    droot = np.sqrt(transition.degrees)
    sym = p * (droot[:, None] / droot[None, :])
    sym = 0.5 * (sym + sym.T)
    try:
        vals, vecs = scipy.linalg.eigh(sym)
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - rare
        raise EigSolveFailureError(f"eigendecomposition failed: {exc}") from exc
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = vecs[:, order] / droot[:, None]
    vecs /= np.linalg.norm(vecs, axis=0)
    for k in range(vecs.shape[1]):
        pivot = np.argmax(np.abs(vecs[:, k]))
        if vecs[pivot, k] < 0:
            vecs[:, k] = -vecs[:, k]
    return vals, vecs


def spectral_embedding(transition: TransitionMatrix, embed_dim: int, power: int = 1) -> EmbeddingMatrix:
    """Embed graph nodes from the nontrivial transition-matrix eigenvectors.

    The constant eigenvector (eigenvalue 1) is discarded; the next
    ``embed_dim`` eigenvectors, scaled by their eigenvalues to the given
    power, become the embedding rows.

    Parameters
    ----------
    transition : TransitionMatrix
    embed_dim : int
        Number of nontrivial eigenvectors to keep (>= 1).
    power : int
        Diffusion power t >= 1.

    Returns
    -------
    EmbeddingMatrix
    """
    n = transition.matrix.shape[0]
    if not 1 <= embed_dim <= n - 1:
        raise RankTooLargeError(f"embed_dim {embed_dim} outside [1, {n - 1}]")
    if power < 1:
        raise RankTooLargeError("power must be >= 1")
    vals, vecs = transition_spectrum(transition)
    if vals[0] > 1.0 + 1e-8:
        raise EigSolveFailureError(f"leading eigenvalue {vals[0]} exceeds 1")
    kept = slice(1, embed_dim + 1)
    eigenvalues = vals[kept]
    if np.any(eigenvalues <= EIG_FLOOR * max(vals[0], 1.0)):
        raise EigSolveFailureError(
            "requested embedding dimension reaches a non-positive eigenvalue"
        )
    coords = (eigenvalues[:, None] ** power) * vecs[:, kept].T
    return EmbeddingMatrix(coordinates=coords, eigenvalues=eigenvalues.copy(), power=power)


def embed_points(points, embed_dim: int, n_neighbors: int | None = None,
                 bandwidth: float | None = None, power: int = 1):
    """Full embedding pipeline: graph, geodesics, affinity, Markov, spectrum.

    Returns
    -------
    embedding : EmbeddingMatrix
    info : dict
        Intermediate objects: graph, geodesics, bandwidth, transition.
    """
    graph = knn_graph(points, n_neighbors)
    geo = geodesic_distances(graph)
    eps = select_bandwidth(geo) if bandwidth is None else float(bandwidth)
    trans = markov_normalize(affinity(geo, eps), bandwidth=eps)
    trans.power = power
    emb = spectral_embedding(trans, embed_dim, power)
    info = {"graph": graph, "geodesics": geo, "bandwidth": eps, "transition": trans}
    return emb, info
