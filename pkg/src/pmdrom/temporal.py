"""Time-stepping surrogate on a single trajectory.

The linear latent coordinates advance through a ridge-regressed one-step
operator. The manifold coordinates advance through geometric harmonics: a
Gaussian kernel on geodesic distances between embedding columns defines a
Markov matrix whose eigenvectors expand the (sampled) one-step regression
map; new points are evaluated by a degree-normalized Nystrom extension and
one explicit application of the expansion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from . import embedding as emb
from .exceptions import (
    DegenerateEmbeddingError,
    DegeneratePointsError,
    HarmonicCutoffError,
    OutOfDomainError,
    ShapeMismatchError,
    SingularSystemError,
)
from .lifting import LiftingOperator, apply_lifting, fit_lifting
from .reduction import LinearBasis, linear_coordinates, residual_matrix, truncated_svd
from .snapshots import ScalingStats, SnapshotMatrix, destandardize, standardize
from .validation import as_float_matrix, as_float_vector

#: Harmonics with eigenvalues at or below this floor are never inverted.
HARMONIC_FLOOR = 1e-10


@dataclass
class LinearDynamics:
    """One-step linear operator fitted on consecutive latent columns."""

    matrix: np.ndarray
    ridge: float


def fit_linear_dynamics(coords, ridge: float = 0.0) -> LinearDynamics:
    """Ridge-regress columns 2..m against columns 1..m-1.

    A = Z2 Z1.T (Z1 Z1.T + ridge I)^{-1}.
    """
    z = as_float_matrix(coords, "coords")
    if z.shape[1] < 2:
        raise ShapeMismatchError("need at least 2 latent columns")
    z1, z2 = z[:, :-1], z[:, 1:]
    system = z1 @ z1.T + ridge * np.eye(z.shape[0])
    try:
        a = np.linalg.solve(system, z1 @ z2.T).T
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(
            f"linear dynamics system is singular: {exc}",
            condition_number=np.linalg.cond(system),
        ) from exc
    if not np.all(np.isfinite(a)):
        raise SingularSystemError(
            "linear dynamics solve produced non-finite entries",
            condition_number=np.linalg.cond(system),
        )
    return LinearDynamics(matrix=a, ridge=float(ridge))


def propagate_linear(dynamics: LinearDynamics, start, steps: int) -> np.ndarray:
    """Columns A z, A^2 z, ..., A^steps z."""
    z = as_float_vector(np.asarray(start, dtype=np.float64).reshape(-1), "start")
    if steps < 0:
        raise ShapeMismatchError("steps must be >= 0")
    out = np.empty((z.shape[0], steps))
    current = z
    for k in range(steps):
        current = dynamics.matrix @ current
        out[:, k] = current
    return out


@dataclass
class ManifoldDynamics:
    """Geometric-harmonic representation of the embedded one-step map.

    ``harmonics`` columns are Markov eigenvectors normalized against the
    kernel degrees (u_j^T D u_j = 1); ``coeffs`` column j holds the
    projection of the sampled one-step map onto harmonic j through the
    degree-weighted dual basis.
    """

    anchors: np.ndarray      # (dim, m) training embedding columns
    geodesics: np.ndarray    # (m, m)
    bandwidth: float
    degrees: np.ndarray      # (m,)
    harmonics: np.ndarray    # (m, m), column j = u_j
    eigenvalues: np.ndarray  # (m,) descending
    coeffs: np.ndarray       # (dim, m)
    omega: np.ndarray        # (dim, dim) one-step regression operator
    ridge: float
    floor: float = HARMONIC_FLOOR

    @property
    def retained(self) -> np.ndarray:
        return np.flatnonzero(self.eigenvalues > self.floor)


def fit_manifold_dynamics(embeddings, bandwidth: float | None = None,
                          ridge: float = 1e-8, floor: float = HARMONIC_FLOOR,
                          n_neighbors: int | None = None) -> ManifoldDynamics:
    """Fit the nonlinear latent dynamics on embedding columns.

    Parameters
    ----------
    embeddings : ndarray, shape (dim, m), m >= 3
    bandwidth : float, optional
        Gaussian kernel bandwidth on the geodesic distances; median rule
        when omitted.
    ridge : float
        Ridge amount of the one-step regression.
    floor : float
        Eigenvalue floor below which harmonics are discarded.

    Returns
    -------
    ManifoldDynamics
    """
    phi = as_float_matrix(embeddings, "embeddings")
    if phi.shape[1] < 3:
        raise ShapeMismatchError("need at least 3 embedding columns")
    spread = phi - phi[:, :1]
    if not np.any(spread):
        raise DegenerateEmbeddingError("embedding columns are all identical")

    try:
        graph = emb.knn_graph(phi, n_neighbors)
    except DegeneratePointsError as exc:
        raise DegenerateEmbeddingError(str(exc)) from exc
    geo = emb.geodesic_distances(graph)
    eps = emb.select_bandwidth(geo) if bandwidth is None else float(bandwidth)
    kernel = emb.affinity(geo, eps)
    trans = emb.markov_normalize(kernel, bandwidth=eps)

    droot = np.sqrt(trans.degrees)
    sym = trans.matrix * (droot[:, None] / droot[None, :])
    sym = 0.5 * (sym + sym.T)
    vals, vecs = np.linalg.eigh(sym)
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    # u_j = D^{-1/2} v_j keeps u_j^T D u_j = 1, so the duals D u_j are exact
    harmonics = vecs[:, order] / droot[:, None]
    for j in range(harmonics.shape[1]):
        pivot = np.argmax(np.abs(harmonics[:, j]))
        if harmonics[pivot, j] < 0:
            harmonics[:, j] = -harmonics[:, j]

    phi1, phi2 = phi[:, :-1], phi[:, 1:]
    system = phi1 @ phi1.T + ridge * np.eye(phi.shape[0])
    try:
        omega = np.linalg.solve(system, phi1 @ phi2.T).T
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(
            f"one-step regression is singular: {exc}",
            condition_number=np.linalg.cond(system),
        ) from exc

    sampled_map = omega @ phi                          # (dim, m)
    duals = trans.degrees[:, None] * harmonics         # column j = D u_j
    coeffs = sampled_map @ duals

    return ManifoldDynamics(
        anchors=phi.copy(), geodesics=geo, bandwidth=eps, degrees=trans.degrees,
        harmonics=harmonics, eigenvalues=vals, coeffs=coeffs, omega=omega,
        ridge=float(ridge), floor=float(floor),
    )


def _extension_distances(dynamics: ManifoldDynamics, point: np.ndarray) -> np.ndarray:
    """Geodesic-compatible distances from a query to every anchor.

    A query equal to a training column reuses its stored geodesic row (this
    is what makes the extension reproduce training harmonics exactly); a new
    query enters the graph through its Euclidean hop to each anchor.
    """
    diffs = dynamics.anchors - point[:, None]
    for i in range(dynamics.anchors.shape[1]):
        if not diffs[:, i].any():
            return dynamics.geodesics[i]
    euclid = np.linalg.norm(diffs, axis=0)
    return np.min(euclid[:, None] + dynamics.geodesics, axis=0)


def _normalized_kernel_row(dynamics: ManifoldDynamics, point: np.ndarray,
                           literal: bool = False) -> np.ndarray:
    dist = _extension_distances(dynamics, point)
    row = np.exp(-((dist / dynamics.bandwidth) ** 2))
    if literal:
        return row
    total = row.sum()
    if total <= 0:
        raise DegenerateEmbeddingError("query point sees zero kernel mass")
    return row / total


def nystrom_extend(dynamics: ManifoldDynamics, point, j: int,
                   literal: bool = False) -> float:
    """Evaluate harmonic j at a new embedding point.

    Degree-normalized by default: the kernel row is divided by its sum
    before the eigenvalue-weighted inner product, which makes the extension
    agree with the training harmonic at every anchor. ``literal`` skips the
    normalization (the raw textbook form; it does not reproduce anchors).
    """
    if not 0 <= j < dynamics.eigenvalues.size:
        raise HarmonicCutoffError(f"harmonic index {j} out of range")
    if dynamics.eigenvalues[j] <= dynamics.floor:
        raise HarmonicCutoffError(
            f"harmonic {j} eigenvalue {dynamics.eigenvalues[j]:.3e} at or below "
            f"floor {dynamics.floor:.3e}"
        )
    p = as_float_vector(np.asarray(point, dtype=np.float64).reshape(-1), "point")
    if p.shape[0] != dynamics.anchors.shape[0]:
        raise ShapeMismatchError("point dimension does not match anchors")
    row = _normalized_kernel_row(dynamics, p, literal=literal)
    return float(row @ dynamics.harmonics[:, j] / dynamics.eigenvalues[j])


def step_nonlinear(dynamics: ManifoldDynamics, point) -> np.ndarray:
    """Advance an embedding point one step: sum_j d_j U_j(point).

    One explicit application of the harmonic expansion, summed over the
    retained harmonics (eigenvalues above the floor).
    """
    p = as_float_vector(np.asarray(point, dtype=np.float64).reshape(-1), "point")
    if p.shape[0] != dynamics.anchors.shape[0]:
        raise ShapeMismatchError("point dimension does not match anchors")
    kept = dynamics.retained
    row = _normalized_kernel_row(dynamics, p)
    extended = (row @ dynamics.harmonics[:, kept]) / dynamics.eigenvalues[kept]
    return dynamics.coeffs[:, kept] @ extended


def pmd_reconstruct(basis: LinearBasis, coords, lifting: LiftingOperator, phi,
                    stats: ScalingStats) -> np.ndarray:
    """Recombine latent states into a full state vector."""
    z = np.asarray(coords, dtype=np.float64).reshape(-1)
    standardized = basis.modes @ z + apply_lifting(lifting, np.asarray(phi, dtype=np.float64).reshape(-1))
    return destandardize(standardized, stats)


@dataclass
class TemporalModel:
    """Fitted single-trajectory surrogate."""

    stats: ScalingStats
    basis: LinearBasis
    lifting: LiftingOperator
    coords: np.ndarray
    embeddings: np.ndarray
    linear: LinearDynamics
    manifold: ManifoldDynamics
    times: np.ndarray
    n_spatial: int
    n_time: int

    def save(self, path) -> None:
        from .io import save_model

        save_model(self, path)


def temporal_reconstruct(model: TemporalModel, index: int) -> np.ndarray:
    """Rebuild the state at a training column from its latent pair."""
    return pmd_reconstruct(model.basis, model.coords[:, index], model.lifting,
                           model.embeddings[:, index], model.stats)


def temporal_forecast(model: TemporalModel, steps: int) -> np.ndarray:
    """Advance both latent dynamics past the last training column.

    Returns
    -------
    ndarray, shape (N, steps)
    """
    z_path = propagate_linear(model.linear, model.coords[:, -1], steps)
    out = np.empty((model.stats.mean.shape[0], steps))
    phi = model.embeddings[:, -1]
    for k in range(steps):
        phi = step_nonlinear(model.manifold, phi)
        out[:, k] = pmd_reconstruct(model.basis, z_path[:, k], model.lifting,
                                    phi, model.stats)
    return out


def temporal_predict(model: TemporalModel, time) -> np.ndarray:
    """State at a training time, or a forecast on the uniform extension."""
    t = float(time)
    spacing = float(np.mean(np.diff(model.times)))
    tol = 1e-9 * max(abs(model.times[-1]), spacing)
    hits = np.flatnonzero(np.abs(model.times - t) <= tol)
    if hits.size:
        return temporal_reconstruct(model, int(hits[0]))
    steps = int(round((t - model.times[-1]) / spacing))
    if steps < 1 or abs(model.times[-1] + steps * spacing - t) > tol:
        raise OutOfDomainError(
            f"time {t} is neither a training time nor on the uniform "
            f"forecast grid (spacing {spacing})"
        )
    return temporal_forecast(model, steps)[:, -1]


class TemporalPMD(BaseEstimator):
    """Time-stepping estimator over the columns of a snapshot matrix.

    ``fit`` treats the parameter axis of the snapshot file as the time axis
    (columns are consecutive states of one run). The lifting defaults to the
    linear kernel case (degree 1, offset 0).
    """

    def __init__(self, energy_tol: float = 1e-3, rank: int | None = None,
                 embed_dim: int = 2, n_neighbors: int | None = None,
                 diffusion_power: int = 1, bandwidth: float | None = None,
                 dynamics_bandwidth: float | None = None, ridge: float = 1e-8,
                 lifting_offset: float = 0.0, lifting_degree: int = 1,
                 lifting_ridge: float = 1e-8, harmonic_floor: float = HARMONIC_FLOOR):
        self.energy_tol = energy_tol
        self.rank = rank
        self.embed_dim = embed_dim
        self.n_neighbors = n_neighbors
        self.diffusion_power = diffusion_power
        self.bandwidth = bandwidth
        self.dynamics_bandwidth = dynamics_bandwidth
        self.ridge = ridge
        self.lifting_offset = lifting_offset
        self.lifting_degree = lifting_degree
        self.lifting_ridge = lifting_ridge
        self.harmonic_floor = harmonic_floor

    def fit(self, snapshots: SnapshotMatrix, y=None) -> "TemporalPMD":
        standardized, stats = standardize(snapshots)
        basis = truncated_svd(standardized, energy_tol=self.energy_tol, rank=self.rank)
        coords = linear_coordinates(basis, standardized)
        residual = residual_matrix(basis, standardized)
        embedded, _ = emb.embed_points(
            residual, embed_dim=self.embed_dim, n_neighbors=self.n_neighbors,
            bandwidth=self.bandwidth, power=self.diffusion_power,
        )
        lifting = fit_lifting(
            embedded.coordinates, residual, offset=self.lifting_offset,
            degree=self.lifting_degree, ridge=self.lifting_ridge,
        )
        self.model_ = TemporalModel(
            stats=stats,
            basis=basis,
            lifting=lifting,
            coords=coords,
            embeddings=embedded.coordinates,
            linear=fit_linear_dynamics(coords, self.ridge),
            manifold=fit_manifold_dynamics(
                embedded.coordinates, bandwidth=self.dynamics_bandwidth,
                ridge=self.ridge, floor=self.harmonic_floor,
            ),
            times=snapshots.params.copy(),
            n_spatial=snapshots.n_spatial,
            n_time=snapshots.n_time,
        )
        return self

    def reconstruct(self, index: int) -> np.ndarray:
        """Rebuild the state at a training column from its latent pair."""
        return temporal_reconstruct(self.model_, index)

    def forecast(self, steps: int) -> np.ndarray:
        """Advance both latent dynamics past the last training column."""
        return temporal_forecast(self.model_, steps)

    def predict(self, time) -> np.ndarray:
        """State at a training time, or a forecast on the uniform extension."""
        return temporal_predict(self.model_, time)
