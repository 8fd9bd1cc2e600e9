"""End-to-end parametric surrogate: reduce, embed, forecast, continue, lift.

Training standardizes the snapshot matrix, splits it into a truncated-SVD
part and its residual, embeds the residual columns on their implied
manifold, learns the kernel lifting, optionally extends both latent
matrices by recursive one-step forecasts, and finally fits weighted
smoothing splines over the (possibly extended) parameter grid. Prediction
evaluates both spline maps at a new parameter, lifts the embedding
coordinates, and de-standardizes.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from . import embedding as emb
from .exceptions import ConfigError, InsufficientSamplesError, OutOfDomainError
from .kernels import (
    DEGREE_GRID,
    OFFSET_GRID,
    RIDGE_GRID,
    extended_parameters,
    recursive_forecast,
    tune_hyperparameters,
)
from .lifting import LiftingOperator, apply_lifting, fit_lifting
from .reduction import LinearBasis, linear_coordinates, residual_matrix, truncated_svd
from .snapshots import ScalingStats, SnapshotMatrix, destandardize, standardize
from .splines import ALPHA_GRID, ContinuousLatentMap, fit_latent_maps


@dataclass
class PpmdConfig:
    """Hyperparameters of the parametric pipeline.

    Exactly one of ``rank`` (explicit) or ``energy_tol`` (energy criterion)
    controls the linear truncation; ``rank`` wins when both are set.
    ``alpha_grid`` is a wide log-spaced default (1e-8..1e4); narrow it when
    the parameter response is known to be rough or very smooth.
    """

    energy_tol: float = 1e-3
    rank: int | None = None
    embed_dim: int = 2
    n_neighbors: int | None = None
    diffusion_power: int = 1
    bandwidth: float | None = None
    degree_grid: tuple = DEGREE_GRID
    offset_grid: tuple = OFFSET_GRID
    ridge_grid: tuple = RIDGE_GRID
    refresh_period: int = 5
    forecast_steps: int = 0
    alpha_grid: tuple = ALPHA_GRID
    cv_folds: int = 5
    predicted_weight: float = 0.5
    lifting_offset: float = 1.0
    lifting_degree: int = 2
    lifting_ridge: float = 1e-8
    seed: int = 0

    def validate(self) -> None:
        if self.rank is None and not 0 < self.energy_tol < 1:
            raise ConfigError(f"energy_tol {self.energy_tol} outside (0, 1)")
        if self.rank is not None and self.rank < 1:
            raise ConfigError("rank must be >= 1")
        if self.embed_dim < 1:
            raise ConfigError("embed_dim must be >= 1")
        if self.diffusion_power < 1:
            raise ConfigError("diffusion_power must be >= 1")
        if self.forecast_steps < 0:
            raise ConfigError("forecast_steps must be >= 0")
        if not 0 < self.predicted_weight < 1:
            raise ConfigError("predicted_weight must lie in (0, 1)")
        if self.cv_folds < 2:
            raise ConfigError("cv_folds must be >= 2")
        if not (self.degree_grid and self.offset_grid and self.ridge_grid and self.alpha_grid):
            raise ConfigError("hyperparameter grids must be non-empty")
        if self.lifting_degree < 1 or self.lifting_ridge < 0:
            raise ConfigError("bad lifting hyperparameters")


@dataclass
class PpmdModel:
    """Everything needed to predict at a new parameter value."""

    stats: ScalingStats
    basis: LinearBasis
    lifting: LiftingOperator
    coord_map: ContinuousLatentMap
    embed_map: ContinuousLatentMap
    domain: tuple[float, float]
    n_spatial: int
    n_time: int
    train_params: np.ndarray
    provenance: dict = field(default_factory=dict)

    @property
    def rank(self) -> int:
        return self.basis.rank

    def save(self, path) -> None:
        from .io import save_model

        save_model(self, path)


def _data_hash(snapshots: SnapshotMatrix) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(snapshots.data).tobytes())
    h.update(np.ascontiguousarray(snapshots.params).tobytes())
    h.update(np.array([snapshots.n_spatial, snapshots.n_time], dtype=np.int64).tobytes())
    return h.hexdigest()


def train(snapshots: SnapshotMatrix, config: PpmdConfig | None = None) -> PpmdModel:
    """Fit the full parametric surrogate.

    Parameters
    ----------
    snapshots : SnapshotMatrix
        Training data; at least max(4, cv_folds) parameter samples.
    config : PpmdConfig, optional

    Returns
    -------
    PpmdModel
    """
    config = PpmdConfig() if config is None else config
    config.validate()
    n_s = snapshots.n_samples
    if n_s < max(4, config.cv_folds):
        raise InsufficientSamplesError(
            f"{n_s} samples < max(4, cv_folds={config.cv_folds})"
        )

    standardized, stats = standardize(snapshots)
    basis = truncated_svd(standardized, energy_tol=config.energy_tol, rank=config.rank)
    coords = linear_coordinates(basis, standardized)
    residual = residual_matrix(basis, standardized)

    embedded, _ = emb.embed_points(
        residual,
        embed_dim=config.embed_dim,
        n_neighbors=config.n_neighbors,
        bandwidth=config.bandwidth,
        power=config.diffusion_power,
    )
    lifting = fit_lifting(
        embedded.coordinates,
        residual,
        offset=config.lifting_offset,
        degree=config.lifting_degree,
        ridge=config.lifting_ridge,
    )

    q = config.forecast_steps
    coord_lat, embed_lat = coords, embedded.coordinates
    if q > 0:
        grids = (config.degree_grid, config.offset_grid, config.ridge_grid)
        coord_lat = recursive_forecast(
            coords, q, tune_hyperparameters(coords, *grids),
            refresh_period=config.refresh_period, degree_grid=config.degree_grid,
            offset_grid=config.offset_grid, ridge_grid=config.ridge_grid,
        )
        embed_lat = recursive_forecast(
            embedded.coordinates, q, tune_hyperparameters(embedded.coordinates, *grids),
            refresh_period=config.refresh_period, degree_grid=config.degree_grid,
            offset_grid=config.offset_grid, ridge_grid=config.ridge_grid,
        )
    grid = extended_parameters(snapshots.params, q)
    weights = np.concatenate([np.ones(n_s), np.full(q, config.predicted_weight)])

    coord_map = fit_latent_maps(
        coord_lat, grid, weights, config.alpha_grid, config.cv_folds, config.seed
    )
    embed_map = fit_latent_maps(
        embed_lat, grid, weights, config.alpha_grid, config.cv_folds, config.seed
    )

    provenance = {
        "config": _config_dict(config),
        "data_hash": _data_hash(snapshots),
    }
    return PpmdModel(
        stats=stats,
        basis=basis,
        lifting=lifting,
        coord_map=coord_map,
        embed_map=embed_map,
        domain=(float(grid[0]), float(grid[-1])),
        n_spatial=snapshots.n_spatial,
        n_time=snapshots.n_time,
        train_params=snapshots.params.copy(),
        provenance=provenance,
    )


def _config_dict(config: PpmdConfig) -> dict:
    d = asdict(config)
    for key in ("degree_grid", "offset_grid", "ridge_grid", "alpha_grid"):
        d[key] = list(d[key])
    return d


def predict(model: PpmdModel, parameter, extrapolate: bool = False) -> np.ndarray:
    """Predict the full state at one or more parameter values.

    Returns
    -------
    ndarray, shape (N,) for a scalar parameter, else (N, len(parameter)).
    """
    lo, hi = model.domain
    values = np.atleast_1d(np.asarray(parameter, dtype=np.float64))
    if not extrapolate and (np.any(values < lo) or np.any(values > hi)):
        bad = values[(values < lo) | (values > hi)][0]
        raise OutOfDomainError(f"{bad} outside model domain [{lo}, {hi}]")

    z = model.coord_map(values, extrapolate=extrapolate)
    phi = model.embed_map(values, extrapolate=extrapolate)
    lifted = apply_lifting(model.lifting, phi)
    standardized = model.basis.modes @ z + lifted
    out = destandardize(standardized, model.stats)
    return out[:, 0] if np.ndim(parameter) == 0 else out


@dataclass
class MetricRow:
    """One line of an evaluation report (mirrors the summary-table layout)."""

    kind: str        # "reconstruction" at a training parameter, else "prediction"
    parameter: float
    rank: int
    method: str
    mse: float
    rel: float


@dataclass
class MetricsReport:
    rows: list[MetricRow]

    HEADER = ("type", "parameter", "rank", "method", "MSE", "REL")

    def to_csv(self) -> str:
        lines = [",".join(self.HEADER)]
        for r in self.rows:
            lines.append(
                f"{r.kind},{r.parameter!r},{r.rank},{r.method},{r.mse!r},{r.rel!r}"
            )
        return "\n".join(lines) + "\n"


def error_metrics(predicted: np.ndarray, truth: np.ndarray) -> tuple[float, float]:
    """(MSE, REL) for one state vector: squared error over N, and relative 2-norm."""
    diff = np.asarray(predicted, dtype=np.float64) - np.asarray(truth, dtype=np.float64)
    mse = float(diff @ diff / diff.size)
    rel = float(np.linalg.norm(diff) / np.linalg.norm(truth))
    return mse, rel


def evaluate(model: PpmdModel, test: SnapshotMatrix, extrapolate: bool = False,
             method: str = "PPMD") -> MetricsReport:
    """Score the model against held-out (or training) snapshots."""
    if test.n_rows != model.stats.mean.shape[0]:
        raise OutOfDomainError(
            f"test rows {test.n_rows} != trained state size {model.stats.mean.shape[0]}"
        )
    train_set = set(np.round(model.train_params, 12))
    rows = []
    predictions = predict(model, test.params, extrapolate=extrapolate)
    for j, mu in enumerate(test.params):
        mse, rel = error_metrics(predictions[:, j], test.data[:, j])
        kind = "reconstruction" if round(float(mu), 12) in train_set else "prediction"
        rows.append(MetricRow(kind=kind, parameter=float(mu), rank=model.rank,
                              method=method, mse=mse, rel=rel))
    return MetricsReport(rows=rows)


class PPMD(BaseEstimator):
    """Estimator-style wrapper around :func:`train`/:func:`predict`.

    Parameters mirror :class:`PpmdConfig`; ``fit`` accepts a
    :class:`~pmdrom.snapshots.SnapshotMatrix` and stores the fitted
    :class:`PpmdModel` as ``model_``.
    """

    def __init__(self, energy_tol: float = 1e-3, rank: int | None = None,
                 embed_dim: int = 2, n_neighbors: int | None = None,
                 diffusion_power: int = 1, bandwidth: float | None = None,
                 degree_grid: tuple = DEGREE_GRID, offset_grid: tuple = OFFSET_GRID,
                 ridge_grid: tuple = RIDGE_GRID, refresh_period: int = 5,
                 forecast_steps: int = 0, alpha_grid: tuple = ALPHA_GRID,
                 cv_folds: int = 5, predicted_weight: float = 0.5,
                 lifting_offset: float = 1.0, lifting_degree: int = 2,
                 lifting_ridge: float = 1e-8, seed: int = 0):
        self.energy_tol = energy_tol
        self.rank = rank
        self.embed_dim = embed_dim
        self.n_neighbors = n_neighbors
        self.diffusion_power = diffusion_power
        self.bandwidth = bandwidth
        self.degree_grid = degree_grid
        self.offset_grid = offset_grid
        self.ridge_grid = ridge_grid
        self.refresh_period = refresh_period
        self.forecast_steps = forecast_steps
        self.alpha_grid = alpha_grid
        self.cv_folds = cv_folds
        self.predicted_weight = predicted_weight
        self.lifting_offset = lifting_offset
        self.lifting_degree = lifting_degree
        self.lifting_ridge = lifting_ridge
        self.seed = seed

    def _config(self) -> PpmdConfig:
        return PpmdConfig(**{k: v for k, v in self.get_params().items()})

    def fit(self, snapshots: SnapshotMatrix, y=None) -> "PPMD":
        self.model_ = train(snapshots, self._config())
        return self

    def predict(self, parameter, extrapolate: bool = False) -> np.ndarray:
        return predict(self.model_, parameter, extrapolate=extrapolate)

    def evaluate(self, test: SnapshotMatrix, extrapolate: bool = False) -> MetricsReport:
        return evaluate(self.model_, test, extrapolate=extrapolate)
