"""Snapshot assembly and per-row standardization.

A parametric snapshot matrix stacks one column per parameter sample; each
column is the concatenation of a full space-time trajectory, time-major
(all spatial values at the first time step, then the second, ...). Columns
are kept in strictly ascending parameter order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import (
    DuplicateParameterError,
    LengthMismatchError,
    MismatchedShapeError,
    ShapeMismatchError,
    UnsortedParametersError,
)
from .validation import as_float_matrix, as_float_vector

#: Scale floor for rows with (numerically) zero spread.
SIGMA_FLOOR = 1e-12


@dataclass(frozen=True)
class Trajectory:
    """One simulation run: a scalar parameter and its time-ordered states.

    Parameters
    ----------
    parameter : float
        Scalar parameter value of the run.
    states : ndarray, shape (n_time, n_spatial)
        Row ``j`` is the spatial state at time step ``j``.
    """

    parameter: float
    states: np.ndarray

    def __post_init__(self):
        states = as_float_matrix(self.states, "states")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "parameter", float(self.parameter))

    @property
    def n_time(self) -> int:
        return self.states.shape[0]

    @property
    def n_spatial(self) -> int:
        return self.states.shape[1]

    def column(self) -> np.ndarray:
        """Time-major concatenation, length n_spatial * n_time."""
        return self.states.reshape(-1)


@dataclass
class SnapshotMatrix:
    """Columns are space-time trajectories, one per parameter sample.

    Attributes
    ----------
    data : ndarray, shape (N, n_s)
        N = n_spatial * n_time rows, one column per parameter.
    params : ndarray, shape (n_s,)
        Strictly ascending parameter values.
    n_spatial, n_time : int
        Grid split of the row dimension.
    """

    data: np.ndarray
    params: np.ndarray
    n_spatial: int
    n_time: int

    def __post_init__(self):
        self.data = as_float_matrix(self.data, "data")
        self.params = as_float_vector(self.params, "params")
        if self.data.shape[1] != self.params.shape[0]:
            raise MismatchedShapeError(
                f"{self.data.shape[1]} columns but {self.params.shape[0]} parameters"
            )
        if self.data.shape[0] != self.n_spatial * self.n_time:
            raise MismatchedShapeError(
                f"{self.data.shape[0]} rows != n_spatial*n_time "
                f"= {self.n_spatial * self.n_time}"
            )
        diffs = np.diff(self.params)
        if np.any(diffs <= 0):
            if np.any(diffs == 0):
                raise DuplicateParameterError("parameter values must be distinct")
            raise UnsortedParametersError("parameters must be strictly ascending")

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]


@dataclass
class ScalingStats:
    """Per-row mean and scale used by :func:`standardize`.

    ``scale`` is the per-row sample standard deviation, floored at
    ``sigma_floor`` for rows with no spread.
    """

    mean: np.ndarray
    scale: np.ndarray
    sigma_floor: float = SIGMA_FLOOR

    def __post_init__(self):
        self.mean = as_float_vector(self.mean, "mean")
        self.scale = as_float_vector(self.scale, "scale")
        if self.mean.shape != self.scale.shape:
            raise LengthMismatchError("mean and scale lengths differ")


def assemble_parametric_snapshots(trajectories: Sequence[Trajectory]) -> SnapshotMatrix:
    """Stack trajectories into a snapshot matrix, sorted by parameter.

    Parameters
    ----------
    trajectories : sequence of Trajectory
        At least two runs with identical grids and distinct parameters.

    Returns
    -------
    SnapshotMatrix
    """
    if len(trajectories) < 2:
        raise MismatchedShapeError("need at least two trajectories")
    first = trajectories[0]
    for traj in trajectories[1:]:
        if traj.states.shape != first.states.shape:
            raise MismatchedShapeError(
                f"trajectory grids differ: {traj.states.shape} vs {first.states.shape}"
            )
    params = np.array([t.parameter for t in trajectories], dtype=np.float64)
    if np.unique(params).size != params.size:
        raise DuplicateParameterError("parameter values must be distinct")
    order = np.argsort(params)
    data = np.column_stack([trajectories[i].column() for i in order])
    return SnapshotMatrix(
        data=data,
        params=params[order],
        n_spatial=first.n_spatial,
        n_time=first.n_time,
    )


def standardize(matrix, sigma_floor: float = SIGMA_FLOOR):
    """Center and scale each row across parameter samples.

    Rows are shifted by their mean and divided by their sample standard
    deviation; rows with standard deviation below ``sigma_floor`` are divided
    by ``sigma_floor`` instead (they stay numerically zero after centering).

    Parameters
    ----------
    matrix : SnapshotMatrix or ndarray, shape (N, n_s)
    sigma_floor : float, optional

    Returns
    -------
    standardized : ndarray, shape (N, n_s)
    stats : ScalingStats
    """
    data = matrix.data if isinstance(matrix, SnapshotMatrix) else as_float_matrix(matrix)
    if data.shape[1] < 2:
        raise MismatchedShapeError("standardization needs at least two columns")
    mean = data.mean(axis=1)
    scale = data.std(axis=1, ddof=1)
    scale = np.where(scale < sigma_floor, sigma_floor, scale)
    standardized = (data - mean[:, None]) / scale[:, None]
    return standardized, ScalingStats(mean=mean, scale=scale, sigma_floor=sigma_floor)


def destandardize(column: np.ndarray, stats: ScalingStats) -> np.ndarray:
    """Invert :func:`standardize` for a column (or a stack of columns)."""
    col = np.asarray(column, dtype=np.float64)
    if col.shape[0] != stats.mean.shape[0]:
        raise LengthMismatchError(
            f"length {col.shape[0]} does not match stats length {stats.mean.shape[0]}"
        )
    if col.ndim == 1:
        return col * stats.scale + stats.mean
    if col.ndim == 2:
        return col * stats.scale[:, None] + stats.mean[:, None]
    raise ShapeMismatchError("column must be 1-D or 2-D")
