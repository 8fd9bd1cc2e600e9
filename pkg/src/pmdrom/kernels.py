"""Polynomial-kernel ridge regression and recursive one-step forecasting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import EmptyGridError, ShapeMismatchError, SingularSystemError
from .validation import as_float_matrix

#: Default tuning grids.
DEGREE_GRID = (1, 2, 3)
OFFSET_GRID = (0.0, 1.0)
RIDGE_GRID = (1e-8, 1e-6, 1e-4, 1e-2)

#: Relative margin under which two tuning errors count as tied.
TIE_MARGIN = 1e-9


@dataclass(frozen=True)
class PolyKernelParams:
    """Polynomial kernel (x.y + offset)**degree with a ridge amount."""

    degree: int = 1
    offset: float = 0.0
    ridge: float = 0.0

    def __post_init__(self):
        if self.degree < 1:
            raise EmptyGridError("kernel degree must be >= 1")
        if self.offset < 0 or self.ridge < 0:
            raise EmptyGridError("kernel offset and ridge must be nonnegative")


def _as_columns(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ShapeMismatchError(f"{name} must be a vector or a matrix of columns")
    return arr


def poly_kernel(x, y, offset: float, degree: int) -> np.ndarray:
    """Kernel matrix with entries (x_i . y_j + offset)**degree.

    Parameters
    ----------
    x : ndarray, shape (dim, a)
    y : ndarray, shape (dim, b)
        Points are columns; 1-D inputs are treated as a single row of scalars.

    Returns
    -------
    ndarray, shape (a, b)
    """
    xc = _as_columns(x, "x")
    yc = _as_columns(y, "y")
    if xc.ndim == 2 and yc.ndim == 2 and xc.shape[0] != yc.shape[0]:
        raise ShapeMismatchError(f"point dimensions differ: {xc.shape[0]} vs {yc.shape[0]}")
    return (xc.T @ yc + offset) ** degree


def _ridge_solve(gram: np.ndarray, targets: np.ndarray, ridge: float) -> np.ndarray:
    """Solve dual (gram + ridge I) = targets for the dual coefficients."""
    n = gram.shape[0]
    system = gram + ridge * np.eye(n)
    try:
        dual = np.linalg.solve(system, targets.T).T
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(
            f"kernel system is singular: {exc}", condition_number=np.linalg.cond(system)
        ) from exc
    if not np.all(np.isfinite(dual)):
        raise SingularSystemError(
            "kernel solve produced non-finite coefficients",
            condition_number=np.linalg.cond(system),
        )
    return dual


@dataclass
class KrrModel:
    """Fitted kernel ridge regressor in dual form."""

    inputs: np.ndarray  # (dim, n) training inputs as columns
    dual: np.ndarray    # (out_dim, n) dual coefficients
    params: PolyKernelParams


def krr_fit(inputs, targets, params: PolyKernelParams) -> KrrModel:
    """Fit dual coefficients targets @ (G + ridge I)^{-1}.

    Parameters
    ----------
    inputs : ndarray, shape (dim, n)
    targets : ndarray, shape (out_dim, n)
    params : PolyKernelParams

    Returns
    -------
    KrrModel
    """
    x = _as_columns(inputs, "inputs")
    y = _as_columns(targets, "targets")
    if x.shape[1] != y.shape[1]:
        raise ShapeMismatchError(
            f"inputs have {x.shape[1]} columns but targets have {y.shape[1]}"
        )
    gram = poly_kernel(x, x, params.offset, params.degree)
    dual = _ridge_solve(gram, y, params.ridge)
    return KrrModel(inputs=x, dual=dual, params=params)


def krr_predict(model: KrrModel, query) -> np.ndarray:
    """Evaluate the fitted map at query columns.

    Returns
    -------
    ndarray, shape (out_dim, q); squeezed to (out_dim,) for a single query.
    """
    q = _as_columns(query, "query")
    if q.shape[0] != model.inputs.shape[0]:
        raise ShapeMismatchError(
            f"query dimension {q.shape[0]} != training dimension {model.inputs.shape[0]}"
        )
    k = poly_kernel(model.inputs, q, model.params.offset, model.params.degree)
    out = model.dual @ k
    return out[:, 0] if q.shape[1] == 1 and np.ndim(query) == 1 else out


def tune_hyperparameters(latent, degree_grid=DEGREE_GRID, offset_grid=OFFSET_GRID,
                         ridge_grid=RIDGE_GRID) -> PolyKernelParams:
    """Pick kernel hyperparameters by leave-one-out one-step error.

    The latent columns define transition pairs (column i -> column i+1); each
    pair is held out in turn, the one-step map is fit on the rest, and the
    squared prediction error is accumulated. Candidates whose errors differ
    by less than a small margin count as tied; ties prefer the smaller
    degree, then the larger ridge.

    Parameters
    ----------
    latent : ndarray, shape (dim, n), n >= 4

    Returns
    -------
    PolyKernelParams
    """
    z = as_float_matrix(latent, "latent")
    n = z.shape[1]
    if n < 4:
        raise ShapeMismatchError("tuning needs at least 4 latent columns")
    if not len(degree_grid) or not len(offset_grid) or not len(ridge_grid):
        raise EmptyGridError("tuning grids must be non-empty")

    x_all = z[:, :-1]
    y_all = z[:, 1:]
    n_pairs = n - 1
    target_scale = float(np.mean(y_all**2))
    floor = 1e-12 * max(target_scale, 1e-300)

    best: PolyKernelParams | None = None
    best_err = np.inf
    # iteration order encodes the tie preference: smaller degree first,
    # then larger ridge, then smaller offset
    for degree in sorted(degree_grid):
        for ridge in sorted(ridge_grid, reverse=True):
            for offset in sorted(offset_grid):
                candidate = PolyKernelParams(degree=degree, offset=offset, ridge=ridge)
                total = 0.0
                try:
                    for hold in range(n_pairs):
                        keep = np.ones(n_pairs, dtype=bool)
                        keep[hold] = False
                        model = krr_fit(x_all[:, keep], y_all[:, keep], candidate)
                        pred = model.dual @ poly_kernel(
                            model.inputs, x_all[:, hold : hold + 1], offset, degree
                        )
                        total += float(np.sum((pred[:, 0] - y_all[:, hold]) ** 2))
                except SingularSystemError:
                    continue
                err = total / (n_pairs * z.shape[0])
                margin = TIE_MARGIN * max(best_err if best is not None else err, err) + floor
                if best is None or err < best_err - margin:
                    best = candidate
                    best_err = err
    if best is None:
        raise SingularSystemError("every tuning candidate failed to solve")
    return best


def recursive_forecast(latent, steps: int, params: PolyKernelParams,
                       refresh_period: int = 5, degree_grid=None, offset_grid=None,
                       ridge_grid=None) -> np.ndarray:
    """Extend a latent matrix by one-step kernel predictions.

    Each step refits the one-step map on all columns so far (inputs are
    columns 1..end-1, targets columns 2..end), predicts the next column from
    the last one, and appends it. When tuning grids are given, the
    hyperparameters are re-tuned every ``refresh_period`` appended steps.

    Parameters
    ----------
    latent : ndarray, shape (dim, n), n >= 3
    steps : int
        Number of columns to append (0 returns a copy).
    params : PolyKernelParams
        Hyperparameters used until the first refresh (or throughout).

    Returns
    -------
    ndarray, shape (dim, n + steps)
    """
    z = as_float_matrix(latent, "latent")
    if z.shape[1] < 3:
        raise ShapeMismatchError("forecasting needs at least 3 latent columns")
    if steps < 0:
        raise ShapeMismatchError("steps must be >= 0")
    grids_given = degree_grid is not None and offset_grid is not None and ridge_grid is not None
    current = z.copy()
    for step in range(steps):
        if grids_given and refresh_period > 0 and step > 0 and step % refresh_period == 0:
            params = tune_hyperparameters(current, degree_grid, offset_grid, ridge_grid)
        model = krr_fit(current[:, :-1], current[:, 1:], params)
        nxt = model.dual @ poly_kernel(model.inputs, current[:, -1:], params.offset, params.degree)
        current = np.hstack([current, nxt])
    return current


def extended_parameters(params: np.ndarray, steps: int) -> np.ndarray:
    """Parameter values for forecast columns: last value plus multiples of the mean spacing."""
    p = np.asarray(params, dtype=np.float64)
    if steps == 0:
        return p.copy()
    spacing = float(np.mean(np.diff(p)))
    extra = p[-1] + spacing * np.arange(1, steps + 1)
    return np.concatenate([p, extra])
