"""Benchmark pieces: POD+GPR baseline, synthetic families, covariance rate.

The baseline shares the standardization and truncated-SVD path with the main
pipeline bit for bit; only the parameter continuation differs. Each reduced
coefficient row gets an exact Gaussian-process regression over the parameter
with a squared-exponential kernel, a median-spacing length scale, the row's
sample variance as signal variance, and a small fixed jitter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator

from .exceptions import BadGridError, NaNSlopeError, RankTooLargeError, SingularSystemError
from .reduction import LinearBasis, linear_coordinates, truncated_svd
from .snapshots import ScalingStats, SnapshotMatrix, Trajectory, assemble_parametric_snapshots, destandardize, standardize
from .validation import as_float_vector

GP_JITTER = 1e-8

#: Length-scale multipliers tried when marginal-likelihood search is enabled.
LENGTH_SCALE_MULTIPLIERS = (0.25, 0.5, 1.0, 2.0, 4.0)


def _sq_exp_kernel(a: np.ndarray, b: np.ndarray, length_scale: float,
                   signal_var: float) -> np.ndarray:
    diff = a[:, None] - b[None, :]
    return signal_var * np.exp(-0.5 * (diff / length_scale) ** 2)


def _log_marginal_likelihood(k: np.ndarray, y: np.ndarray, jitter: float) -> float:
    system = k + jitter * np.eye(k.shape[0])
    try:
        chol = scipy.linalg.cho_factor(system, lower=True)
    except scipy.linalg.LinAlgError:
        return -np.inf
    alpha = scipy.linalg.cho_solve(chol, y)
    logdet = 2.0 * np.sum(np.log(np.diag(chol[0])))
    return float(-0.5 * y @ alpha - 0.5 * logdet - 0.5 * y.size * np.log(2 * np.pi))


@dataclass
class PodGprModel:
    """Truncated-SVD basis plus one exact GP per reduced coefficient."""

    stats: ScalingStats
    basis: LinearBasis
    train_params: np.ndarray
    row_means: np.ndarray      # (r,) GP prior means
    gp_alphas: np.ndarray      # (r, n_s) precomputed (K + jitter I)^{-1} (z - mean)
    length_scales: np.ndarray  # (r,)
    signal_vars: np.ndarray    # (r,)
    jitter: float
    n_spatial: int
    n_time: int

    @property
    def rank(self) -> int:
        return self.basis.rank

    def save(self, path) -> None:
        from .io import save_model

        save_model(self, path)


def pod_gpr_train(snapshots: SnapshotMatrix, rank: int, jitter: float = GP_JITTER,
                  optimize_length_scale: bool = False) -> PodGprModel:
    """Fit the baseline at an explicit truncation rank.

    Parameters
    ----------
    snapshots : SnapshotMatrix
    rank : int
    jitter : float
        Diagonal noise added to every GP solve (> 0).
    optimize_length_scale : bool
        When set, a small multiplier grid around the median-spacing length
        scale is searched per coefficient by marginal likelihood.

    Returns
    -------
    PodGprModel
    """
    if jitter <= 0:
        raise SingularSystemError("jitter must be positive")
    standardized, stats = standardize(snapshots)
    if rank > min(standardized.shape):
        raise RankTooLargeError(f"rank {rank} exceeds min{standardized.shape}")
    basis = truncated_svd(standardized, rank=rank)
    coords = linear_coordinates(basis, standardized)

    mu = snapshots.params
    pair_gaps = np.abs(mu[:, None] - mu[None, :])[np.triu_indices(mu.size, k=1)]
    base_scale = float(np.median(pair_gaps))

    r = basis.rank
    row_means = coords.mean(axis=1)
    alphas = np.empty_like(coords)
    length_scales = np.empty(r)
    signal_vars = np.empty(r)
    for i in range(r):
        centered = coords[i] - row_means[i]
        signal = float(np.var(coords[i], ddof=1))
        scale = base_scale
        if optimize_length_scale and signal > 0:
            best = -np.inf
            for mult in LENGTH_SCALE_MULTIPLIERS:
                k = _sq_exp_kernel(mu, mu, base_scale * mult, signal)
                lml = _log_marginal_likelihood(k, centered, jitter)
                if lml > best:
                    best = lml
                    scale = base_scale * mult
        k = _sq_exp_kernel(mu, mu, scale, signal)
        system = k + jitter * np.eye(mu.size)
        try:
            chol = scipy.linalg.cho_factor(system, lower=True)
        except scipy.linalg.LinAlgError as exc:
            raise SingularSystemError(
                f"GP system for coefficient {i} failed: {exc}",
                condition_number=np.linalg.cond(system),
            ) from exc
        alphas[i] = scipy.linalg.cho_solve(chol, centered)
        length_scales[i] = scale
        signal_vars[i] = signal

    return PodGprModel(
        stats=stats, basis=basis, train_params=mu.copy(), row_means=row_means,
        gp_alphas=alphas, length_scales=length_scales, signal_vars=signal_vars,
        jitter=float(jitter), n_spatial=snapshots.n_spatial, n_time=snapshots.n_time,
    )


def pod_gpr_coefficients(model: PodGprModel, parameter) -> np.ndarray:
    """GP posterior means of the reduced coefficients at new parameters."""
    mu_new = np.atleast_1d(np.asarray(parameter, dtype=np.float64))
    out = np.empty((model.rank, mu_new.size))
    for i in range(model.rank):
        k_star = _sq_exp_kernel(mu_new, model.train_params,
                                model.length_scales[i], model.signal_vars[i])
        out[i] = k_star @ model.gp_alphas[i] + model.row_means[i]
    return out


def pod_gpr_predict(model: PodGprModel, parameter) -> np.ndarray:
    """Full-state prediction at one or more parameter values.

    The squared-exponential kernel extrapolates smoothly, reverting to each
    coefficient's training mean far from the data.

    Returns
    -------
    ndarray, shape (N,) for a scalar parameter, else (N, q).
    """
    coeffs = pod_gpr_coefficients(model, parameter)
    states = destandardize(model.basis.modes @ coeffs, model.stats)
    return states[:, 0] if np.ndim(parameter) == 0 else states


class PODGPR(BaseEstimator):
    """Estimator wrapper around :func:`pod_gpr_train`/:func:`pod_gpr_predict`."""

    def __init__(self, rank: int = 2, jitter: float = GP_JITTER,
                 optimize_length_scale: bool = False):
        self.rank = rank
        self.jitter = jitter
        self.optimize_length_scale = optimize_length_scale

    def fit(self, snapshots: SnapshotMatrix, y=None) -> "PODGPR":
        self.model_ = pod_gpr_train(snapshots, self.rank, self.jitter,
                                    self.optimize_length_scale)
        return self

    def predict(self, parameter) -> np.ndarray:
        return pod_gpr_predict(self.model_, parameter)


# --- synthetic data -----------------------------------------------------------

SYNTHETIC_FAMILIES = ("separable", "traveling")


def generate_synthetic(family: str, params, n_spatial: int, n_time: int) -> SnapshotMatrix:
    """Closed-form snapshot families on the unit space-time square.

    "separable": mu sin(pi x) cos(t) + sin(3 mu) cos(pi x) sin(t), an exactly
    rank-2 family. "traveling": exp(-(x - mu - 0.1 t)^2 / 0.02), a moving
    bump with slowly decaying singular values.

    Parameters
    ----------
    family : {"separable", "traveling"}
    params : array-like, at least two distinct values
    n_spatial, n_time : int
        Grid sizes (>= 2); both axes sample [0, 1] uniformly inclusive.

    Returns
    -------
    SnapshotMatrix
    """
    if family not in SYNTHETIC_FAMILIES:
        raise BadGridError(f"unknown family {family!r}; choose from {SYNTHETIC_FAMILIES}")
    if n_spatial < 2 or n_time < 2:
        raise BadGridError("n_spatial and n_time must both be >= 2")
    mu_values = as_float_vector(np.asarray(params, dtype=np.float64), "params")
    if mu_values.size < 2:
        raise BadGridError("need at least two parameter values")

    x = np.linspace(0.0, 1.0, n_spatial)
    t = np.linspace(0.0, 1.0, n_time)
    tt, xx = np.meshgrid(t, x, indexing="ij")  # (n_time, n_spatial)

    trajectories = []
    for mu in mu_values:
        if family == "separable":
            states = mu * np.sin(np.pi * xx) * np.cos(tt) \
                + np.sin(3.0 * mu) * np.cos(np.pi * xx) * np.sin(tt)
        else:
            states = np.exp(-((xx - mu - 0.1 * tt) ** 2) / 0.02)
        trajectories.append(Trajectory(parameter=float(mu), states=states))
    return assemble_parametric_snapshots(trajectories)


# --- covariance concentration experiment ---------------------------------------

@dataclass
class RateReport:
    """Slope of mean operator-norm covariance error against sample size."""

    sample_sizes: np.ndarray
    mean_errors: np.ndarray
    slope: float


def covariance_rate_experiment(state_dim: int, sample_sizes, n_trials: int = 20,
                               seed: int = 0, amplitude: float = 1.0) -> RateReport:
    """Measure how fast the empirical covariance converges in operator norm.

    States are bounded i.i.d. vectors with a known diagonal covariance
    (entries uniform on +-sqrt(3) scaled by a fixed spectrum); for each
    sample size the operator-norm error of the empirical second moment is
    averaged over trials, and a least-squares line is fit to the log-log
    points. An O(1/sqrt(n)) concentration shows up as a slope near -1/2.

    Parameters
    ----------
    state_dim : int
    sample_sizes : array-like of int, ascending; at least two.
    n_trials : int
    seed : int
        Master seed; per-(size, trial) streams are spawned deterministically.
    amplitude : float
        Overall state scale; zero produces the degenerate all-zero case.

    Returns
    -------
    RateReport
    """
    sizes = np.asarray(sample_sizes, dtype=np.int64)
    if sizes.size < 2 or np.any(np.diff(sizes) <= 0) or np.any(sizes < 2):
        raise BadGridError("need at least two ascending sample sizes (each >= 2)")
    if state_dim < 1 or n_trials < 1:
        raise BadGridError("state_dim and n_trials must be positive")

    spectrum = amplitude**2 / np.arange(1, state_dim + 1, dtype=np.float64)
    root = np.sqrt(spectrum)
    truth = np.diag(spectrum)

    ss = np.random.SeedSequence(seed)
    children = iter(ss.spawn(sizes.size * n_trials))
    mean_errors = np.empty(sizes.size, dtype=np.float64)
    for si, n in enumerate(sizes):
        errs = np.empty(n_trials)
        for trial in range(n_trials):
            rng = np.random.default_rng(next(children))
            draws = rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size=(int(n), state_dim))
            states = draws * root  # rows are samples of sqrt(C) x
            empirical = states.T @ states / float(n)
            errs[trial] = np.linalg.norm(empirical - truth, ord=2)
        mean_errors[si] = errs.mean()

    if np.any(mean_errors <= 0) or not np.all(np.isfinite(mean_errors)):
        raise NaNSlopeError("mean errors are zero or non-finite; slope undefined")
    slope = float(np.polyfit(np.log(sizes.astype(float)), np.log(mean_errors), 1)[0])
    return RateReport(sample_sizes=sizes, mean_errors=mean_errors, slope=slope)
