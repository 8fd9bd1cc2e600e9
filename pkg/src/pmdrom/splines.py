"""Weighted penalized cubic smoothing splines over the parameter axis.

The fit minimizes

    sum_i w_i (y_i - s(mu_i))^2 + alpha * integral s''(mu)^2 dmu

over cubic splines s expanded in a B-spline basis with knots at the sample
locations (clamped ends), giving N_p + 2 basis functions. The curvature
penalty matrix is assembled exactly: second derivatives of cubic B-splines
are piecewise linear, so their products are piecewise quadratic and Simpson's
rule on each knot interval integrates them without error.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.interpolate import BSpline

from .exceptions import (
    EmptyGridError,
    FoldTooSmallError,
    OutOfDomainError,
    ShapeMismatchError,
    SingularSystemError,
    TooFewPointsError,
    UnsortedParametersError,
)
from .validation import as_float_matrix, as_float_vector

logger = logging.getLogger(__name__)

SPLINE_DEGREE = 3

#: Default curvature-weight candidates: wide log-spaced grid.
ALPHA_GRID = tuple(float(a) for a in np.logspace(-8, 4, 13))

#: Relative margin under which two CV errors count as tied.
TIE_MARGIN = 1e-9


@dataclass
class SplineBasis:
    """Cubic B-spline basis tied to a set of sample locations.

    Attributes
    ----------
    knots : ndarray
        Full knot vector (clamped: endpoints repeated 4 times).
    locations : ndarray, shape (N_p,)
        Strictly ascending sample locations the design matrix rows refer to.
    design : ndarray, shape (N_p, M)
        design[i, m] = B_m(locations[i]).
    penalty : ndarray, shape (M, M)
        penalty[m, l] = integral of B_m'' B_l'' over the domain.
    """

    knots: np.ndarray
    locations: np.ndarray
    design: np.ndarray
    penalty: np.ndarray

    @property
    def n_basis(self) -> int:
        return self.design.shape[1]

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.locations[0]), float(self.locations[-1])


def _design_matrix(x: np.ndarray, knots: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return BSpline.design_matrix(x, knots, SPLINE_DEGREE, extrapolate=False).toarray()


def _second_derivative_rows(knots: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Matrix with entry [i, m] = B_m''(x_i)."""
    m = knots.size - SPLINE_DEGREE - 1
    spl = BSpline(knots, np.eye(m), SPLINE_DEGREE, extrapolate=True)
    return spl.derivative(2)(x)


def _exact_penalty(knots: np.ndarray) -> np.ndarray:
    m = knots.size - SPLINE_DEGREE - 1
    penalty = np.zeros((m, m))
    # Simpson on each nonempty knot span is exact for the piecewise-quadratic
    # integrand B_m'' B_l''
    spans = np.unique(knots)
    for a, b in zip(spans[:-1], spans[1:]):
        h = b - a
        if h <= 0:
            continue
        nodes = np.array([a, 0.5 * (a + b), b])
        d2 = _second_derivative_rows(knots, nodes)
        penalty += (h / 6.0) * (
            np.outer(d2[0], d2[0]) + 4.0 * np.outer(d2[1], d2[1]) + np.outer(d2[2], d2[2])
        )
    return 0.5 * (penalty + penalty.T)


def build_basis(locations, knot_strategy: str | int = "samples") -> SplineBasis:
    """Construct the design matrix and exact curvature penalty.

    Parameters
    ----------
    locations : ndarray, shape (N_p,)
        Strictly ascending, at least 4 points.
    knot_strategy : "samples" or int
        "samples" places one knot at every location (M = N_p + 2 basis
        functions). An integer M >= 4 requests a sparser basis with M - 4
        uniformly spaced interior knots.

    Returns
    -------
    SplineBasis
    """
    locs = as_float_vector(locations, "locations")
    if locs.size < 4:
        raise TooFewPointsError(f"need at least 4 sample locations, got {locs.size}")
    if np.any(np.diff(locs) <= 0):
        raise UnsortedParametersError("sample locations must be strictly ascending")

    lo, hi = locs[0], locs[-1]
    if knot_strategy == "samples":
        interior = locs[1:-1]
    else:
        m = int(knot_strategy)
        if m < 4:
            raise TooFewPointsError("a cubic basis needs at least 4 functions")
        interior = np.linspace(lo, hi, m - 2)[1:-1]
    knots = np.concatenate([[lo] * 4, interior, [hi] * 4])

    design = _design_matrix(locs, knots)
    penalty = _exact_penalty(knots)
    return SplineBasis(knots=knots, locations=locs, design=design, penalty=penalty)


@dataclass
class SplineFit:
    """Spline coefficients for one scalar function of the parameter."""

    basis: SplineBasis
    coefficients: np.ndarray
    alpha: float


def _penalty_root(penalty: np.ndarray) -> np.ndarray:
    """Factor penalty = root.T @ root via a symmetric eigendecomposition.

    Eigenvalues below a relative floor are zeroed so the root annihilates
    the affine null space exactly; otherwise a huge alpha would amplify
    roundoff-scale eigenvalues into a spurious ridge on the line component.
    """
    vals, vecs = scipy.linalg.eigh(penalty)
    floor = 1e-10 * max(float(vals[-1]), 0.0)
    vals = np.where(vals > floor, vals, 0.0)
    return (np.sqrt(vals)[:, None] * vecs.T)


def _zero_alpha_solve(a: np.ndarray, rhs: np.ndarray, root: np.ndarray):
    """Minimal-penalty solution among weighted least-squares minimizers.

    With knots at every sample the design has a null space at alpha = 0; the
    alpha -> 0+ limit of the smoothing spline is the interpolant with the
    smallest curvature, so the data-optimal solution is corrected inside the
    design null space to minimize the penalty.
    """
    coeffs, _, _, sv = np.linalg.lstsq(a, rhs, rcond=None)
    _, s, vt = np.linalg.svd(a)
    cutoff = s[0] * max(a.shape) * np.finfo(np.float64).eps if s.size else 0.0
    null = vt[np.count_nonzero(s > cutoff):].T
    if null.shape[1]:
        shift, *_ = np.linalg.lstsq(root @ null, root @ coeffs, rcond=None)
        coeffs = coeffs - null @ shift
    return coeffs, sv


def fit_smoothing_spline(basis: SplineBasis, values, weights, alpha: float,
                         design: np.ndarray | None = None,
                         penalty_root: np.ndarray | None = None) -> SplineFit:
    """Solve the weighted penalized least-squares problem for one coordinate.

    Solved as a stacked least-squares system [sqrt(W) B; sqrt(alpha) L] with
    L.T L = penalty, never forming the normal equations. At alpha = 0 the
    minimal-curvature solution is selected among the least-squares minimizers
    (the natural interpolating-spline limit).

    Parameters
    ----------
    basis : SplineBasis
    values : ndarray, shape (n_rows,)
    weights : ndarray, shape (n_rows,)
        Strictly positive.
    alpha : float
        Curvature weight, >= 0.
    design : ndarray, optional
        Rows of the design matrix to fit against (defaults to the full one;
        cross-validation passes fold subsets).
    penalty_root : ndarray, optional
        Precomputed factor of the penalty (reused across fits).

    Returns
    -------
    SplineFit
    """
    y = as_float_vector(values, "values")
    w = as_float_vector(weights, "weights")
    b = basis.design if design is None else design
    if y.shape[0] != b.shape[0] or w.shape[0] != b.shape[0]:
        raise ShapeMismatchError(
            f"values/weights length {y.shape[0]}/{w.shape[0]} does not match "
            f"{b.shape[0]} design rows"
        )
    if np.any(w <= 0):
        raise ShapeMismatchError("weights must be strictly positive")
    if alpha < 0:
        raise EmptyGridError("alpha must be nonnegative")

    root = _penalty_root(basis.penalty) if penalty_root is None else penalty_root
    sw = np.sqrt(w)
    if alpha == 0.0:
        coeffs, sv = _zero_alpha_solve(sw[:, None] * b, sw * y, root)
    else:
        stacked = np.vstack([sw[:, None] * b, np.sqrt(alpha) * root])
        rhs = np.concatenate([sw * y, np.zeros(root.shape[0])])
        coeffs, _, _, sv = np.linalg.lstsq(stacked, rhs, rcond=None)
    if not np.all(np.isfinite(coeffs)):
        raise SingularSystemError(
            "spline solve produced non-finite coefficients",
            condition_number=float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf,
        )
    cond = float(sv[0] / sv[-1]) if sv.size and sv[-1] > 0 else np.inf
    logger.debug("spline fit alpha=%.3e cond=%.3e", alpha, cond)
    return SplineFit(basis=basis, coefficients=coeffs, alpha=float(alpha))


def evaluate_spline(fit: SplineFit, x, extrapolate: bool = False) -> np.ndarray:
    """Evaluate a fitted spline at scalar or array locations.

    Outside the fitted domain the spline either raises or, with
    ``extrapolate``, continues linearly from the boundary value and slope.
    """
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    lo, hi = fit.basis.domain
    below = xs < lo
    above = xs > hi
    if (below.any() or above.any()) and not extrapolate:
        bad = xs[below | above][0]
        raise OutOfDomainError(f"{bad} outside fitted domain [{lo}, {hi}]")

    spl = BSpline(fit.basis.knots, fit.coefficients, SPLINE_DEGREE, extrapolate=True)
    out = spl(np.clip(xs, lo, hi))
    if extrapolate and (below.any() or above.any()):
        dspl = spl.derivative(1)
        if below.any():
            out[below] = spl(lo) + dspl(lo) * (xs[below] - lo)
        if above.any():
            out[above] = spl(hi) + dspl(hi) * (xs[above] - hi)
    return out[0] if np.ndim(x) == 0 else out


def make_folds(weights, n_folds: int, seed: int = 0) -> list[np.ndarray]:
    """Deterministic stratified fold assignment.

    Samples are grouped by weight value (original vs predicted samples have
    distinct weights), each group is shuffled with the seeded generator, and
    group members are dealt round-robin so every fold sees a share of each
    group.
    """
    w = as_float_vector(weights, "weights")
    n = w.shape[0]
    if n_folds < 2:
        raise FoldTooSmallError("need at least 2 folds")
    if n_folds > n:
        raise FoldTooSmallError(f"{n_folds} folds for {n} samples")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    position = 0
    for value in np.unique(w):
        members = np.flatnonzero(w == value)
        rng.shuffle(members)
        for idx in members:
            folds[position % n_folds].append(int(idx))
            position += 1
    return [np.sort(np.array(f, dtype=int)) for f in folds]


def cross_validate(locations, values, weights, candidates=ALPHA_GRID, n_folds: int = 5,
                   seed: int = 0, basis: SplineBasis | None = None,
                   folds: list[np.ndarray] | None = None):
    """Select the curvature weight by weighted K-fold cross-validation.

    The basis (knots at all sample locations) is built once; each fold fits
    on the remaining rows of the shared design matrix and scores the held-out
    rows with their weights. The candidate with the smallest mean fold error
    wins; near-ties go to the largest (smoothest) candidate.

    Returns
    -------
    alpha_star : float
    fit : SplineFit
        Refit on all samples at alpha_star.
    cv_errors : ndarray
        Mean fold error per candidate, in the given candidate order.
    """
    locs = as_float_vector(locations, "locations")
    y = as_float_vector(values, "values")
    w = as_float_vector(weights, "weights")
    if not len(candidates):
        raise EmptyGridError("candidate grid is empty")
    if basis is None:
        basis = build_basis(locs)
    if folds is None:
        folds = make_folds(w, n_folds, seed)

    root = _penalty_root(basis.penalty)
    scale = float(np.sum(w * y**2) / np.sum(w))
    floor = 1e-12 * max(scale, 1e-300)

    cand = [float(a) for a in candidates]
    errors = np.full(len(cand), np.inf)
    for ci, alpha in enumerate(cand):
        fold_errors = []
        for held in folds:
            keep = np.setdiff1d(np.arange(locs.size), held)
            fit = fit_smoothing_spline(
                basis, y[keep], w[keep], alpha,
                design=basis.design[keep], penalty_root=root,
            )
            pred = basis.design[held] @ fit.coefficients
            fold_errors.append(float(np.sum(w[held] * (y[held] - pred) ** 2) / np.sum(w[held])))
        errors[ci] = float(np.mean(fold_errors))

    # smallest error wins; near-ties prefer the largest alpha
    best_ci = None
    best_err = np.inf
    for ci in sorted(range(len(cand)), key=lambda i: -cand[i]):
        err = errors[ci]
        margin = TIE_MARGIN * max(err, best_err if best_ci is not None else err) + floor
        if best_ci is None or err < best_err - margin:
            best_ci = ci
            best_err = err
    alpha_star = cand[best_ci]
    final = fit_smoothing_spline(basis, y, w, alpha_star, penalty_root=root)
    return alpha_star, final, errors


@dataclass
class ContinuousLatentMap:
    """Independent smoothing splines for each latent coordinate."""

    fits: list[SplineFit]
    alphas: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.fits)

    @property
    def domain(self) -> tuple[float, float]:
        return self.fits[0].basis.domain

    def __call__(self, x, extrapolate: bool = False) -> np.ndarray:
        """Evaluate all coordinates; (dim,) for scalar x, (dim, len(x)) otherwise."""
        rows = [evaluate_spline(f, x, extrapolate=extrapolate) for f in self.fits]
        return np.array(rows) if np.ndim(x) == 0 else np.vstack(rows)


def fit_latent_maps(latent, locations, weights, candidates=ALPHA_GRID, n_folds: int = 5,
                    seed: int = 0) -> ContinuousLatentMap:
    """Cross-validated smoothing spline for every row of a latent matrix.

    The basis and the fold partition are shared across coordinates so a
    single seed fixes the whole procedure.

    Parameters
    ----------
    latent : ndarray, shape (dim, N_p)
    locations : ndarray, shape (N_p,)
    weights : ndarray, shape (N_p,)

    Returns
    -------
    ContinuousLatentMap
    """
    z = as_float_matrix(latent, "latent")
    locs = as_float_vector(locations, "locations")
    if z.shape[1] != locs.shape[0]:
        raise ShapeMismatchError(
            f"latent has {z.shape[1]} columns but {locs.shape[0]} locations"
        )
    basis = build_basis(locs)
    folds = make_folds(weights, n_folds, seed)
    fits = []
    alphas = []
    for row in z:
        alpha, fit, _ = cross_validate(
            locs, row, weights, candidates, n_folds, seed, basis=basis, folds=folds
        )
        fits.append(fit)
        alphas.append(alpha)
    return ContinuousLatentMap(fits=fits, alphas=np.array(alphas))
