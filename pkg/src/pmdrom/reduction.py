"""Truncated singular value decomposition with energy-based rank selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import RankTooLargeError, ShapeMismatchError, ZeroMatrixError
from .validation import as_float_matrix

#: Relative tolerance (on the largest singular value) for boundary ties.
TIE_RTOL = 1e-12


@dataclass
class LinearBasis:
    """Rank-r factors of a standardized snapshot matrix.

    Attributes
    ----------
    modes : ndarray, shape (N, r)
        Orthonormal left singular vectors, sign-fixed so the
        largest-magnitude entry of each mode is positive.
    singular_values : ndarray, shape (r,)
        Nonincreasing, positive.
    right_vectors : ndarray, shape (n_s, r)
        Orthonormal right singular vectors (signs flipped with the modes).
    energy_fraction : float
        Captured squared-singular-value fraction, in (0, 1].
    """

    modes: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray
    energy_fraction: float

    @property
    def rank(self) -> int:
        return self.singular_values.shape[0]


def _fix_signs(modes: np.ndarray, right: np.ndarray):
    # Largest-magnitude entry of each left mode made positive; the paired
    # right vector flips with it so the product is unchanged.
    for j in range(modes.shape[1]):
        pivot = np.argmax(np.abs(modes[:, j]))
        if modes[pivot, j] < 0:
            modes[:, j] = -modes[:, j]
            right[:, j] = -right[:, j]
    return modes, right


def truncated_svd(matrix, energy_tol: float = 1e-3, rank: int | None = None) -> LinearBasis:
    """Factor ``matrix`` as modes * diag(singular_values) * right_vectors.T.

    The rank is either given explicitly or chosen as the smallest r whose
    leading squared singular values capture at least ``1 - energy_tol`` of
    the total squared-singular-value sum. Singular values tied with the one
    at the truncation boundary are kept (the rank expands), so the returned
    basis never splits a degenerate group.

    Parameters
    ----------
    matrix : ndarray, shape (N, n_s)
    energy_tol : float
        Discarded-energy tolerance; used only when ``rank`` is None.
    rank : int, optional
        Explicit truncation rank.

    Returns
    -------
    LinearBasis
    """
    mat = as_float_matrix(matrix, "matrix")
    if not np.any(mat):
        raise ZeroMatrixError("cannot factor an all-zero matrix")
    max_rank = min(mat.shape)
    if rank is not None:
        if not 1 <= rank <= max_rank:
            raise RankTooLargeError(f"rank {rank} outside [1, {max_rank}]")
    elif not 0 < energy_tol < 1:
        raise RankTooLargeError(f"energy_tol {energy_tol} outside (0, 1)")

    u, s, vt = np.linalg.svd(mat, full_matrices=False)
    energies = s**2
    total = energies.sum()

    if rank is None:
        cumulative = np.cumsum(energies)
        r = int(np.searchsorted(cumulative, (1.0 - energy_tol) * total) + 1)
        r = min(r, max_rank)
    else:
        r = rank
    # expand across a tied boundary
    tie_tol = TIE_RTOL * s[0]
    while r < max_rank and s[r] > 0 and (s[r - 1] - s[r]) <= tie_tol:
        r += 1

    modes = u[:, :r].copy()
    right = vt[:r].T.copy()
    modes, right = _fix_signs(modes, right)
    fraction = float(energies[:r].sum() / total)
    return LinearBasis(
        modes=modes,
        singular_values=s[:r].copy(),
        right_vectors=right,
        energy_fraction=fraction,
    )


def linear_coordinates(basis: LinearBasis, matrix=None) -> np.ndarray:
    """Reduced coordinates Z = diag(singular_values) * right_vectors.T.

    ``matrix`` is only used for a shape check; the coordinates come from the
    stored factors (they equal modes.T @ matrix up to rounding).

    Returns
    -------
    ndarray, shape (r, n_s)
    """
    if matrix is not None:
        mat = as_float_matrix(matrix, "matrix")
        if mat.shape[0] != basis.modes.shape[0] or mat.shape[1] != basis.right_vectors.shape[0]:
            raise ShapeMismatchError(
                f"matrix shape {mat.shape} does not match basis "
                f"({basis.modes.shape[0]}, {basis.right_vectors.shape[0]})"
            )
    return basis.singular_values[:, None] * basis.right_vectors.T


def residual_matrix(basis: LinearBasis, matrix) -> np.ndarray:
    """Part of ``matrix`` outside the span of the retained right vectors.

    Computed as matrix @ (I - Theta Theta.T); identical to
    matrix - modes @ diag(s) @ right_vectors.T up to rounding, and exactly
    orthogonal (to machine precision) to the retained right vectors.

    Returns
    -------
    ndarray, shape (N, n_s)
    """
    mat = as_float_matrix(matrix, "matrix")
    if mat.shape[0] != basis.modes.shape[0] or mat.shape[1] != basis.right_vectors.shape[0]:
        raise ShapeMismatchError(
            f"matrix shape {mat.shape} does not match basis "
            f"({basis.modes.shape[0]}, {basis.right_vectors.shape[0]})"
        )
    theta = basis.right_vectors
    return mat - (mat @ theta) @ theta.T
