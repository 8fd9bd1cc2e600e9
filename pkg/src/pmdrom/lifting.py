"""Kernel lifting from embedding coordinates back to residual space.

The map is learned in dual form: with M the polynomial kernel Gram matrix of
the training embeddings, the dual weights are residuals @ (M + ridge I)^{-1}
and a new embedding is lifted through its kernel column against the training
anchors. The dual form keeps every solve at n_s x n_s even though the output
dimension N is much larger.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ShapeMismatchError
from .kernels import PolyKernelParams, _as_columns, _ridge_solve, poly_kernel
from .validation import as_float_matrix


@dataclass
class LiftingOperator:
    """Dual-form polynomial-kernel map from embedding space to residual space."""

    anchors: np.ndarray  # (embed_dim, n_s) training embeddings
    dual: np.ndarray     # (N, n_s)
    offset: float
    degree: int
    ridge: float

    @property
    def params(self) -> PolyKernelParams:
        return PolyKernelParams(degree=self.degree, offset=self.offset, ridge=self.ridge)


def fit_lifting(embeddings, residuals, offset: float = 1.0, degree: int = 2,
                ridge: float = 1e-8) -> LiftingOperator:
    """Fit the dual lifting weights against training residual columns.

    Parameters
    ----------
    embeddings : ndarray, shape (embed_dim, n_s)
    residuals : ndarray, shape (N, n_s)
    offset, degree, ridge : kernel hyperparameters.

    Returns
    -------
    LiftingOperator
    """
    phi = as_float_matrix(embeddings, "embeddings")
    res = as_float_matrix(residuals, "residuals")
    if phi.shape[1] != res.shape[1]:
        raise ShapeMismatchError(
            f"{phi.shape[1]} embeddings but {res.shape[1]} residual columns"
        )
    gram = poly_kernel(phi, phi, offset, degree)
    dual = _ridge_solve(gram, res, float(ridge))
    return LiftingOperator(
        anchors=phi.copy(), dual=dual, offset=float(offset), degree=int(degree),
        ridge=float(ridge),
    )


def apply_lifting(operator: LiftingOperator, coords) -> np.ndarray:
    """Lift embedding coordinates to residual space.

    Returns
    -------
    ndarray, shape (N,) for a single coordinate vector, else (N, q).
    """
    q = _as_columns(coords, "coords")
    if q.shape[0] != operator.anchors.shape[0]:
        raise ShapeMismatchError(
            f"coordinate dimension {q.shape[0]} != anchor dimension "
            f"{operator.anchors.shape[0]}"
        )
    k = poly_kernel(operator.anchors, q, operator.offset, operator.degree)
    out = operator.dual @ k
    return out[:, 0] if np.ndim(coords) == 1 else out
