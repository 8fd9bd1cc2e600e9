import numpy as np
import pytest

import oracles
from pmdrom import apply_lifting, fit_lifting
from pmdrom.exceptions import ShapeMismatchError


def test_exact_interpolation_tiny_case():
    # embeddings {1, 2}, residual columns [3], [6], linear kernel with offset 1:
    # M = [[2, 3], [3, 5]] is invertible, so training residuals come back exactly
    phi = np.array([[1.0, 2.0]])
    res = np.array([[3.0, 6.0]])
    op = fit_lifting(phi, res, offset=1.0, degree=1, ridge=0.0)
    assert np.allclose(apply_lifting(op, phi), res, atol=1e-10)


def test_training_residuals_reproduced(rng):
    phi = rng.normal(size=(2, 6))
    res = rng.normal(size=(20, 6))
    op = fit_lifting(phi, res, offset=1.0, degree=2, ridge=0.0)
    assert np.allclose(apply_lifting(op, phi), res, atol=1e-8)


def test_huge_ridge_collapses_to_zero(rng):
    phi = rng.normal(size=(2, 5))
    res = rng.normal(size=(8, 5))
    op = fit_lifting(phi, res, offset=1.0, degree=2, ridge=1e12)
    assert np.abs(apply_lifting(op, phi)).max() <= 1e-8


def test_zero_coords_zero_offset():
    phi = np.array([[1.0, -1.0, 0.5]])
    res = np.ones((4, 3))
    op = fit_lifting(phi, res, offset=0.0, degree=2, ridge=1e-6)
    assert np.allclose(apply_lifting(op, np.zeros(1)), 0.0)


def test_linearity_in_residuals(rng):
    phi = rng.normal(size=(2, 5))
    res = rng.normal(size=(7, 5))
    q = rng.normal(size=(2, 3))
    once = apply_lifting(fit_lifting(phi, res, ridge=1e-6), q)
    twice = apply_lifting(fit_lifting(phi, 2 * res, ridge=1e-6), q)
    assert np.allclose(twice, 2 * once, atol=1e-10)


def test_matches_feature_map_ridge(rng):
    for _ in range(8):
        dim = int(rng.integers(1, 4))
        n = int(rng.integers(4, 10))
        phi = rng.normal(size=(dim, n))
        res = rng.normal(size=(5, n))
        q = rng.normal(size=(dim, 3))
        degree = int(rng.integers(1, 4))
        ridge = float(rng.choice([1e-6, 1e-4, 1e-2]))
        op = fit_lifting(phi, res, offset=1.0, degree=degree, ridge=ridge)
        ref = oracles.feature_ridge_predict(phi, res, q, 1.0, degree, ridge)
        assert np.allclose(apply_lifting(op, q), ref, rtol=1e-8, atol=1e-8)


def test_reconstruction_improves_as_ridge_shrinks(rng):
    phi = rng.normal(size=(2, 6))
    res = rng.normal(size=(10, 6))
    errs = []
    for ridge in [1e2, 1.0, 1e-2, 1e-6]:
        op = fit_lifting(phi, res, offset=1.0, degree=2, ridge=ridge)
        errs.append(np.linalg.norm(apply_lifting(op, phi) - res, "fro"))
    assert all(a >= b - 1e-10 for a, b in zip(errs[:-1], errs[1:]))


def test_shape_checks(rng):
    phi = rng.normal(size=(2, 5))
    res = rng.normal(size=(7, 4))
    with pytest.raises(ShapeMismatchError):
        fit_lifting(phi, res)
    op = fit_lifting(phi, rng.normal(size=(7, 5)))
    with pytest.raises(ShapeMismatchError):
        apply_lifting(op, np.zeros(3))
