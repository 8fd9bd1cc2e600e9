import numpy as np
import pytest

from pmdrom import linear_coordinates, residual_matrix, truncated_svd
from pmdrom.exceptions import RankTooLargeError, ZeroMatrixError


def test_energy_rank_diagonal_cases():
    # singular values 2 and 1: energies 4 and 1, total 5
    mat = np.diag([2.0, 1.0])
    basis = truncated_svd(mat, energy_tol=0.2)   # need >= 4.0
    assert basis.rank == 1
    assert np.allclose(basis.singular_values, [2.0])
    basis = truncated_svd(mat, energy_tol=0.05)  # need >= 4.75
    assert basis.rank == 2


def test_energy_minimality(rng):
    for _ in range(10):
        mat = rng.normal(size=(9, 6))
        tol = float(rng.uniform(1e-4, 0.2))
        basis = truncated_svd(mat, energy_tol=tol)
        s = np.linalg.svd(mat, compute_uv=False)
        energies = s**2
        total = energies.sum()
        r = basis.rank
        assert energies[:r].sum() >= (1 - tol) * total
        if r > 1:
            # criterion fails one rank earlier (unless a tie forced expansion)
            tied = (s[r - 2] - s[r - 1]) <= 1e-12 * s[0]
            assert tied or energies[:r - 1].sum() < (1 - tol) * total


def test_explicit_rank_reconstruction(rng):
    mat = rng.normal(size=(8, 5))
    basis = truncated_svd(mat, rank=5)
    rebuilt = basis.modes @ np.diag(basis.singular_values) @ basis.right_vectors.T
    assert np.allclose(rebuilt, mat, atol=1e-10)


def test_rank_bounds_and_zero_matrix():
    with pytest.raises(ZeroMatrixError):
        truncated_svd(np.zeros((3, 3)))
    with pytest.raises(RankTooLargeError):
        truncated_svd(np.eye(3), rank=4)
    with pytest.raises(RankTooLargeError):
        truncated_svd(np.eye(3), energy_tol=1.5)


def test_tied_boundary_expands():
    # energies 4,1,1,0.01 (total 6.01): the criterion alone gives r=2, but the
    # second and third singular values tie, so the whole group is kept
    mat = np.diag([2.0, 1.0, 1.0, 0.1])
    basis = truncated_svd(mat, energy_tol=0.25)
    assert basis.rank == 3


def test_sign_convention(rng):
    for _ in range(5):
        mat = rng.normal(size=(7, 5))
        basis = truncated_svd(mat, rank=3)
        for j in range(3):
            pivot = np.argmax(np.abs(basis.modes[:, j]))
            assert basis.modes[pivot, j] > 0
        # flipping input signs leaves the convention intact
        flipped = truncated_svd(-mat, rank=3)
        for j in range(3):
            pivot = np.argmax(np.abs(flipped.modes[:, j]))
            assert flipped.modes[pivot, j] > 0


def test_orthonormal_factors(rng):
    mat = rng.normal(size=(10, 6))
    basis = truncated_svd(mat, rank=4)
    assert np.allclose(basis.modes.T @ basis.modes, np.eye(4), atol=1e-12)
    assert np.allclose(basis.right_vectors.T @ basis.right_vectors, np.eye(4), atol=1e-12)


def test_linear_coordinates_diagonal():
    basis = truncated_svd(np.diag([2.0, 1.0]), rank=2)
    assert np.allclose(linear_coordinates(basis), np.diag([2.0, 1.0]))
    basis = truncated_svd(np.diag([2.0, 1.0]), rank=1)
    assert np.allclose(linear_coordinates(basis), [[2.0, 0.0]])


def test_coordinates_match_direct_multiply(rng):
    mat = rng.normal(size=(9, 6))
    basis = truncated_svd(mat, rank=4)
    z = linear_coordinates(basis, mat)
    assert np.allclose(basis.modes @ z,
                       basis.modes @ np.diag(basis.singular_values) @ basis.right_vectors.T,
                       atol=1e-12)
    assert np.allclose(z, basis.modes.T @ mat, atol=1e-10)


def test_residual_diagonal_case():
    basis = truncated_svd(np.diag([2.0, 1.0]), rank=1)
    res = residual_matrix(basis, np.diag([2.0, 1.0]))
    assert np.allclose(res, [[0.0, 0.0], [0.0, 1.0]], atol=1e-12)


def test_full_rank_residual_vanishes(rng):
    mat = rng.normal(size=(6, 4))
    basis = truncated_svd(mat, rank=4)
    assert np.abs(residual_matrix(basis, mat)).max() <= 1e-10


def test_residual_tail_identity(rng):
    for _ in range(10):
        mat = rng.normal(size=(8, 6))
        r = int(rng.integers(1, 5))
        basis = truncated_svd(mat, rank=r)
        res = residual_matrix(basis, mat)
        s = np.linalg.svd(mat, compute_uv=False)
        tail = (s[basis.rank:] ** 2).sum()
        assert np.isclose(np.linalg.norm(res, "fro") ** 2, tail, rtol=1e-9)
        # residual is orthogonal to the retained right vectors
        assert np.abs(res @ basis.right_vectors).max() <= 1e-10 * s[0]


def test_decomposition_identity(rng):
    for _ in range(10):
        mat = rng.normal(size=(10, 7))
        r = int(rng.integers(1, 7))
        basis = truncated_svd(mat, rank=r)
        rebuilt = basis.modes @ linear_coordinates(basis) + residual_matrix(basis, mat)
        rel = np.linalg.norm(rebuilt - mat, "fro") / np.linalg.norm(mat, "fro")
        assert rel <= 1e-9


def test_eckart_young_spot_check(rng):
    mat = rng.normal(size=(8, 6))
    basis = truncated_svd(mat, rank=2)
    best = np.linalg.norm(mat - basis.modes @ linear_coordinates(basis), "fro")
    for _ in range(20):
        a = rng.normal(size=(8, 2))
        b = rng.normal(size=(2, 6))
        assert best <= np.linalg.norm(mat - a @ b, "fro") + 1e-12
