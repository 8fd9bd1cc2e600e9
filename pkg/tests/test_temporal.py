import numpy as np
import pytest

from pmdrom import (
    SnapshotMatrix,
    TemporalPMD,
    fit_linear_dynamics,
    fit_manifold_dynamics,
    nystrom_extend,
    step_nonlinear,
    temporal_forecast,
    temporal_predict,
)
from pmdrom.exceptions import (
    DegenerateEmbeddingError,
    HarmonicCutoffError,
    OutOfDomainError,
)
from pmdrom.lifting import LiftingOperator
from pmdrom.temporal import (
    LinearDynamics,
    ManifoldDynamics,
    pmd_reconstruct,
    propagate_linear,
)
from pmdrom.snapshots import ScalingStats
from pmdrom.reduction import truncated_svd


def test_linear_dynamics_doubling():
    dyn = fit_linear_dynamics(np.array([[1.0, 2.0, 4.0]]), ridge=0.0)
    assert np.isclose(dyn.matrix[0, 0], 2.0, atol=1e-10)


def test_linear_dynamics_scalar_closed_form():
    for a in [0.5, 1.3, 2.0]:
        for ridge in [0.0, 0.1, 10.0]:
            z = np.array([[1.0, a, a * a]])
            dyn = fit_linear_dynamics(z, ridge=ridge)
            expected = a * (1 + a * a) / (1 + a * a + ridge)
            assert np.isclose(dyn.matrix[0, 0], expected, rtol=1e-12)
    # huge ridge shrinks the operator to zero
    dyn = fit_linear_dynamics(np.array([[1.0, 2.0, 4.0]]), ridge=1e12)
    assert abs(dyn.matrix[0, 0]) <= 1e-10


def test_propagation():
    dyn = fit_linear_dynamics(np.array([[1.0, 2.0, 4.0]]), ridge=0.0)
    path = propagate_linear(dyn, np.array([1.0]), 3)
    assert np.allclose(path, [[2.0, 4.0, 8.0]], atol=1e-9)


def test_propagation_identity_and_power_oracle(rng):
    z = rng.normal(size=(3, 5))
    # A = I keeps the start vector constant
    const = propagate_linear(LinearDynamics(matrix=np.eye(3), ridge=0.0),
                             z[:, 0], 4)
    assert np.allclose(const, z[:, 0][:, None])
    # columns equal A^k z against a direct matrix-power oracle
    a = rng.normal(size=(3, 3)) * 0.5
    path = propagate_linear(LinearDynamics(matrix=a, ridge=0.0), z[:, 0], 4)
    for k in range(4):
        assert np.allclose(path[:, k], np.linalg.matrix_power(a, k + 1) @ z[:, 0],
                           atol=1e-12)


def geometric_embeddings(a=1.2, m=8):
    return np.array([[a**k for k in range(m)]])


def test_manifold_dynamics_structure():
    dyn = fit_manifold_dynamics(geometric_embeddings(), ridge=1e-10)
    # reconstruct the Markov matrix from the stored pieces
    kernel = np.exp(-((dyn.geodesics / dyn.bandwidth) ** 2))
    assert np.allclose(kernel.sum(axis=1), dyn.degrees)
    p = kernel / dyn.degrees[:, None]
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)
    # spectrum of the Gaussian-kernel chain lies in [0, 1]
    assert dyn.eigenvalues[0] <= 1 + 1e-10
    assert dyn.eigenvalues[-1] >= -1e-10
    # harmonics are eigenvectors of P, normalized against the degrees
    for j in range(dyn.harmonics.shape[1]):
        u = dyn.harmonics[:, j]
        assert np.allclose(p @ u, dyn.eigenvalues[j] * u, atol=1e-9)
        assert np.isclose(u @ (dyn.degrees * u), 1.0, atol=1e-9)


def test_constant_embedding_rejected():
    with pytest.raises(DegenerateEmbeddingError):
        fit_manifold_dynamics(np.ones((1, 5)))


def test_expansion_completeness():
    dyn = fit_manifold_dynamics(geometric_embeddings(), ridge=1e-10)
    sampled = dyn.omega @ dyn.anchors
    rebuilt = dyn.coeffs @ dyn.harmonics.T
    assert np.allclose(rebuilt, sampled, atol=1e-9)


def test_nystrom_reproduces_training_harmonics():
    dyn = fit_manifold_dynamics(geometric_embeddings(), ridge=1e-10)
    for j in dyn.retained:
        for i in range(dyn.anchors.shape[1]):
            value = nystrom_extend(dyn, dyn.anchors[:, i], int(j))
            assert np.isclose(value, dyn.harmonics[i, j], atol=1e-9)


def test_nystrom_literal_form_scales_by_degree():
    # the unnormalized extension returns degree * harmonic at a training point,
    # which is why the normalized form is the default
    dyn = fit_manifold_dynamics(geometric_embeddings(), ridge=1e-10)
    j = int(dyn.retained[1])
    literal = nystrom_extend(dyn, dyn.anchors[:, 2], j, literal=True)
    assert np.isclose(literal, dyn.degrees[2] * dyn.harmonics[2, j], atol=1e-9)


def test_nystrom_floor_and_range():
    dyn = fit_manifold_dynamics(geometric_embeddings(), ridge=1e-10)
    with pytest.raises(HarmonicCutoffError):
        nystrom_extend(dyn, dyn.anchors[:, 0], dyn.anchors.shape[1] + 3)
    tiny = int(np.argmin(dyn.eigenvalues))
    if dyn.eigenvalues[tiny] <= dyn.floor:
        with pytest.raises(HarmonicCutoffError):
            nystrom_extend(dyn, dyn.anchors[:, 0], tiny)


def symmetric_pair_dynamics(q=0.3):
    # two anchors at -1 and 1: A = [[1, q], [q, 1]], D = 1 + q,
    # eigenpairs (1, [1,1]) and ((1-q)/(1+q), [1,-1]); u_j^T D u_j = 1
    scale = 1.0 / np.sqrt(2.0 * (1.0 + q))
    harmonics = scale * np.array([[1.0, 1.0], [1.0, -1.0]])
    bandwidth = 2.0 / np.sqrt(-np.log(q))
    return ManifoldDynamics(
        anchors=np.array([[-1.0, 1.0]]),
        geodesics=np.array([[0.0, 2.0], [2.0, 0.0]]),
        bandwidth=bandwidth,
        degrees=np.array([1.0 + q, 1.0 + q]),
        harmonics=harmonics,
        eigenvalues=np.array([1.0, (1.0 - q) / (1.0 + q)]),
        coeffs=np.zeros((1, 2)),
        omega=np.zeros((1, 1)),
        ridge=0.0,
    )


def test_nystrom_midpoint_symmetry():
    dyn = symmetric_pair_dynamics()
    for j in range(2):
        mid = nystrom_extend(dyn, np.array([0.0]), j)
        average = 0.5 * (dyn.harmonics[0, j] + dyn.harmonics[1, j])
        assert np.isclose(mid, average, atol=1e-12)


def test_step_at_training_point_matches_regression():
    dyn = fit_manifold_dynamics(geometric_embeddings(), ridge=1e-10)
    assert dyn.retained.size == dyn.eigenvalues.size  # all harmonics kept
    for i in range(dyn.anchors.shape[1]):
        stepped = step_nonlinear(dyn, dyn.anchors[:, i])
        assert np.allclose(stepped, dyn.omega @ dyn.anchors[:, i], atol=1e-8)


def test_step_geometric_sequence_one_step():
    a = 1.2
    phi = geometric_embeddings(a)
    dyn = fit_manifold_dynamics(phi, ridge=1e-10)
    last = phi[:, -1]
    stepped = step_nonlinear(dyn, last)
    assert abs(stepped[0] - a * last[0]) <= 0.05 * abs(a * last[0])
    # the next step lands on a point never seen in training
    again = step_nonlinear(dyn, stepped)
    assert abs(again[0] - a * stepped[0]) <= 0.05 * abs(a * stepped[0])


def test_step_zero_coefficients():
    dyn = fit_manifold_dynamics(geometric_embeddings(), ridge=1e-10)
    dyn.coeffs[:] = 0.0
    assert np.allclose(step_nonlinear(dyn, dyn.anchors[:, 0]), 0.0)


def reconstruction_pieces(rng):
    states = rng.normal(size=(6, 5))
    stats = ScalingStats(mean=states.mean(axis=1), scale=states.std(axis=1, ddof=1))
    standardized = (states - stats.mean[:, None]) / stats.scale[:, None]
    basis = truncated_svd(standardized, rank=2)
    return states, stats, basis


def test_reconstruct_pure_linear(rng):
    states, stats, basis = reconstruction_pieces(rng)
    lifting = LiftingOperator(anchors=np.zeros((1, 3)), dual=np.zeros((6, 3)),
                              offset=1.0, degree=1, ridge=0.0)
    z = rng.normal(size=2)
    out = pmd_reconstruct(basis, z, lifting, np.array([0.5]), stats)
    expected = (basis.modes @ z) * stats.scale + stats.mean
    assert np.allclose(out, expected, atol=1e-12)
    # zero latent and zero lifting give the mean vector back
    out = pmd_reconstruct(basis, np.zeros(2), lifting, np.array([0.0]), stats)
    assert np.allclose(out, stats.mean)


def trajectory_states(t, x):
    # two rotating mode pairs; every temporal profile is zero-mean over the
    # full period and closed under the time shift, so the intercept-free
    # one-step operators can represent the latent dynamics exactly
    w = 2.0 * np.pi / 8.0
    return (np.outer(np.sin(np.pi * x), np.cos(w * t))
            + 0.7 * np.outer(np.sin(2 * np.pi * x), np.sin(w * t))
            + 0.05 * np.outer(np.sin(3 * np.pi * x), np.cos(2 * w * t))
            + 0.03 * np.outer(np.sin(4 * np.pi * x), np.sin(2 * w * t)))


def trajectory_matrix(m=8, n=15):
    t = np.arange(m, dtype=float)
    x = np.linspace(0.05, 0.95, n)
    return SnapshotMatrix(data=trajectory_states(t, x), params=t,
                          n_spatial=n, n_time=1)


def fitted_estimator(mat):
    return TemporalPMD(rank=2, embed_dim=2, ridge=1e-10, lifting_offset=1.0,
                       lifting_degree=3, lifting_ridge=1e-10).fit(mat)


def test_reconstruct_training_columns():
    from pmdrom import embed_points
    from pmdrom.lifting import fit_lifting
    from pmdrom.reduction import linear_coordinates, residual_matrix
    from pmdrom.snapshots import standardize

    mat = trajectory_matrix()
    standardized, stats = standardize(mat)
    basis = truncated_svd(standardized, rank=2)
    coords = linear_coordinates(basis, standardized)
    residual = residual_matrix(basis, standardized)
    embedded, _ = embed_points(residual, embed_dim=2)
    lifting = fit_lifting(embedded.coordinates, residual,
                          offset=1.0, degree=3, ridge=1e-10)
    for i in [0, 3, 7]:
        rec = pmd_reconstruct(basis, coords[:, i], lifting,
                              embedded.coordinates[:, i], stats)
        rel = np.linalg.norm(rec - mat.data[:, i]) / np.linalg.norm(mat.data[:, i])
        assert rel <= 1e-6


def test_estimator_reconstructs_training_states():
    mat = trajectory_matrix()
    est = fitted_estimator(mat)
    for idx in [0, 4, 7]:
        rec = est.reconstruct(idx)
        rel = np.linalg.norm(rec - mat.data[:, idx]) / np.linalg.norm(mat.data[:, idx])
        assert rel <= 1e-6


def test_estimator_forecast_and_predict():
    mat = trajectory_matrix()
    est = fitted_estimator(mat)
    fc = est.forecast(3)
    assert fc.shape == (15, 3)
    assert np.allclose(est.predict(9.0), fc[:, 1])
    assert np.allclose(est.predict(5.0), est.reconstruct(5))
    with pytest.raises(OutOfDomainError):
        est.predict(8.37)
    with pytest.raises(OutOfDomainError):
        est.predict(-3.0)
    # module-level functions match the estimator methods
    assert np.allclose(temporal_predict(est.model_, 10.0), fc[:, 2])
    assert np.array_equal(temporal_forecast(est.model_, 3), fc)


def test_forecast_tracks_truth():
    mat = trajectory_matrix()
    est = fitted_estimator(mat)
    x = np.linspace(0.05, 0.95, 15)
    for t in [8.0, 9.0]:
        predicted = est.predict(t)
        truth = trajectory_states(np.array([t]), x)[:, 0]
        rel = np.linalg.norm(predicted - truth) / np.linalg.norm(truth)
        assert rel <= 0.05
