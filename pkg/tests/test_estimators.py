"""Closed-form WLS/LS solvers."""

import numpy as np
import pytest

from rss_aoa_positioning.const import Method
from rss_aoa_positioning.errors import ConfigurationError, SingularGeometryError
from rss_aoa_positioning.estimators import (
    estimate_from_measurements,
    solve_batch,
    solve_ls,
    solve_ls_batch,
    solve_wls,
    solve_wls_batch,
)
from rss_aoa_positioning.linearization import (
    LinearSystem,
    WeightVector,
    apply_weights,
    build_system,
    build_weights,
    system_arrays,
    weight_arrays,
    weighting_matrix,
)
from rss_aoa_positioning.measurement import MeasurementVector, NoiseConfig

from .scene_generator import MATCHED_PATH_LOSS, MeasurementBatch, measurement_batch


def _theta(batch: MeasurementBatch, i: int) -> MeasurementVector:
    return MeasurementVector(rss=batch.rss[i], azimuth=batch.azimuth[i], elevation=batch.elevation[i])


def _unit_weights() -> WeightVector:
    return WeightVector(w=np.ones(4), d_hat=np.ones(4))


def test_noiseless_recovery_single() -> None:
    batch = measurement_batch(25, seed=11)
    for i in range(25):
        system = build_system(_theta(batch, i), batch.anchors[i], MATCHED_PATH_LOSS)
        wls = solve_wls(system, build_weights(batch.rss[i], MATCHED_PATH_LOSS))
        ls = solve_ls(system)
        assert np.linalg.norm(wls.position.as_array() - batch.targets[i]) < 1e-6
        assert np.linalg.norm(ls.position.as_array() - batch.targets[i]) < 1e-6
        assert wls.method_tag == Method.WLS
        assert ls.method_tag == Method.LS


def test_noiseless_recovery_batch() -> None:
    batch = measurement_batch(1000, seed=12)
    A, b = system_arrays(batch.rss, batch.azimuth, batch.elevation, batch.anchors, MATCHED_PATH_LOSS)
    w, _ = weight_arrays(batch.rss, MATCHED_PATH_LOSS)
    for result in (solve_wls_batch(A, b, w), solve_ls_batch(A, b)):
        assert not result.failed.any()
        assert np.max(np.linalg.norm(result.positions - batch.targets, axis=-1)) < 1e-6


def test_unit_weights_match_least_squares() -> None:
    batch = measurement_batch(1, seed=13, noise=NoiseConfig.from_degrees(3.0, 5.0, 5.0))
    system = build_system(_theta(batch, 0), batch.anchors[0], MATCHED_PATH_LOSS)
    wls = solve_wls(system, _unit_weights())
    ls = solve_ls(system)
    np.testing.assert_allclose(wls.position.as_array(), ls.position.as_array(), rtol=1e-12, atol=1e-12)


def test_consistent_stacked_identity() -> None:
    system = LinearSystem(A=np.tile(np.eye(3), (4, 1)), b=np.tile([1.0, 2.0, 3.0], 4))
    for estimate in (solve_wls(system, _unit_weights()), solve_ls(system)):
        np.testing.assert_allclose(estimate.position.as_array(), [1, 2, 3], atol=1e-12)
        assert estimate.condition_estimate == pytest.approx(1.0)


def test_least_squares_residual_is_minimal() -> None:
    batch = measurement_batch(1, seed=14, noise=NoiseConfig.from_degrees(4.0, 8.0, 8.0))
    system = build_system(_theta(batch, 0), batch.anchors[0], MATCHED_PATH_LOSS)
    best = solve_ls(system).position.as_array()
    best_residual = np.linalg.norm(system.A @ best - system.b)
    rng = np.random.default_rng(15)
    for _ in range(100):
        candidate = best + rng.normal(scale=1.0, size=3)
        assert best_residual <= np.linalg.norm(system.A @ candidate - system.b)


def test_weighted_solution_matches_normal_equations() -> None:
    batch = measurement_batch(20, seed=17, noise=NoiseConfig.from_degrees(3.0, 5.0, 5.0))
    for i in range(20):
        system = build_system(_theta(batch, i), batch.anchors[i], MATCHED_PATH_LOSS)
        weights = build_weights(batch.rss[i], MATCHED_PATH_LOSS)
        W = weighting_matrix(weights.w)
        WtW = W.T @ W
        expected = np.linalg.solve(system.A.T @ WtW @ system.A, system.A.T @ WtW @ system.b)
        estimate = solve_wls(system, weights).position.as_array()
        assert np.linalg.norm(estimate - expected) <= 1e-10 * max(1.0, np.linalg.norm(expected)), i


def test_weighted_residual_is_minimal() -> None:
    batch = measurement_batch(5, seed=18, noise=NoiseConfig.from_degrees(4.0, 8.0, 8.0))
    rng = np.random.default_rng(19)
    for i in range(5):
        system = build_system(_theta(batch, i), batch.anchors[i], MATCHED_PATH_LOSS)
        weights = build_weights(batch.rss[i], MATCHED_PATH_LOSS)
        W = weighting_matrix(weights.w)
        best = solve_wls(system, weights).position.as_array()
        best_residual = np.linalg.norm(W @ (system.A @ best - system.b))
        for _ in range(100):
            candidate = best + rng.normal(scale=1.0, size=3)
            assert best_residual <= np.linalg.norm(W @ (system.A @ candidate - system.b))


def test_condition_estimate_matches_normal_equations() -> None:
    batch = measurement_batch(1, seed=16, noise=NoiseConfig.from_degrees(3.0, 5.0, 5.0))
    system = build_system(_theta(batch, 0), batch.anchors[0], MATCHED_PATH_LOSS)
    weights = build_weights(batch.rss[0], MATCHED_PATH_LOSS)
    A_w, _ = apply_weights(system, weights)
    estimate = solve_wls(system, weights)
    assert estimate.condition_estimate == pytest.approx(np.linalg.cond(A_w.T @ A_w), rel=1e-6)


def test_rank_deficient_system_raises() -> None:
    A = np.zeros((12, 3))
    A[:, 0] = 1.0
    system = LinearSystem(A=A, b=np.ones(12))
    with pytest.raises(SingularGeometryError) as err:
        solve_ls(system)
    assert err.value.condition_estimate > 1e12  # noqa: PLR2004


def test_batch_flags_only_singular_rows() -> None:
    good = np.tile(np.eye(3), (4, 1))
    bad = np.zeros((12, 3))
    bad[:, 1] = 1.0
    result = solve_batch(np.stack([good, bad, good]), np.tile(np.tile([1.0, 2.0, 3.0], 4), (3, 1)))
    np.testing.assert_array_equal(result.failed, [False, True, False])
    assert np.isnan(result.positions[1]).all()
    np.testing.assert_allclose(result.positions[[0, 2]], [[1, 2, 3], [1, 2, 3]], atol=1e-12)


def test_estimate_from_measurements() -> None:
    batch = measurement_batch(1, seed=17)
    theta = _theta(batch, 0)
    estimate = estimate_from_measurements(theta, batch.anchors[0], MATCHED_PATH_LOSS)
    assert np.linalg.norm(estimate.position.as_array() - batch.targets[0]) < 1e-6
    with pytest.raises(ConfigurationError):
        estimate_from_measurements(theta, batch.anchors[0], MATCHED_PATH_LOSS, Method.MLP_PRE)


def test_solver_rejects_bad_shapes() -> None:
    with pytest.raises(ConfigurationError):
        solve_ls(LinearSystem(A=np.zeros((12, 2)), b=np.zeros(12)))
