"""Linearized system, weights and feature vectors."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rss_aoa_positioning.errors import ConfigurationError
from rss_aoa_positioning.linearization import (
    LinearSystem,
    WeightVector,
    apply_weights,
    build_features,
    build_system,
    build_weights,
    direction_vectors,
    feature_arrays,
    feature_vector,
    lambda_eta,
    system_arrays,
    unvec_features,
    weight_arrays,
    weight_rows,
    weighting_matrix,
)
from rss_aoa_positioning.measurement import MeasurementVector, NoiseConfig, synthesize_measurements
from rss_aoa_positioning.scene import PathLossConfig, Scene, geometry

from .scene_generator import MATCHED_PATH_LOSS, measurement_batch

_RSS = arrays(np.float64, st.integers(4, 8), elements=st.floats(-90.0, 0.0))


def test_lambda_equals_eta_at_reference_power(default_pl: PathLossConfig) -> None:
    lam, eta = lambda_eta(np.array([default_pl.p0_dbm]), default_pl)
    assert lam[0] == pytest.approx(eta, rel=1e-15)


def test_lambda_hand_value(default_pl: PathLossConfig) -> None:
    lam, _ = lambda_eta(np.array([-35.0]), default_pl)
    assert lam[0] == pytest.approx(10**-1.4, rel=1e-12)
    assert lam[0] == pytest.approx(0.039811, abs=1e-6)


def test_lambda_times_distance_is_constant() -> None:
    batch = measurement_batch(1000, seed=1)
    lam, eta = lambda_eta(batch.rss, MATCHED_PATH_LOSS)
    distance, _, _ = geometry(batch.targets, batch.anchors)
    np.testing.assert_allclose(lam * distance, eta * MATCHED_PATH_LOSS.d0, rtol=1e-12)


def test_direction_vectors_axis_cases() -> None:
    u, c = direction_vectors(np.array([0.0, math.pi / 4]), np.array([math.pi / 2, math.pi / 2]))
    np.testing.assert_allclose(u[0], [1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(c[0], [0, 1, 0], atol=1e-15)
    np.testing.assert_allclose(u[1], [math.sqrt(2) / 2, math.sqrt(2) / 2, 0], atol=1e-15)


def test_direction_vectors_are_orthogonal_unit_vectors() -> None:
    rng = np.random.default_rng(2)
    u, c = direction_vectors(rng.uniform(-math.pi, math.pi, 10_000), rng.uniform(0, math.pi, 10_000))
    assert np.max(np.abs(np.sum(u * c, axis=-1))) < 1e-14
    np.testing.assert_allclose(np.linalg.norm(u, axis=-1), 1.0, rtol=1e-14)


def test_system_dimensions(desk_scene: Scene, matched_pl: PathLossConfig) -> None:
    theta = synthesize_measurements(desk_scene, matched_pl, NoiseConfig(), np.random.default_rng(0))
    system = build_system(theta, desk_scene.anchors, matched_pl)
    assert system.A.shape == (12, 3)
    assert system.b.shape == (12,)
    assert system.anchor_count == 4  # noqa: PLR2004


def test_noiseless_system_is_exact() -> None:
    batch = measurement_batch(1000, seed=3)
    A, b = system_arrays(batch.rss, batch.azimuth, batch.elevation, batch.anchors, MATCHED_PATH_LOSS)
    residual = np.einsum("mij,mj->mi", A, batch.targets) - b
    assert np.max(np.abs(residual)) < 1e-9


def test_horizontal_elevation_row(default_pl: PathLossConfig) -> None:
    anchors = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 1.0, 2.0], [3.0, 3.0, 9.0]])
    theta = MeasurementVector(rss=np.full(4, -30.0), azimuth=np.zeros(4), elevation=np.full(4, math.pi / 2))
    system = build_system(theta, anchors, default_pl)
    np.testing.assert_allclose(system.A[8:], np.tile([0.0, 0.0, -1.0], (4, 1)), atol=1e-15)
    np.testing.assert_allclose(system.b[8:], -anchors[:, 2], atol=1e-14)


def test_equal_powers_give_equal_weights(default_pl: PathLossConfig) -> None:
    weights = build_weights(np.full(4, -42.0), default_pl)
    np.testing.assert_allclose(weights.w, 0.75, rtol=1e-15)


def test_distance_estimate_hand_value(default_pl: PathLossConfig) -> None:
    weights = build_weights(np.array([default_pl.p0_dbm - 25.0] * 4), default_pl)
    np.testing.assert_allclose(weights.d_hat, 10.0, rtol=1e-12)


@settings(max_examples=200, deadline=None)
@given(rss=_RSS)
def test_weights_sum_to_n_minus_one(rss: np.ndarray) -> None:
    w, d_hat = weight_arrays(rss, PathLossConfig())
    assert math.isclose(float(np.sum(w)), rss.shape[0] - 1, abs_tol=1e-12)
    assert np.all(d_hat > 0)
    assert np.all((w >= 0) & (w < 1))


def _random_system(rng: np.random.Generator, n: int = 4) -> LinearSystem:
    return LinearSystem(A=rng.normal(size=(3 * n, 3)), b=rng.normal(size=3 * n))


def test_unit_weights_are_identity(rng: np.random.Generator) -> None:
    system = _random_system(rng)
    A_w, b_w = apply_weights(system, WeightVector(w=np.ones(4), d_hat=np.ones(4)))
    np.testing.assert_array_equal(A_w, system.A)
    np.testing.assert_array_equal(b_w, system.b)


def test_uniform_weights_scale_system(rng: np.random.Generator) -> None:
    system = _random_system(rng)
    A_w, b_w = apply_weights(system, WeightVector(w=np.full(4, 0.75), d_hat=np.ones(4)))
    np.testing.assert_allclose(A_w, 0.75 * system.A, rtol=1e-15)
    np.testing.assert_allclose(b_w, 0.75 * system.b, rtol=1e-15)


def test_weighting_scales_rows_by_anchor(rng: np.random.Generator) -> None:
    n = 5
    system = _random_system(rng, n)
    w = rng.uniform(0.1, 1.0, n)
    A_w, b_w = weight_rows(system.A, system.b, w)
    for block in range(3):
        for i in range(n):
            row = block * n + i
            np.testing.assert_allclose(A_w[row], w[i] * system.A[row], rtol=1e-15)
            assert b_w[row] == pytest.approx(w[i] * system.b[row], rel=1e-15)
    W = weighting_matrix(w)
    np.testing.assert_allclose(W @ system.A, A_w, rtol=1e-14)
    np.testing.assert_allclose(W @ system.b, b_w, rtol=1e-14)


def test_weight_count_must_match_rows(rng: np.random.Generator) -> None:
    system = _random_system(rng)
    with pytest.raises(ConfigurationError):
        weight_rows(system.A, system.b, np.ones(5))


def test_feature_vector_layout(rng: np.random.Generator) -> None:
    system = _random_system(rng)
    features = feature_vector(system.A, system.b)
    assert features.x.shape == (48,)
    np.testing.assert_array_equal(features.x[:12], system.A[:, 0])
    np.testing.assert_array_equal(features.x[24:36], system.A[:, 2])
    np.testing.assert_array_equal(features.x[36:], system.b)


def test_zero_features() -> None:
    np.testing.assert_array_equal(feature_vector(np.zeros((12, 3)), np.zeros(12)).x, np.zeros(48))


def test_feature_vector_rejects_bad_shapes() -> None:
    with pytest.raises(ConfigurationError):
        feature_vector(np.zeros((12, 2)), np.zeros(12))
    with pytest.raises(ConfigurationError):
        unvec_features(np.zeros(47), 4)


@settings(max_examples=100, deadline=None)
@given(
    A=arrays(np.float64, (15, 3), elements=st.floats(-1e6, 1e6)),
    b=arrays(np.float64, (15,), elements=st.floats(-1e6, 1e6)),
)
def test_unvec_inverts_feature_vector(A: np.ndarray, b: np.ndarray) -> None:
    A_back, b_back = unvec_features(feature_vector(A, b).x, 5)
    np.testing.assert_array_equal(A_back, A)
    np.testing.assert_array_equal(b_back, b)


def test_build_features_matches_step_by_step() -> None:
    batch = measurement_batch(20, seed=5, noise=NoiseConfig.from_degrees(3.0, 5.0, 5.0))
    features = build_features(batch.rss, batch.azimuth, batch.elevation, batch.anchors, MATCHED_PATH_LOSS)
    assert features.shape == (20, 48)
    for i in range(20):
        theta = MeasurementVector(rss=batch.rss[i], azimuth=batch.azimuth[i], elevation=batch.elevation[i])
        system = build_system(theta, batch.anchors[i], MATCHED_PATH_LOSS)
        A_w, b_w = apply_weights(system, build_weights(theta.rss, MATCHED_PATH_LOSS))
        np.testing.assert_allclose(features[i], feature_arrays(A_w, b_w), rtol=1e-14, atol=1e-14)


def test_measurement_anchor_mismatch(default_pl: PathLossConfig) -> None:
    with pytest.raises(ConfigurationError):
        system_arrays(np.zeros(4), np.zeros(4), np.zeros(4), np.zeros((5, 3)), default_pl)
