"""Linearization of RSS/AoA measurements into a weighted linear system and MLP features.

Every function accepts a leading batch shape: angles and RSS of shape (..., N),
anchors of shape (..., N, 3). The system rows are ordered as N RSS rows, N
azimuth rows, N elevation rows. All conversions use the receiver's path-loss
exponent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import ConfigurationError
from .measurement import MeasurementVector
from .scene import PathLossConfig, as_anchor_array

_K = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True, eq=False)
class LinearSystem:
    A: np.ndarray
    """(..., 3N, 3)"""
    b: np.ndarray
    """(..., 3N)"""

    @property
    def anchor_count(self) -> int:
        return int(self.A.shape[-2] // 3)


@dataclass(frozen=True, eq=False)
class WeightVector:
    w: np.ndarray
    d_hat: np.ndarray
    """RSS-based distance estimates in meters."""


@dataclass(frozen=True, eq=False)
class FeatureVector:
    x: np.ndarray
    """vec(A_w) column-major, then b_w; length 12N."""


def lambda_eta(rss: Any, pl: PathLossConfig) -> tuple[np.ndarray, float]:
    lam = np.power(10.0, np.asarray(rss, dtype=float) / (10.0 * pl.gamma_rx))
    eta = float(10.0 ** (pl.p0_dbm / (10.0 * pl.gamma_rx)))
    return lam, eta


def direction_vectors(azimuth: Any, elevation: Any) -> tuple[np.ndarray, np.ndarray]:
    """Unit direction vectors u and their horizontal normals c, shape (..., N, 3)."""
    phi = np.asarray(azimuth, dtype=float)
    alpha = np.asarray(elevation, dtype=float)
    sin_alpha = np.sin(alpha)
    u = np.stack([np.cos(phi) * sin_alpha, np.sin(phi) * sin_alpha, np.cos(alpha)], axis=-1)
    c = np.stack([-np.sin(phi), np.cos(phi), np.zeros_like(phi)], axis=-1)
    return u, c


def system_arrays(
    rss: Any, azimuth: Any, elevation: Any, anchors: Any, pl: PathLossConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Batched A and b from raw measurements."""
    rss = np.asarray(rss, dtype=float)
    elevation = np.asarray(elevation, dtype=float)
    anchors = np.asarray(anchors, dtype=float)
    if rss.shape[-1] != anchors.shape[-2]:
        msg = f"{rss.shape[-1]} measurements for {anchors.shape[-2]} anchors"
        raise ConfigurationError(msg)

    lam, eta = lambda_eta(rss, pl)
    u, c = direction_vectors(azimuth, elevation)
    v = np.cos(elevation)[..., None] * u - _K

    rss_rows = lam[..., None] * u
    rss_rhs = np.sum(rss_rows * anchors, axis=-1) + eta * pl.d0
    azimuth_rhs = np.sum(c * anchors, axis=-1)
    elevation_rhs = np.sum(v * anchors, axis=-1)

    A = np.concatenate([rss_rows, c, v], axis=-2)
    b = np.concatenate([rss_rhs, azimuth_rhs, elevation_rhs], axis=-1)
    return A, b


def build_system(theta: MeasurementVector, anchors: Any, pl: PathLossConfig) -> LinearSystem:
    A, b = system_arrays(*theta.values(), as_anchor_array(anchors), pl)
    return LinearSystem(A=A, b=b)


def weight_arrays(rss: Any, pl: PathLossConfig) -> tuple[np.ndarray, np.ndarray]:
    """Batched (w, d_hat): w_i = 1 - d_hat_i / sum_j d_hat_j."""
    rss = np.asarray(rss, dtype=float)
    d_hat = pl.d0 * np.power(10.0, (pl.p0_dbm - rss) / (10.0 * pl.gamma_rx))
    w = 1.0 - d_hat / np.sum(d_hat, axis=-1, keepdims=True)
    return w, d_hat


def build_weights(rss: Any, pl: PathLossConfig) -> WeightVector:
    w, d_hat = weight_arrays(rss, pl)
    return WeightVector(w=w, d_hat=d_hat)


def weighting_matrix(w: Any) -> np.ndarray:
    """Dense W = I_3 kron diag(w) for a single weight vector."""
    return np.kron(np.eye(3), np.diag(np.asarray(w, dtype=float)))


def weight_rows(A: np.ndarray, b: np.ndarray, w: Any) -> tuple[np.ndarray, np.ndarray]:
    """Row scaling equivalent to W @ A and W @ b, batched."""
    w = np.asarray(w, dtype=float)
    if w.shape[-1] * 3 != b.shape[-1]:
        msg = f"{w.shape[-1]} weights for a system with {b.shape[-1]} rows"
        raise ConfigurationError(msg)
    scale = np.concatenate([w, w, w], axis=-1)
    return A * scale[..., None], b * scale


def apply_weights(sys: LinearSystem, w: WeightVector) -> tuple[np.ndarray, np.ndarray]:
    return weight_rows(sys.A, sys.b, w.w)


def feature_arrays(A_w: np.ndarray, b_w: np.ndarray) -> np.ndarray:
    """Batched column-major vec(A_w) followed by b_w."""
    lead = A_w.shape[:-2]
    vec_a = np.swapaxes(A_w, -1, -2).reshape(*lead, -1)
    return np.concatenate([vec_a, b_w], axis=-1)


def feature_vector(A_w: np.ndarray, b_w: np.ndarray) -> FeatureVector:
    A_w = np.asarray(A_w, dtype=float)
    b_w = np.asarray(b_w, dtype=float)
    if A_w.ndim != 2 or A_w.shape[1] != 3 or b_w.shape != (A_w.shape[0],):  # noqa: PLR2004
        msg = f"Expected A_w (3N, 3) and b_w (3N,), got {A_w.shape} and {b_w.shape}"
        raise ConfigurationError(msg)
    return FeatureVector(x=feature_arrays(A_w, b_w))


def unvec_features(x: Any, anchor_count: int) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of `feature_arrays`."""
    x = np.asarray(x, dtype=float)
    rows = 3 * anchor_count
    if x.shape[-1] != 4 * rows:
        msg = f"Feature length {x.shape[-1]} does not match {anchor_count} anchors"
        raise ConfigurationError(msg)
    lead = x.shape[:-1]
    A_w = np.swapaxes(x[..., : 3 * rows].reshape(*lead, 3, rows), -1, -2)
    return A_w, x[..., 3 * rows :]


def build_features(
    rss: Any, azimuth: Any, elevation: Any, anchors: Any, pl: PathLossConfig
) -> np.ndarray:
    """Full preprocessing chain, measurements to (..., 12N) feature vectors."""
    A, b = system_arrays(rss, azimuth, elevation, anchors, pl)
    w, _ = weight_arrays(rss, pl)
    return feature_arrays(*weight_rows(A, b, w))
