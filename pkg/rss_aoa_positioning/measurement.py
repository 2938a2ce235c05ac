"""Noisy RSS/azimuth/elevation observations and their Gaussian likelihood."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import ConfigurationError
from .scene import PathLossConfig, Point3, Scene, SceneBatch, as_anchor_array, geometry, wrap_angle

_LOGGER = logging.getLogger(__name__)

Sigma = float | tuple[float, ...]


def _as_sigma(value: float | Sequence[float]) -> Sigma:
    if isinstance(value, int | float):
        return float(value)
    return tuple(float(v) for v in value)


@dataclass(frozen=True)
class NoiseConfig:
    """Noise standard deviations: RSS in dB, angles in radians.

    Each field is a scalar shared by all anchors or one value per anchor.
    """

    sigma_rss: Sigma = 0.0
    sigma_azimuth: Sigma = 0.0
    sigma_elevation: Sigma = 0.0

    def __post_init__(self) -> None:
        for name in ("sigma_rss", "sigma_azimuth", "sigma_elevation"):
            value = _as_sigma(getattr(self, name))
            object.__setattr__(self, name, value)
            values = value if isinstance(value, tuple) else (value,)
            if not all(math.isfinite(v) and v >= 0 for v in values):
                msg = f"{name} must be finite and >= 0, got {value}"
                raise ConfigurationError(msg)

    @classmethod
    def from_degrees(
        cls, sigma_rss: float, sigma_azimuth_deg: float, sigma_elevation_deg: float
    ) -> NoiseConfig:
        return cls(
            sigma_rss=sigma_rss,
            sigma_azimuth=math.radians(sigma_azimuth_deg),
            sigma_elevation=math.radians(sigma_elevation_deg),
        )

    @property
    def is_heterogeneous(self) -> bool:
        return any(
            isinstance(s, tuple) for s in (self.sigma_rss, self.sigma_azimuth, self.sigma_elevation)
        )

    def per_anchor(self, anchor_count: int) -> np.ndarray:
        """Sigmas as a (3, N) array in stacking order rss, azimuth, elevation."""
        rows = []
        for value in (self.sigma_rss, self.sigma_azimuth, self.sigma_elevation):
            row = np.asarray(value, dtype=float)
            if row.ndim and row.shape != (anchor_count,):
                msg = f"Per-anchor sigma has {row.shape[0]} entries for {anchor_count} anchors"
                raise ConfigurationError(msg)
            rows.append(np.broadcast_to(row, (anchor_count,)))
        return np.stack(rows)

    def stacked(self, anchor_count: int) -> np.ndarray:
        """Sigmas aligned with theta (length 3N)."""
        return self.per_anchor(anchor_count).reshape(-1)


@dataclass(frozen=True, eq=False)
class MeasurementVector:
    rss: np.ndarray
    azimuth: np.ndarray
    elevation: np.ndarray

    def __post_init__(self) -> None:
        arrays = [np.asarray(v, dtype=float).reshape(-1) for v in self.values()]
        if len({a.shape for a in arrays}) != 1:
            msg = f"rss/azimuth/elevation lengths differ: {[a.shape[0] for a in arrays]}"
            raise ConfigurationError(msg)
        if not all(np.all(np.isfinite(a)) for a in arrays):
            msg = "Measurements must be finite"
            raise ConfigurationError(msg)
        for name, array in zip(("rss", "azimuth", "elevation"), arrays, strict=True):
            object.__setattr__(self, name, array)

    def values(self) -> tuple[Any, Any, Any]:
        return self.rss, self.azimuth, self.elevation

    @property
    def anchor_count(self) -> int:
        return int(self.rss.shape[0])

    @property
    def theta(self) -> np.ndarray:
        """Stacked observation vector [p; phi; alpha] of length 3N."""
        return np.concatenate([self.rss, self.azimuth, self.elevation])

    @classmethod
    def from_theta(cls, theta: Any) -> MeasurementVector:
        values = np.asarray(theta, dtype=float).reshape(-1)
        if values.shape[0] % 3:
            msg = f"theta length must be a multiple of 3, got {values.shape[0]}"
            raise ConfigurationError(msg)
        rss, azimuth, elevation = np.split(values, 3)
        return cls(rss=rss, azimuth=azimuth, elevation=elevation)


def received_power(distance: Any, gamma: Any, pl: PathLossConfig) -> np.ndarray:
    """Noiseless log-distance path loss in dBm."""
    return pl.p0_dbm - 10.0 * np.asarray(gamma) * np.log10(np.asarray(distance) / pl.d0)


def synthesize_rss(
    scene: Scene, pl: PathLossConfig, noise: NoiseConfig, rng: np.random.Generator
) -> np.ndarray:
    distance, _, _ = geometry(scene.target_array, scene.anchor_array)
    sigma = noise.per_anchor(len(scene.anchors))[0]
    return received_power(distance, scene.gamma_true, pl) + rng.standard_normal(
        distance.shape
    ) * sigma


def synthesize_angles(
    scene: Scene, noise: NoiseConfig, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    _, azimuth, elevation = geometry(scene.target_array, scene.anchor_array)
    sigma = noise.per_anchor(len(scene.anchors))
    noisy_azimuth = wrap_angle(azimuth + rng.standard_normal(azimuth.shape) * sigma[1])
    noisy_elevation = np.clip(
        elevation + rng.standard_normal(elevation.shape) * sigma[2], 0.0, np.pi
    )
    return noisy_azimuth, noisy_elevation


def synthesize_measurements(
    scene: Scene, pl: PathLossConfig, noise: NoiseConfig, rng: np.random.Generator
) -> MeasurementVector:
    rss = synthesize_rss(scene, pl, noise, rng)
    azimuth, elevation = synthesize_angles(scene, noise, rng)
    return MeasurementVector(rss=rss, azimuth=azimuth, elevation=elevation)


def synthesize_batch(
    batch: SceneBatch,
    pl: PathLossConfig,
    sigmas: np.ndarray,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Measurements for every scene of a batch.

    Args:
        batch: Scenes to observe.
        pl: Path-loss configuration (true exponents come from the batch).
        sigmas: Noise standard deviations broadcastable to (3, M, N), in
            stacking order rss, azimuth, elevation.
        rng: Random source; draws rss noise for all scenes, then azimuth, then elevation.

    Returns:
        rss, azimuth, elevation arrays of shape (M, N).
    """
    distance, azimuth, elevation = geometry(batch.targets, batch.anchors)
    sigma = np.broadcast_to(np.asarray(sigmas, dtype=float), (3, *distance.shape))
    rss = received_power(distance, batch.gamma_true[:, None], pl)
    rss = rss + rng.standard_normal(distance.shape) * sigma[0]
    azimuth = wrap_angle(azimuth + rng.standard_normal(distance.shape) * sigma[1])
    elevation = np.clip(elevation + rng.standard_normal(distance.shape) * sigma[2], 0.0, np.pi)
    _LOGGER.debug("Synthesized measurements for %d scenes", distance.shape[0])
    return rss, azimuth, elevation


def expected_measurements(
    candidate: Point3 | np.ndarray, anchors: Any, pl: PathLossConfig
) -> MeasurementVector:
    """Noiseless model f(t) as the receiver sees it (receiver path-loss exponent)."""
    position = candidate.as_array() if isinstance(candidate, Point3) else np.asarray(candidate)
    distance, azimuth, elevation = geometry(position, as_anchor_array(anchors))
    return MeasurementVector(
        rss=received_power(distance, pl.gamma_rx, pl), azimuth=azimuth, elevation=elevation
    )


def log_likelihood(
    theta: MeasurementVector,
    candidate: Point3 | np.ndarray,
    anchors: Any,
    pl: PathLossConfig,
    noise: NoiseConfig,
) -> float:
    """Gaussian log-likelihood of the observations given a candidate target position.

    Azimuth residuals are wrapped into (-pi, pi] before squaring.
    """
    sigma = noise.stacked(theta.anchor_count)
    if np.any(sigma <= 0):
        msg = "log_likelihood needs every sigma > 0"
        raise ConfigurationError(msg)
    model = expected_measurements(candidate, anchors, pl)
    residual = theta.theta - model.theta
    n = theta.anchor_count
    residual[n : 2 * n] = wrap_angle(residual[n : 2 * n])
    variance = sigma**2
    return float(np.sum(-0.5 * np.log(2 * np.pi * variance) - residual**2 / (2 * variance)))
