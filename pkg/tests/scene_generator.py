"""Helpers to build scenes, measurement batches, models and config files for tests.

Everything here is seeded so tests can rely on exact values across runs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from rss_aoa_positioning.const import AnchorLayout, InputMode
from rss_aoa_positioning.dataset import DatasetManifest
from rss_aoa_positioning.measurement import NoiseConfig, synthesize_batch
from rss_aoa_positioning.mlp import MlpModel, Normalizer, init_model
from rss_aoa_positioning.scene import (
    PathLossConfig,
    Point3,
    SceneBatch,
    SceneConfig,
    sample_scenes,
)

_LOGGER = logging.getLogger(__name__)

# Well-spread, non-coplanar anchors inside a 15 m box
DESK_ANCHORS: tuple[Point3, ...] = (
    Point3(1.0, 1.0, 1.0),
    Point3(14.0, 2.0, 4.0),
    Point3(3.0, 13.0, 8.0),
    Point3(12.0, 12.0, 14.0),
)

MATCHED_PATH_LOSS = PathLossConfig(gamma_true_range=(2.5, 2.5), gamma_rx=2.5)
ZERO_NOISE = NoiseConfig()


@dataclass
class MeasurementBatch:
    """Scenes plus their measurements, all as arrays."""

    scenes: SceneBatch
    rss: np.ndarray
    azimuth: np.ndarray
    elevation: np.ndarray

    @property
    def anchors(self) -> np.ndarray:
        return self.scenes.anchors

    @property
    def targets(self) -> np.ndarray:
        return self.scenes.targets


def desk_scene_config(layout: AnchorLayout = AnchorLayout.USER_PROVIDED) -> SceneConfig:
    if layout == AnchorLayout.USER_PROVIDED:
        return SceneConfig(anchor_layout=layout, anchors=DESK_ANCHORS)
    return SceneConfig(anchor_layout=layout, anchor_seed=11)


def measurement_batch(
    count: int,
    seed: int,
    noise: NoiseConfig = ZERO_NOISE,
    pl: PathLossConfig = MATCHED_PATH_LOSS,
    cfg: SceneConfig | None = None,
) -> MeasurementBatch:
    """`count` random scenes observed with the given noise."""
    cfg = cfg or desk_scene_config()
    rng = np.random.default_rng(seed)
    scenes = sample_scenes(cfg, pl, rng, count)
    sigmas = noise.per_anchor(cfg.anchor_count)[:, None, :]
    rss, azimuth, elevation = synthesize_batch(scenes, pl, sigmas, rng)
    return MeasurementBatch(scenes=scenes, rss=rss, azimuth=azimuth, elevation=elevation)


def small_manifest(sample_count: int = 120, seed: int = 3) -> DatasetManifest:
    return DatasetManifest(
        seed=seed,
        scene=desk_scene_config(),
        sample_count=sample_count,
        noise_grid=(
            NoiseConfig.from_degrees(0.0, 5.0, 5.0),
            NoiseConfig.from_degrees(3.0, 5.0, 5.0),
            NoiseConfig.from_degrees(3.0, 0.0, 2.0),
        ),
    )


def identity_normalizer(input_dim: int) -> Normalizer:
    return Normalizer(mean=np.zeros(input_dim), std=np.ones(input_dim))


def small_model(
    rng: np.random.Generator,
    input_dim: int = 4,
    hidden: int = 6,
    input_mode: InputMode = InputMode.PREPROCESSED,
    anchors: np.ndarray | None = None,
) -> MlpModel:
    """Randomly initialized model with an identity normalizer."""
    model = init_model(
        input_dim, identity_normalizer(input_dim), rng, hidden=hidden, input_mode=input_mode
    )
    model.anchors = anchors
    return model


def desk_anchor_array() -> np.ndarray:
    return np.array([a.as_array() for a in DESK_ANCHORS])


# Tiny experiment used by CLI tests; runs in seconds
TOY_CONFIG: dict[str, Any] = {
    "seed": 21,
    "workers": 2,
    "scene": {
        "box_size": 15,
        "anchor_count": 4,
        "anchor_layout": "user_provided",
        "anchors": [[a.x, a.y, a.z] for a in DESK_ANCHORS],
    },
    "dataset": {"sample_count": 500},
    "train": {"epochs": 20, "batch_size": 64, "hidden": 32},
    "matched_gamma": True,
    "sweeps": [
        {
            "variable": "sigma_rss",
            "grid": [0, 3],
            "fixed": {"sigma_azimuth": 0, "sigma_elevation": 0},
            "trials": 300,
            "mlp_trials": 100,
        },
        {"variable": "sigma_azimuth", "grid": [0, 5], "trials": 200, "mlp_trials": 100},
    ],
}


def write_config(directory: Path, data: dict[str, Any] | None = None, name: str = "experiment.yaml") -> Path:
    """Write a YAML experiment file and return its path."""
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / name
    path.write_text(yaml.safe_dump(TOY_CONFIG if data is None else data, sort_keys=False))
    _LOGGER.debug("Wrote test config %s", path)
    return path
