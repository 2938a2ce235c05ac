"""Training corpora: generation, splitting and the on-disk format.

File layout (all integers little-endian):

    magic        8 bytes  b"RSSAOADS"
    version      uint32
    header_len   uint32
    header       header_len bytes of UTF-8 JSON (manifest, anchors, record layout)
    records      record_count packed records of little-endian float64 fields
                 theta (3N), features (12N), target (3), noise (3), gamma_true (1)
"""

from __future__ import annotations

import json
import logging
import math
import struct
from collections.abc import Iterable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np

from .const import (
    DATASET_FORMAT_VERSION,
    DATASET_MAGIC,
    DEFAULT_SAMPLE_COUNT,
    DEFAULT_SPLIT_RATIOS,
    DEFAULT_WORKERS,
    GENERATION_CHUNK_SIZE,
    STREAM_DATASET,
    STREAM_SPLIT,
    AnchorLayout,
    InputMode,
)
from .errors import ConfigurationError, DatasetFormatError
from .linearization import FeatureVector, build_features
from .measurement import MeasurementVector, NoiseConfig, synthesize_batch
from .mlp import MlpModel, TrainingSplits, evaluate_rmse
from .scene import PathLossConfig, Point3, SceneConfig, resolve_anchors, sample_scenes

if TYPE_CHECKING:  # pragma: no cover - typing only
    from .evaluation import SweepSpec

_LOGGER = logging.getLogger(__name__)

_PREAMBLE = struct.Struct("<8sII")


def scene_config_to_dict(cfg: SceneConfig) -> dict[str, Any]:
    return {
        "box_size": cfg.box_size,
        "anchor_count": cfg.anchor_count,
        "anchor_layout": cfg.anchor_layout.value,
        "anchor_seed": cfg.anchor_seed,
        "anchors": None if cfg.anchors is None else [[a.x, a.y, a.z] for a in cfg.anchors],
    }


def scene_config_from_dict(data: dict[str, Any]) -> SceneConfig:
    anchors = data.get("anchors")
    return SceneConfig(
        box_size=float(data["box_size"]),
        anchor_count=int(data["anchor_count"]),
        anchor_layout=AnchorLayout(data["anchor_layout"]),
        anchor_seed=int(data["anchor_seed"]),
        anchors=None if anchors is None else tuple(Point3.from_array(a) for a in anchors),
    )


def path_loss_to_dict(pl: PathLossConfig) -> dict[str, Any]:
    return {
        "p0_dbm": pl.p0_dbm,
        "d0": pl.d0,
        "gamma_true_range": list(pl.gamma_true_range),
        "gamma_rx": pl.gamma_rx,
    }


def path_loss_from_dict(data: dict[str, Any]) -> PathLossConfig:
    low, high = data["gamma_true_range"]
    return PathLossConfig(
        p0_dbm=float(data["p0_dbm"]),
        d0=float(data["d0"]),
        gamma_true_range=(float(low), float(high)),
        gamma_rx=float(data["gamma_rx"]),
    )


@dataclass(frozen=True)
class DatasetManifest:
    seed: int
    scene: SceneConfig = field(default_factory=SceneConfig)
    path_loss: PathLossConfig = field(default_factory=PathLossConfig)
    sample_count: int = DEFAULT_SAMPLE_COUNT
    split_ratios: tuple[float, float, float] = DEFAULT_SPLIT_RATIOS
    noise_grid: tuple[NoiseConfig, ...] = (NoiseConfig(),)

    def __post_init__(self) -> None:
        if self.sample_count < 1:
            msg = f"sample_count must be >= 1, got {self.sample_count}"
            raise ConfigurationError(msg)
        validate_ratios(self.split_ratios)
        if not self.noise_grid:
            msg = "noise_grid must not be empty"
            raise ConfigurationError(msg)
        if any(n.is_heterogeneous for n in self.noise_grid):
            msg = "Dataset noise grid entries must use scalar sigmas"
            raise ConfigurationError(msg)
        if self.scene.anchor_layout == AnchorLayout.RANDOM_PER_SCENE:
            msg = "A dataset needs fixed anchors; random_per_scene layout is not supported"
            raise ConfigurationError(msg)

    @property
    def noise_table(self) -> np.ndarray:
        """(G, 3) sigmas in stacking order rss, azimuth, elevation."""
        return np.array(
            [[n.sigma_rss, n.sigma_azimuth, n.sigma_elevation] for n in self.noise_grid],
            dtype=float,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "scene": scene_config_to_dict(self.scene),
            "path_loss": path_loss_to_dict(self.path_loss),
            "sample_count": self.sample_count,
            "split_ratios": list(self.split_ratios),
            "noise_grid": self.noise_table.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> DatasetManifest:
        ratios = tuple(float(r) for r in data["split_ratios"])
        return cls(
            seed=int(data["seed"]),
            scene=scene_config_from_dict(data["scene"]),
            path_loss=path_loss_from_dict(data["path_loss"]),
            sample_count=int(data["sample_count"]),
            split_ratios=(ratios[0], ratios[1], ratios[2]),
            noise_grid=tuple(NoiseConfig(*row) for row in data["noise_grid"]),
        )


def validate_ratios(ratios: tuple[float, float, float]) -> None:
    if len(ratios) != 3 or any(r <= 0 for r in ratios):  # noqa: PLR2004
        msg = f"split ratios must be three positive numbers, got {ratios}"
        raise ConfigurationError(msg)
    if not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        msg = f"split ratios must sum to 1, got {sum(ratios)}"
        raise ConfigurationError(msg)


def default_noise_grid(sweeps: Iterable[SweepSpec]) -> tuple[NoiseConfig, ...]:
    """Every noise point of the given sweeps, deduplicated in order."""
    grid: dict[tuple[Any, ...], NoiseConfig] = {}
    for sweep in sweeps:
        for noise in sweep.noise_points():
            grid.setdefault((noise.sigma_rss, noise.sigma_azimuth, noise.sigma_elevation), noise)
    return tuple(grid.values())


@dataclass(frozen=True, eq=False)
class Sample:
    theta: MeasurementVector
    features: FeatureVector
    target: Point3
    noise_level: NoiseConfig
    gamma_true: float


@dataclass(frozen=True, eq=False)
class SplitIndices:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray


@dataclass(eq=False)
class Dataset:
    manifest: DatasetManifest
    anchors: np.ndarray
    theta: np.ndarray
    features: np.ndarray
    targets: np.ndarray
    noise: np.ndarray
    gamma_true: np.ndarray

    def __len__(self) -> int:
        return int(self.targets.shape[0])

    @property
    def anchor_count(self) -> int:
        return int(self.anchors.shape[0])

    def sample(self, index: int) -> Sample:
        return Sample(
            theta=MeasurementVector.from_theta(self.theta[index]),
            features=FeatureVector(x=self.features[index]),
            target=Point3.from_array(self.targets[index]),
            noise_level=NoiseConfig(*self.noise[index]),
            gamma_true=float(self.gamma_true[index]),
        )

    def inputs(self, mode: InputMode) -> np.ndarray:
        return self.features if mode == InputMode.PREPROCESSED else self.theta

    def recompute_features(self, indices: Any) -> np.ndarray:
        n = self.anchor_count
        theta = self.theta[indices]
        rss, azimuth, elevation = theta[..., :n], theta[..., n : 2 * n], theta[..., 2 * n :]
        return build_features(rss, azimuth, elevation, self.anchors, self.manifest.path_loss)

    def audit_features(self, fraction: float, rng: np.random.Generator) -> float:
        """Max abs difference between stored and recomputed features on a random subset."""
        count = max(1, math.ceil(fraction * len(self)))
        indices = np.sort(rng.choice(len(self), size=count, replace=False))
        return float(np.max(np.abs(self.features[indices] - self.recompute_features(indices))))

    def training_splits(self, mode: InputMode, splits: SplitIndices) -> TrainingSplits:
        x = self.inputs(mode)
        return TrainingSplits(
            train_x=x[splits.train],
            train_y=self.targets[splits.train],
            val_x=x[splits.val],
            val_y=self.targets[splits.val],
            anchors=self.anchors,
        )


def evaluate_split(model: MlpModel, dataset: Dataset, indices: Any) -> float:
    """RMSE of a trained model on a subset of the dataset (usually the test split)."""
    x = dataset.inputs(model.input_mode)
    if model.input_dim != x.shape[1]:
        msg = (
            f"Model expects D={model.input_dim} ({model.input_mode.value}) "
            f"but the dataset provides D={x.shape[1]}"
        )
        raise ConfigurationError(msg)
    if len(indices) == 0:
        msg = "Cannot evaluate on an empty split"
        raise ConfigurationError(msg)
    return evaluate_rmse(model, x[indices], dataset.targets[indices])


def _generate_chunk(manifest: DatasetManifest, chunk: int, count: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng([manifest.seed, STREAM_DATASET, chunk])
    batch = sample_scenes(manifest.scene, manifest.path_loss, rng, count)
    noise = manifest.noise_table[rng.integers(len(manifest.noise_grid), size=count)]
    rss, azimuth, elevation = synthesize_batch(
        batch, manifest.path_loss, noise.T[:, :, None], rng
    )
    return {
        "theta": np.concatenate([rss, azimuth, elevation], axis=-1),
        "features": build_features(rss, azimuth, elevation, batch.anchors, manifest.path_loss),
        "targets": batch.targets,
        "noise": noise,
        "gamma_true": batch.gamma_true,
    }


def generate(
    manifest: DatasetManifest, path: Path | None = None, workers: int = DEFAULT_WORKERS
) -> Dataset:
    """Generate the dataset described by `manifest`, optionally saving it to `path`.

    Samples are produced in fixed-size chunks, each with its own random
    stream derived from (seed, chunk index), so the output does not depend on
    the number of workers.
    """
    anchors = np.array([a.as_array() for a in resolve_anchors(manifest.scene)])
    sizes = [
        min(GENERATION_CHUNK_SIZE, manifest.sample_count - start)
        for start in range(0, manifest.sample_count, GENERATION_CHUNK_SIZE)
    ]
    _LOGGER.info(
        f"Generating {manifest.sample_count} samples in {len(sizes)} chunks "
        f"({len(manifest.noise_grid)} noise levels, {workers} workers)"
    )
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        chunks = list(
            executor.map(lambda args: _generate_chunk(manifest, *args), enumerate(sizes))
        )
    dataset = Dataset(
        manifest=manifest,
        anchors=anchors,
        **{key: np.concatenate([c[key] for c in chunks]) for key in chunks[0]},
    )
    if path is not None:
        save(dataset, path)
    return dataset


def split(sample_count: int, ratios: tuple[float, float, float], seed: int) -> SplitIndices:
    """Seeded partition; validation and test sizes are floored, the remainder trains."""
    validate_ratios(ratios)
    val_size = math.floor(sample_count * ratios[1] + 1e-9)
    test_size = math.floor(sample_count * ratios[2] + 1e-9)
    order = np.random.default_rng([seed, STREAM_SPLIT]).permutation(sample_count)
    train_size = sample_count - val_size - test_size
    return SplitIndices(
        train=order[:train_size],
        val=order[train_size : train_size + val_size],
        test=order[train_size + val_size :],
    )


def _record_dtype(anchor_count: int) -> np.dtype:
    return np.dtype(
        [
            ("theta", "<f8", (3 * anchor_count,)),
            ("features", "<f8", (12 * anchor_count,)),
            ("target", "<f8", (3,)),
            ("noise", "<f8", (3,)),
            ("gamma_true", "<f8"),
        ]
    )


def save(dataset: Dataset, path: Path, provenance: dict[str, Any] | None = None) -> None:
    dtype = _record_dtype(dataset.anchor_count)
    records = np.empty(len(dataset), dtype=dtype)
    records["theta"] = dataset.theta
    records["features"] = dataset.features
    records["target"] = dataset.targets
    records["noise"] = dataset.noise
    records["gamma_true"] = dataset.gamma_true
    header = json.dumps(
        {
            "manifest": dataset.manifest.to_dict(),
            "anchors": dataset.anchors.tolist(),
            "record_count": len(dataset),
            "record_fields": [[name, int(dtype[name].itemsize // 8)] for name in dtype.names or ()],
            "provenance": provenance or {},
        },
        sort_keys=True,
    ).encode("utf-8")
    with path.open("wb") as handle:
        handle.write(_PREAMBLE.pack(DATASET_MAGIC, DATASET_FORMAT_VERSION, len(header)))
        handle.write(header)
        handle.write(records.tobytes())
    _LOGGER.info("Saved %d samples to %s", len(dataset), path)


def load(path: Path) -> Dataset:
    data = path.read_bytes()
    if len(data) < _PREAMBLE.size:
        msg = f"{path} is too short to be a dataset file"
        raise DatasetFormatError(msg)
    magic, version, header_len = _PREAMBLE.unpack_from(data)
    if magic != DATASET_MAGIC:
        msg = f"{path} has a corrupted header (magic {magic!r}, expected {DATASET_MAGIC!r})"
        raise DatasetFormatError(msg)
    if version != DATASET_FORMAT_VERSION:
        msg = (
            f"{path} has dataset format version {version}, "
            f"this build reads version {DATASET_FORMAT_VERSION}"
        )
        raise DatasetFormatError(msg)
    try:
        header = json.loads(data[_PREAMBLE.size : _PREAMBLE.size + header_len].decode("utf-8"))
        manifest = DatasetManifest.from_dict(header["manifest"])
        anchors = np.asarray(header["anchors"], dtype=float)
        record_count = int(header["record_count"])
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError) as err:
        msg = f"{path} has a corrupted header: {err}"
        raise DatasetFormatError(msg) from err

    dtype = _record_dtype(anchors.shape[0])
    body = data[_PREAMBLE.size + header_len :]
    if len(body) != record_count * dtype.itemsize:
        msg = f"{path} holds {len(body)} record bytes, expected {record_count * dtype.itemsize}"
        raise DatasetFormatError(msg)
    records = np.frombuffer(body, dtype=dtype, count=record_count)
    return Dataset(
        manifest=manifest,
        anchors=anchors,
        theta=records["theta"].copy(),
        features=records["features"].copy(),
        targets=records["target"].copy(),
        noise=records["noise"].copy(),
        gamma_true=records["gamma_true"].copy(),
    )
