"""Scene geometry: anchors, target, bounding box and path-loss configuration."""

from __future__ import annotations

import functools
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .const import (
    DEFAULT_ANCHOR_COUNT,
    DEFAULT_ANCHOR_LAYOUT,
    DEFAULT_BOX_SIZE,
    DEFAULT_D0,
    DEFAULT_GAMMA_RX,
    DEFAULT_GAMMA_TRUE_RANGE,
    DEFAULT_P0_DBM,
    MAX_ANCHOR_CONDITION,
    MAX_SAMPLING_ATTEMPTS,
    MIN_ANCHOR_COUNT,
    MIN_TARGET_ANCHOR_DISTANCE,
    STREAM_ANCHORS,
    AnchorLayout,
)
from .errors import ConfigurationError, DegenerateGeometryError

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class Point3:
    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(c) for c in (self.x, self.y, self.z)):
            msg = f"Point coordinates must be finite, got ({self.x}, {self.y}, {self.z})"
            raise ConfigurationError(msg)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @classmethod
    def from_array(cls, values: Any) -> Point3:
        x, y, z = (float(v) for v in np.asarray(values, dtype=float).reshape(3))
        return cls(x, y, z)


@dataclass(frozen=True)
class SceneConfig:
    """Box size, anchor count and how anchors are placed."""

    box_size: float = DEFAULT_BOX_SIZE
    anchor_count: int = DEFAULT_ANCHOR_COUNT
    anchor_layout: AnchorLayout = DEFAULT_ANCHOR_LAYOUT
    anchors: tuple[Point3, ...] | None = None
    """Only read for the user_provided layout."""
    anchor_seed: int = 0
    """Seed of the fixed_seeded anchor draw."""

    def __post_init__(self) -> None:
        if not self.box_size > 0:
            msg = f"box_size must be positive, got {self.box_size}"
            raise ConfigurationError(msg)
        if self.anchor_count < MIN_ANCHOR_COUNT:
            msg = f"anchor_count must be >= {MIN_ANCHOR_COUNT}, got {self.anchor_count}"
            raise ConfigurationError(msg)
        if self.anchors is not None and not isinstance(self.anchors, tuple):
            object.__setattr__(self, "anchors", tuple(self.anchors))
        # Count mismatches are reported by resolve_anchors
        if (
            self.anchor_layout == AnchorLayout.USER_PROVIDED
            and self.anchors is not None
            and len(self.anchors) == self.anchor_count
            and not _anchors_ok(np.array([a.as_array() for a in self.anchors]))
        ):
            msg = (
                "user_provided anchors must be distinct and not coplanar "
                f"(centered condition number <= {MAX_ANCHOR_CONDITION:g})"
            )
            raise ConfigurationError(msg)


@dataclass(frozen=True)
class PathLossConfig:
    p0_dbm: float = DEFAULT_P0_DBM
    d0: float = DEFAULT_D0
    gamma_true_range: tuple[float, float] = DEFAULT_GAMMA_TRUE_RANGE
    gamma_rx: float = DEFAULT_GAMMA_RX

    def __post_init__(self) -> None:
        low, high = self.gamma_true_range
        if not self.d0 > 0:
            msg = f"d0 must be positive, got {self.d0}"
            raise ConfigurationError(msg)
        if not 0 < low <= high:
            msg = f"gamma_true_range must be positive and ordered, got {self.gamma_true_range}"
            raise ConfigurationError(msg)
        if not self.gamma_rx > 0:
            msg = f"gamma_rx must be positive, got {self.gamma_rx}"
            raise ConfigurationError(msg)

    def matched(self) -> PathLossConfig:
        """Copy whose true exponent is pinned to the receiver's value."""
        return PathLossConfig(
            p0_dbm=self.p0_dbm,
            d0=self.d0,
            gamma_true_range=(self.gamma_rx, self.gamma_rx),
            gamma_rx=self.gamma_rx,
        )


@dataclass(frozen=True)
class Scene:
    anchors: tuple[Point3, ...]
    target: Point3
    gamma_true: float

    @property
    def anchor_array(self) -> np.ndarray:
        return np.array([a.as_array() for a in self.anchors])

    @property
    def target_array(self) -> np.ndarray:
        return self.target.as_array()


@dataclass(frozen=True)
class SceneBatch:
    """Many scenes as arrays: anchors (M, N, 3), targets (M, 3), gamma_true (M,)."""

    anchors: np.ndarray
    targets: np.ndarray
    gamma_true: np.ndarray
    fixed_anchors: bool = field(default=True)

    def __len__(self) -> int:
        return int(self.targets.shape[0])

    def scene(self, index: int) -> Scene:
        return Scene(
            anchors=tuple(Point3.from_array(a) for a in self.anchors[index]),
            target=Point3.from_array(self.targets[index]),
            gamma_true=float(self.gamma_true[index]),
        )


def as_anchor_array(anchors: Any) -> np.ndarray:
    """Accept a sequence of Point3 or an (N, 3) array and return an (N, 3) float array."""
    if len(anchors) and isinstance(anchors[0], Point3):
        return np.array([a.as_array() for a in anchors])
    array = np.asarray(anchors, dtype=float)
    if array.ndim != 2 or array.shape[1] != 3:  # noqa: PLR2004
        msg = f"anchors must have shape (N, 3), got {array.shape}"
        raise ConfigurationError(msg)
    return array


def wrap_angle(angle: Any) -> Any:
    """Wrap angles into (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(angle, dtype=float), 2 * np.pi)


def geometry(targets: np.ndarray, anchors: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Distance, azimuth and elevation from every anchor to the target.

    Args:
        targets: Array of shape (..., 3).
        anchors: Array of shape (..., N, 3), broadcastable against targets.

    Returns:
        Three arrays of shape (..., N).
    """
    diff = np.asarray(targets, dtype=float)[..., None, :] - np.asarray(anchors, dtype=float)
    distance = np.linalg.norm(diff, axis=-1)
    if np.any(distance == 0):
        msg = "Target coincides with an anchor; angles are undefined"
        raise DegenerateGeometryError(msg)
    # arctan2(0, 0) == 0 gives the pole convention for free
    azimuth = wrap_angle(np.arctan2(diff[..., 1], diff[..., 0]))
    elevation = np.arccos(np.clip(diff[..., 2] / distance, -1.0, 1.0))
    return distance, azimuth, elevation


def true_geometry(scene: Scene, anchor_index: int) -> tuple[float, float, float]:
    """Return (distance, azimuth, elevation) of the target as seen from one anchor."""
    if not 0 <= anchor_index < len(scene.anchors):
        msg = f"anchor_index {anchor_index} out of range for {len(scene.anchors)} anchors"
        raise ConfigurationError(msg)
    d, az, el = geometry(scene.target_array, scene.anchors[anchor_index].as_array()[None, :])
    return float(d[0]), float(az[0]), float(el[0])


def _anchors_ok(points: np.ndarray) -> bool:
    diffs = points[:, None, :] - points[None, :, :]
    pairwise = np.linalg.norm(diffs, axis=-1)
    np.fill_diagonal(pairwise, np.inf)
    if pairwise.min() <= 0:
        return False
    return bool(np.linalg.cond(points - points.mean(axis=0)) <= MAX_ANCHOR_CONDITION)


def sample_anchors(cfg: SceneConfig, rng: np.random.Generator) -> tuple[Point3, ...]:
    """Draw anchors uniformly in the box, redrawing degenerate (near-coplanar) sets."""
    for attempt in range(MAX_SAMPLING_ATTEMPTS):
        points = rng.uniform(0.0, cfg.box_size, size=(cfg.anchor_count, 3))
        if _anchors_ok(points):
            if attempt:
                _LOGGER.debug("Anchor set accepted after %d redraws", attempt)
            return tuple(Point3.from_array(p) for p in points)
    msg = f"Could not draw a non-degenerate anchor set in {MAX_SAMPLING_ATTEMPTS} attempts"
    raise ConfigurationError(msg)


@functools.lru_cache(maxsize=32)
def _seeded_anchors(box_size: float, anchor_count: int, seed: int) -> tuple[Point3, ...]:
    cfg = SceneConfig(box_size=box_size, anchor_count=anchor_count)
    return sample_anchors(cfg, np.random.default_rng([seed, STREAM_ANCHORS]))


def resolve_anchors(
    cfg: SceneConfig, rng: np.random.Generator | None = None
) -> tuple[Point3, ...]:
    """Anchors for a scene under the configured layout.

    The random_per_scene layout needs `rng`; the other layouts ignore it.
    """
    if cfg.anchor_layout == AnchorLayout.USER_PROVIDED:
        if cfg.anchors is None or len(cfg.anchors) != cfg.anchor_count:
            got = 0 if cfg.anchors is None else len(cfg.anchors)
            msg = f"user_provided layout needs {cfg.anchor_count} anchors, got {got}"
            raise ConfigurationError(msg)
        return cfg.anchors
    if cfg.anchor_layout == AnchorLayout.FIXED_SEEDED:
        return _seeded_anchors(float(cfg.box_size), cfg.anchor_count, cfg.anchor_seed)
    if cfg.anchor_layout == AnchorLayout.RANDOM_PER_SCENE:
        if rng is None:
            msg = "random_per_scene layout needs a random source"
            raise ConfigurationError(msg)
        return sample_anchors(cfg, rng)
    msg = f"Unknown anchor_layout: {cfg.anchor_layout}"
    raise ConfigurationError(msg)


def _valid_targets(targets: np.ndarray, anchors: np.ndarray, box_size: float) -> np.ndarray:
    inside = np.all((targets > 0) & (targets < box_size), axis=-1)
    distance = np.linalg.norm(targets[..., None, :] - anchors, axis=-1)
    return inside & np.all(distance >= MIN_TARGET_ANCHOR_DISTANCE, axis=-1)


def sample_scene(cfg: SceneConfig, pl: PathLossConfig, rng: np.random.Generator) -> Scene:
    """Draw one scene: uniform target in the box and uniform true path-loss exponent."""
    anchors = resolve_anchors(cfg, rng)
    anchor_array = np.array([a.as_array() for a in anchors])
    for _ in range(MAX_SAMPLING_ATTEMPTS):
        target = rng.uniform(0.0, cfg.box_size, size=3)
        if _valid_targets(target, anchor_array, cfg.box_size):
            break
        _LOGGER.debug("Resampling target %s (outside box or too close to an anchor)", target)
    else:
        msg = f"Could not place a target in {MAX_SAMPLING_ATTEMPTS} attempts"
        raise ConfigurationError(msg)
    gamma_true = float(rng.uniform(*pl.gamma_true_range))
    return Scene(anchors=anchors, target=Point3.from_array(target), gamma_true=gamma_true)


def sample_scenes(
    cfg: SceneConfig, pl: PathLossConfig, rng: np.random.Generator, count: int
) -> SceneBatch:
    """Vectorized counterpart of `sample_scene` for `count` scenes."""
    if cfg.anchor_layout == AnchorLayout.RANDOM_PER_SCENE:
        scenes = [sample_scene(cfg, pl, rng) for _ in range(count)]
        return SceneBatch(
            anchors=np.array([s.anchor_array for s in scenes]).reshape(count, cfg.anchor_count, 3),
            targets=np.array([s.target_array for s in scenes]).reshape(count, 3),
            gamma_true=np.array([s.gamma_true for s in scenes], dtype=float),
            fixed_anchors=False,
        )

    anchor_array = np.array([a.as_array() for a in resolve_anchors(cfg)])
    targets = rng.uniform(0.0, cfg.box_size, size=(count, 3))
    bad = ~_valid_targets(targets, anchor_array, cfg.box_size)
    attempts = 0
    while bad.any():
        attempts += 1
        if attempts > MAX_SAMPLING_ATTEMPTS:
            msg = f"Could not place {int(bad.sum())} targets in {MAX_SAMPLING_ATTEMPTS} attempts"
            raise ConfigurationError(msg)
        targets[bad] = rng.uniform(0.0, cfg.box_size, size=(int(bad.sum()), 3))
        bad = ~_valid_targets(targets, anchor_array, cfg.box_size)
    gamma_true = rng.uniform(*pl.gamma_true_range, size=count)
    return SceneBatch(
        anchors=np.broadcast_to(anchor_array, (count, *anchor_array.shape)),
        targets=targets,
        gamma_true=gamma_true,
    )


def scene_to_dict(scene: Scene) -> dict[str, Any]:
    return {
        "anchors": [[a.x, a.y, a.z] for a in scene.anchors],
        "target": [scene.target.x, scene.target.y, scene.target.z],
        "gamma_true": scene.gamma_true,
    }


def scene_from_dict(data: dict[str, Any]) -> Scene:
    try:
        return Scene(
            anchors=tuple(Point3.from_array(a) for a in data["anchors"]),
            target=Point3.from_array(data["target"]),
            gamma_true=float(data["gamma_true"]),
        )
    except (KeyError, TypeError, ValueError) as err:
        msg = f"Invalid scene document: {err}"
        raise ConfigurationError(msg) from err


def save_scene(scene: Scene, path: Path) -> None:
    path.write_text(json.dumps(scene_to_dict(scene), indent=2))


def load_scene(path: Path) -> Scene:
    return scene_from_dict(json.loads(path.read_text()))
