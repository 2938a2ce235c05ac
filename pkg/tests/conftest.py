from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from rss_aoa_positioning.dataset import Dataset, generate
from rss_aoa_positioning.scene import PathLossConfig, Scene, SceneConfig, sample_scene

from .scene_generator import (
    MATCHED_PATH_LOSS,
    TOY_CONFIG,
    desk_scene_config,
    small_manifest,
    write_config,
)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def matched_pl() -> PathLossConfig:
    """Path loss with the true exponent pinned to the receiver's value."""
    return MATCHED_PATH_LOSS


@pytest.fixture
def default_pl() -> PathLossConfig:
    return PathLossConfig()


@pytest.fixture
def desk_cfg() -> SceneConfig:
    return desk_scene_config()


@pytest.fixture
def desk_scene(desk_cfg: SceneConfig, matched_pl: PathLossConfig) -> Scene:
    return sample_scene(desk_cfg, matched_pl, np.random.default_rng(7))


@pytest.fixture(scope="session")
def small_dataset() -> Dataset:
    """A 120-sample dataset over the desk anchors, generated once per session."""
    return generate(small_manifest())


@pytest.fixture
def toy_config(tmp_path: Path):
    """Provide a helper writing the toy experiment (optionally modified) into tmp_path.

    Example:
        def test_x(toy_config):
            path = toy_config(seed=5)
    """

    def _write(**overrides) -> Path:
        data = {**TOY_CONFIG, **overrides, "output_dir": str(tmp_path / "out")}
        return write_config(tmp_path, data)

    return _write
