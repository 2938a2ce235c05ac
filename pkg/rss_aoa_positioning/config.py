"""Experiment configuration: YAML files validated with voluptuous schemas."""

from __future__ import annotations

import copy
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import voluptuous as vol
import yaml

from .const import (
    CONF_ANCHOR_COUNT,
    CONF_ANCHOR_LAYOUT,
    CONF_ANCHOR_SEED,
    CONF_ANCHORS,
    CONF_BATCH_SIZE,
    CONF_BOX_SIZE,
    CONF_D0,
    CONF_DATASET,
    CONF_EPOCHS,
    CONF_FIXED,
    CONF_GAMMA_RX,
    CONF_GAMMA_TRUE_RANGE,
    CONF_GRID,
    CONF_HIDDEN,
    CONF_LEARNING_RATE,
    CONF_MATCHED_GAMMA,
    CONF_MLP_TRIALS,
    CONF_NOISE_GRID,
    CONF_OUTPUT_DIR,
    CONF_P0_DBM,
    CONF_PATH_LOSS,
    CONF_SAMPLE_COUNT,
    CONF_SCENE,
    CONF_SEED,
    CONF_SPLIT_RATIOS,
    CONF_SWEEPS,
    CONF_SWEPT_VARIABLE,
    CONF_TRAIN,
    CONF_TRIALS,
    CONF_WORKERS,
    DEFAULT_ANCHOR_COUNT,
    DEFAULT_ANCHOR_LAYOUT,
    DEFAULT_ANGLE_GRID_DEG,
    DEFAULT_BATCH_SIZE,
    DEFAULT_BOX_SIZE,
    DEFAULT_D0,
    DEFAULT_EPOCHS,
    DEFAULT_FIXED_SIGMA_ANGLE_DEG,
    DEFAULT_FIXED_SIGMA_RSS_DB,
    DEFAULT_GAMMA_RX,
    DEFAULT_GAMMA_TRUE_RANGE,
    DEFAULT_HIDDEN,
    DEFAULT_LEARNING_RATE,
    DEFAULT_OUTPUT_DIR,
    DEFAULT_P0_DBM,
    DEFAULT_RSS_GRID_DB,
    DEFAULT_SAMPLE_COUNT,
    DEFAULT_SPLIT_RATIOS,
    DEFAULT_TRIALS,
    DEFAULT_WORKERS,
    AnchorLayout,
    SweepVariable,
)
from .dataset import DatasetManifest, default_noise_grid, validate_ratios
from .errors import ConfigurationError
from .evaluation import SweepSpec
from .measurement import NoiseConfig
from .mlp import TrainConfig
from .scene import PathLossConfig, Point3, SceneConfig

_LOGGER = logging.getLogger(__name__)

_POSITIVE_INT = vol.All(vol.Coerce(int), vol.Range(min=1))
_NONNEGATIVE = vol.All(vol.Coerce(float), vol.Range(min=0))
_TRIPLE = vol.All([vol.Coerce(float)], vol.Length(min=3, max=3))

_SIGMA_KEYS = tuple(v.value for v in SweepVariable)

_NOISE_POINT_SCHEMA = vol.Schema({vol.Optional(key, default=0.0): _NONNEGATIVE for key in _SIGMA_KEYS})

_SWEEP_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_SWEPT_VARIABLE): vol.In(list(_SIGMA_KEYS)),
        vol.Optional(CONF_GRID): vol.All([_NONNEGATIVE], vol.Length(min=1)),
        vol.Optional(CONF_FIXED, default={}): vol.Schema(
            {
                vol.Optional(SweepVariable.SIGMA_RSS.value, default=DEFAULT_FIXED_SIGMA_RSS_DB): _NONNEGATIVE,
                vol.Optional(
                    SweepVariable.SIGMA_AZIMUTH.value, default=DEFAULT_FIXED_SIGMA_ANGLE_DEG
                ): _NONNEGATIVE,
                vol.Optional(
                    SweepVariable.SIGMA_ELEVATION.value, default=DEFAULT_FIXED_SIGMA_ANGLE_DEG
                ): _NONNEGATIVE,
            }
        ),
        vol.Optional(CONF_TRIALS, default=DEFAULT_TRIALS): _POSITIVE_INT,
        vol.Optional(CONF_MLP_TRIALS, default=None): vol.Any(None, _POSITIVE_INT),
    }
)


def build_schema() -> vol.Schema:
    """Schema of an experiment file; every section falls back to its defaults."""
    return vol.Schema(
        {
            vol.Required(CONF_SEED): vol.All(vol.Coerce(int), vol.Range(min=0)),
            vol.Optional(CONF_OUTPUT_DIR, default=DEFAULT_OUTPUT_DIR): str,
            vol.Optional(CONF_WORKERS, default=DEFAULT_WORKERS): _POSITIVE_INT,
            vol.Optional(CONF_MATCHED_GAMMA, default=False): bool,
            vol.Optional(CONF_SCENE, default={}): vol.Schema(
                {
                    vol.Optional(CONF_BOX_SIZE, default=DEFAULT_BOX_SIZE): vol.All(
                        vol.Coerce(float), vol.Range(min=0, min_included=False)
                    ),
                    vol.Optional(CONF_ANCHOR_COUNT, default=DEFAULT_ANCHOR_COUNT): _POSITIVE_INT,
                    vol.Optional(
                        CONF_ANCHOR_LAYOUT, default=DEFAULT_ANCHOR_LAYOUT.value
                    ): vol.In([layout.value for layout in AnchorLayout]),
                    vol.Optional(CONF_ANCHORS, default=None): vol.Any(None, [_TRIPLE]),
                    vol.Optional(CONF_ANCHOR_SEED, default=None): vol.Any(
                        None, vol.All(vol.Coerce(int), vol.Range(min=0))
                    ),
                }
            ),
            vol.Optional(CONF_PATH_LOSS, default={}): vol.Schema(
                {
                    vol.Optional(CONF_P0_DBM, default=DEFAULT_P0_DBM): vol.Coerce(float),
                    vol.Optional(CONF_D0, default=DEFAULT_D0): vol.Coerce(float),
                    vol.Optional(
                        CONF_GAMMA_TRUE_RANGE, default=list(DEFAULT_GAMMA_TRUE_RANGE)
                    ): vol.All([vol.Coerce(float)], vol.Length(min=2, max=2)),
                    vol.Optional(CONF_GAMMA_RX, default=DEFAULT_GAMMA_RX): vol.Coerce(float),
                }
            ),
            vol.Optional(CONF_DATASET, default={}): vol.Schema(
                {
                    vol.Optional(CONF_SAMPLE_COUNT, default=DEFAULT_SAMPLE_COUNT): _POSITIVE_INT,
                    vol.Optional(
                        CONF_SPLIT_RATIOS, default=list(DEFAULT_SPLIT_RATIOS)
                    ): _TRIPLE,
                    vol.Optional(CONF_NOISE_GRID, default=None): vol.Any(
                        None, vol.All([_NOISE_POINT_SCHEMA], vol.Length(min=1))
                    ),
                }
            ),
            vol.Optional(CONF_TRAIN, default={}): vol.Schema(
                {
                    vol.Optional(CONF_EPOCHS, default=DEFAULT_EPOCHS): _POSITIVE_INT,
                    vol.Optional(CONF_BATCH_SIZE, default=DEFAULT_BATCH_SIZE): _POSITIVE_INT,
                    vol.Optional(CONF_LEARNING_RATE, default=DEFAULT_LEARNING_RATE): vol.All(
                        vol.Coerce(float), vol.Range(min=0, min_included=False)
                    ),
                    vol.Optional(CONF_HIDDEN, default=DEFAULT_HIDDEN): _POSITIVE_INT,
                }
            ),
            vol.Optional(CONF_SWEEPS, default=None): vol.Any(
                None, vol.All([_SWEEP_SCHEMA], vol.Length(min=1))
            ),
        }
    )


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    output_dir: Path
    scene: SceneConfig
    path_loss: PathLossConfig
    manifest: DatasetManifest | None
    """None when the anchor layout cannot back a dataset (random_per_scene)."""
    train: TrainConfig
    sweeps: tuple[SweepSpec, ...]
    matched_gamma: bool
    workers: int
    resolved: dict[str, Any]
    """Validated file contents with every default filled in (written as provenance)."""

    def to_dict(self) -> dict[str, Any]:
        return copy.deepcopy(self.resolved)

    def dataset_manifest(self) -> DatasetManifest:
        if self.manifest is None:
            msg = (
                f"{CONF_DATASET}: a dataset needs fixed anchors; the "
                f"{self.scene.anchor_layout.value} layout only supports closed-form sweeps"
            )
            raise ConfigurationError(msg)
        return self.manifest


def _format_path(path: list[Any]) -> str:
    return ".".join(str(p) for p in path) or "<root>"


def _default_grid(variable: str) -> list[float]:
    grid = DEFAULT_RSS_GRID_DB if variable == SweepVariable.SIGMA_RSS.value else DEFAULT_ANGLE_GRID_DEG
    return list(grid)


def _fill_defaults(values: dict[str, Any]) -> dict[str, Any]:
    scene = values[CONF_SCENE]
    if scene[CONF_ANCHOR_SEED] is None:
        scene[CONF_ANCHOR_SEED] = values[CONF_SEED]
    if values[CONF_SWEEPS] is None:
        values[CONF_SWEEPS] = [
            {
                CONF_SWEPT_VARIABLE: variable.value,
                CONF_FIXED: {
                    SweepVariable.SIGMA_RSS.value: DEFAULT_FIXED_SIGMA_RSS_DB,
                    SweepVariable.SIGMA_AZIMUTH.value: DEFAULT_FIXED_SIGMA_ANGLE_DEG,
                    SweepVariable.SIGMA_ELEVATION.value: DEFAULT_FIXED_SIGMA_ANGLE_DEG,
                },
                CONF_TRIALS: DEFAULT_TRIALS,
                CONF_MLP_TRIALS: None,
            }
            for variable in SweepVariable
        ]
    for sweep in values[CONF_SWEEPS]:
        sweep.setdefault(CONF_GRID, _default_grid(sweep[CONF_SWEPT_VARIABLE]))
    return values


def _build_sweep(section: dict[str, Any]) -> SweepSpec:
    fixed = section[CONF_FIXED]
    return SweepSpec(
        variable=SweepVariable(section[CONF_SWEPT_VARIABLE]),
        grid=tuple(section[CONF_GRID]),
        fixed_rss_db=fixed[SweepVariable.SIGMA_RSS.value],
        fixed_azimuth_deg=fixed[SweepVariable.SIGMA_AZIMUTH.value],
        fixed_elevation_deg=fixed[SweepVariable.SIGMA_ELEVATION.value],
        trials=section[CONF_TRIALS],
        mlp_trials=section[CONF_MLP_TRIALS],
    )


def _noise_grid(values: dict[str, Any], sweeps: tuple[SweepSpec, ...]) -> tuple[NoiseConfig, ...]:
    points = values[CONF_DATASET][CONF_NOISE_GRID]
    if points is None:
        return default_noise_grid(sweeps)
    return tuple(
        NoiseConfig.from_degrees(
            p[SweepVariable.SIGMA_RSS.value],
            p[SweepVariable.SIGMA_AZIMUTH.value],
            p[SweepVariable.SIGMA_ELEVATION.value],
        )
        for p in points
    )


def _section_error(section: str, err: ConfigurationError) -> ConfigurationError:
    return ConfigurationError(f"{section}: {err}")


def config_from_dict(
    data: dict[str, Any], seed: int | None = None, output_dir: Path | None = None
) -> ExperimentConfig:
    """Validate a raw mapping; `seed` and `output_dir` override the file values."""
    raw = copy.deepcopy(data)
    if seed is not None:
        raw[CONF_SEED] = seed
    if output_dir is not None:
        raw[CONF_OUTPUT_DIR] = str(output_dir)
    try:
        values = build_schema()(raw)
    except vol.MultipleInvalid as err:
        first = err.errors[0]
        msg = f"{_format_path(first.path)}: {first.msg}"
        raise ConfigurationError(msg) from err
    values = _fill_defaults(values)

    scene_values = values[CONF_SCENE]
    path_loss_values = values[CONF_PATH_LOSS]
    dataset_values = values[CONF_DATASET]
    train_values = values[CONF_TRAIN]
    if scene_values[CONF_ANCHOR_LAYOUT] == AnchorLayout.USER_PROVIDED.value and scene_values[CONF_ANCHORS] is None:
        msg = f"{CONF_SCENE}.{CONF_ANCHORS}: required for the user_provided layout"
        raise ConfigurationError(msg)
    anchors = scene_values[CONF_ANCHORS]
    if anchors is not None and len(anchors) != scene_values[CONF_ANCHOR_COUNT]:
        msg = (
            f"{CONF_SCENE}.{CONF_ANCHORS}: needs {scene_values[CONF_ANCHOR_COUNT]} anchors, "
            f"got {len(anchors)}"
        )
        raise ConfigurationError(msg)
    try:
        scene = SceneConfig(
            box_size=scene_values[CONF_BOX_SIZE],
            anchor_count=scene_values[CONF_ANCHOR_COUNT],
            anchor_layout=AnchorLayout(scene_values[CONF_ANCHOR_LAYOUT]),
            anchors=None if anchors is None else tuple(Point3(*a) for a in anchors),
            anchor_seed=scene_values[CONF_ANCHOR_SEED],
        )
    except ConfigurationError as err:
        raise _section_error(CONF_SCENE, err) from err
    try:
        low, high = path_loss_values[CONF_GAMMA_TRUE_RANGE]
        path_loss = PathLossConfig(
            p0_dbm=path_loss_values[CONF_P0_DBM],
            d0=path_loss_values[CONF_D0],
            gamma_true_range=(low, high),
            gamma_rx=path_loss_values[CONF_GAMMA_RX],
        )
    except ConfigurationError as err:
        raise _section_error(CONF_PATH_LOSS, err) from err
    try:
        sweeps = tuple(_build_sweep(s) for s in values[CONF_SWEEPS])
    except ConfigurationError as err:
        raise _section_error(CONF_SWEEPS, err) from err
    try:
        ratios = dataset_values[CONF_SPLIT_RATIOS]
        split_ratios = (ratios[0], ratios[1], ratios[2])
        noise_grid = _noise_grid(values, sweeps)
        manifest: DatasetManifest | None = None
        if scene.anchor_layout == AnchorLayout.RANDOM_PER_SCENE:
            validate_ratios(split_ratios)
        else:
            manifest = DatasetManifest(
                seed=values[CONF_SEED],
                scene=scene,
                path_loss=path_loss,
                sample_count=dataset_values[CONF_SAMPLE_COUNT],
                split_ratios=split_ratios,
                noise_grid=noise_grid,
            )
    except ConfigurationError as err:
        raise _section_error(CONF_DATASET, err) from err
    train = TrainConfig(
        epochs=train_values[CONF_EPOCHS],
        batch_size=train_values[CONF_BATCH_SIZE],
        seed=values[CONF_SEED],
        lr=train_values[CONF_LEARNING_RATE],
        hidden=train_values[CONF_HIDDEN],
    )
    return ExperimentConfig(
        seed=values[CONF_SEED],
        output_dir=Path(values[CONF_OUTPUT_DIR]),
        scene=scene,
        path_loss=path_loss,
        manifest=manifest,
        train=train,
        sweeps=sweeps,
        matched_gamma=values[CONF_MATCHED_GAMMA],
        workers=values[CONF_WORKERS],
        resolved=values,
    )


def load_config(
    path: Path, seed: int | None = None, output_dir: Path | None = None
) -> ExperimentConfig:
    try:
        text = path.read_text()
    except OSError as err:
        msg = f"Cannot read config {path}: {err}"
        raise ConfigurationError(msg) from err
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        mark = getattr(err, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark is not None else ""
        msg = f"{path}: invalid YAML{where}: {getattr(err, 'problem', err)}"
        raise ConfigurationError(msg) from err
    if data is None:
        data = {}
    if not isinstance(data, dict):
        msg = f"{path}: top level must be a mapping, got {type(data).__name__}"
        raise ConfigurationError(msg)
    try:
        config = config_from_dict(data, seed=seed, output_dir=output_dir)
    except ConfigurationError as err:
        msg = f"{path}: {err}"
        raise ConfigurationError(msg) from err
    _LOGGER.debug("Loaded config %s (seed %d)", path, config.seed)
    return config


def ensure_output_dir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        msg = f"Cannot create output directory {path}: {err}"
        raise ConfigurationError(msg) from err
    if not os.access(path, os.W_OK):
        msg = f"Output directory {path} is not writable"
        raise ConfigurationError(msg)
    return path
