"""Desk-scale ordering checks: the preprocessed MLP against the closed-form estimators.

These train two full-size networks and take several minutes; run with `pytest -m slow`.
"""

from __future__ import annotations

import pytest

from rss_aoa_positioning.const import InputMode, Method, SweepVariable
from rss_aoa_positioning.dataset import DatasetManifest, default_noise_grid, generate, split
from rss_aoa_positioning.evaluation import SweepResult, SweepSpec, run_sweep
from rss_aoa_positioning.mlp import MlpModel, TrainConfig, train
from rss_aoa_positioning.scene import PathLossConfig, SceneConfig

pytestmark = pytest.mark.slow

SEED = 2024
RSS_SWEEP = SweepSpec(SweepVariable.SIGMA_RSS, (0.0, 2.0, 4.0, 6.0), trials=2000)
AZIMUTH_SWEEP = SweepSpec(SweepVariable.SIGMA_AZIMUTH, tuple(range(11)), trials=2000)
ELEVATION_SWEEP = SweepSpec(SweepVariable.SIGMA_ELEVATION, tuple(range(11)), trials=2000)
SCENE = SceneConfig(box_size=15.0, anchor_count=4, anchor_seed=SEED)
PATH_LOSS = PathLossConfig()


@pytest.fixture(scope="module")
def desk_models() -> dict[Method, MlpModel]:
    manifest = DatasetManifest(
        seed=SEED,
        scene=SCENE,
        path_loss=PATH_LOSS,
        sample_count=20_000,
        noise_grid=default_noise_grid((RSS_SWEEP, AZIMUTH_SWEEP, ELEVATION_SWEEP)),
    )
    data = generate(manifest, workers=4)
    indices = split(len(data), manifest.split_ratios, SEED)
    models = {}
    for method, mode in ((Method.MLP_RAW, InputMode.RAW), (Method.MLP_PRE, InputMode.PREPROCESSED)):
        cfg = TrainConfig(epochs=100, seed=SEED, input_mode=mode)
        models[method], _ = train(data.training_splits(mode, indices), cfg)
    return models


def _sweep(spec: SweepSpec, models: dict[Method, MlpModel]) -> SweepResult:
    return run_sweep(spec, SCENE, PATH_LOSS, models=models, seed=SEED, workers=4)


def test_preprocessed_mlp_leads_the_rss_sweep(desk_models: dict[Method, MlpModel]) -> None:
    result = _sweep(RSS_SWEEP, desk_models)
    for value in result.values():
        pre = result.cell(value, Method.MLP_PRE)
        wls = result.cell(value, Method.WLS)
        raw = result.cell(value, Method.MLP_RAW)
        overlapping = pre.ci_high >= wls.ci_low and wls.ci_high >= pre.ci_low
        assert pre.rmse <= wls.rmse or (overlapping and pre.rmse <= 1.05 * wls.rmse), value
        assert pre.rmse <= raw.rmse, value


@pytest.mark.parametrize("spec", [AZIMUTH_SWEEP, ELEVATION_SWEEP], ids=lambda s: s.variable.value)
def test_preprocessed_mlp_tracks_wls_under_angle_noise(
    spec: SweepSpec, desk_models: dict[Method, MlpModel]
) -> None:
    result = _sweep(spec, desk_models)
    for value in result.values():
        pre = result.cell(value, Method.MLP_PRE).rmse
        assert pre <= result.cell(value, Method.LS).rmse, value
        assert pre <= 1.15 * result.cell(value, Method.WLS).rmse, value
