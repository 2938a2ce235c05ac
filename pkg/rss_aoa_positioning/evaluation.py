"""Monte Carlo RMSE sweeps comparing WLS, LS and the two MLP estimators."""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from scipy import stats

from .const import (
    BOOTSTRAP_CONFIDENCE,
    BOOTSTRAP_RESAMPLES,
    DEFAULT_ANGLE_GRID_DEG,
    DEFAULT_FIXED_SIGMA_ANGLE_DEG,
    DEFAULT_FIXED_SIGMA_RSS_DB,
    DEFAULT_RSS_GRID_DB,
    DEFAULT_TRIALS,
    DEFAULT_WORKERS,
    GENERATION_CHUNK_SIZE,
    MAX_FAILURE_FRACTION,
    STREAM_BOOTSTRAP,
    STREAM_SWEEP,
    SWEEP_CSV_COLUMNS,
    AnchorLayout,
    InputMode,
    Method,
    SweepVariable,
)
from .errors import ConfigurationError, SweepAbortedError
from .estimators import solve_ls_batch, solve_wls_batch
from .linearization import feature_arrays, system_arrays, weight_arrays, weight_rows
from .measurement import NoiseConfig, synthesize_batch
from .mlp import MlpModel, predict
from .scene import PathLossConfig, SceneConfig, resolve_anchors, sample_scenes

_LOGGER = logging.getLogger(__name__)

MLP_MODES = {Method.MLP_RAW: InputMode.RAW, Method.MLP_PRE: InputMode.PREPROCESSED}
_VARIABLES = tuple(SweepVariable)
_METHODS = tuple(Method)


@dataclass(frozen=True)
class SweepSpec:
    """One noise sweep. RSS values are in dB, angle values in degrees."""

    variable: SweepVariable
    grid: tuple[float, ...]
    fixed_rss_db: float = DEFAULT_FIXED_SIGMA_RSS_DB
    fixed_azimuth_deg: float = DEFAULT_FIXED_SIGMA_ANGLE_DEG
    fixed_elevation_deg: float = DEFAULT_FIXED_SIGMA_ANGLE_DEG
    trials: int = DEFAULT_TRIALS
    mlp_trials: int | None = None
    """Trials the MLPs are evaluated on (a prefix of the closed-form trials); None means all."""

    def __post_init__(self) -> None:
        grid = tuple(float(v) for v in self.grid)
        object.__setattr__(self, "grid", grid)
        if not grid:
            msg = f"{self.variable.value} sweep grid must not be empty"
            raise ConfigurationError(msg)
        if any(v < 0 or not math.isfinite(v) for v in grid):
            msg = f"{self.variable.value} sweep grid must be finite and >= 0, got {grid}"
            raise ConfigurationError(msg)
        if any(b <= a for a, b in zip(grid, grid[1:], strict=False)):
            msg = f"{self.variable.value} sweep grid must be strictly increasing, got {grid}"
            raise ConfigurationError(msg)
        if self.trials < 1 or (self.mlp_trials is not None and self.mlp_trials < 1):
            msg = "trials and mlp_trials must be >= 1"
            raise ConfigurationError(msg)

    def noise_at(self, value: float) -> NoiseConfig:
        rss, azimuth, elevation = (
            self.fixed_rss_db,
            self.fixed_azimuth_deg,
            self.fixed_elevation_deg,
        )
        if self.variable == SweepVariable.SIGMA_RSS:
            rss = value
        elif self.variable == SweepVariable.SIGMA_AZIMUTH:
            azimuth = value
        else:
            elevation = value
        return NoiseConfig.from_degrees(rss, azimuth, elevation)

    def noise_points(self) -> list[NoiseConfig]:
        return [self.noise_at(v) for v in self.grid]

    @property
    def effective_mlp_trials(self) -> int:
        return self.trials if self.mlp_trials is None else min(self.mlp_trials, self.trials)


def default_sweeps(trials: int = DEFAULT_TRIALS) -> tuple[SweepSpec, ...]:
    return (
        SweepSpec(SweepVariable.SIGMA_RSS, DEFAULT_RSS_GRID_DB, trials=trials),
        SweepSpec(SweepVariable.SIGMA_AZIMUTH, DEFAULT_ANGLE_GRID_DEG, trials=trials),
        SweepSpec(SweepVariable.SIGMA_ELEVATION, DEFAULT_ANGLE_GRID_DEG, trials=trials),
    )


def rmse(true_positions: Any, estimates: Any) -> float:
    """Root of the mean squared Euclidean position error."""
    truth = np.atleast_2d(np.asarray(true_positions, dtype=float))
    est = np.atleast_2d(np.asarray(estimates, dtype=float))
    if truth.shape != est.shape or truth.shape[0] == 0:
        msg = f"rmse needs equal, nonempty inputs; got {truth.shape} and {est.shape}"
        raise ConfigurationError(msg)
    return math.sqrt(float(np.mean(np.sum((truth - est) ** 2, axis=-1))))


def _rmse_statistic(samples: np.ndarray, axis: int = -1) -> np.ndarray:
    return np.sqrt(np.mean(samples, axis=axis))


def bootstrap_ci(squared_errors: np.ndarray, rng: np.random.Generator) -> tuple[float, float]:
    """Percentile bootstrap confidence interval of the RMSE."""
    squared_errors = np.asarray(squared_errors, dtype=float)
    if squared_errors.size == 0:
        return math.nan, math.nan
    if np.ptp(squared_errors) == 0:
        value = math.sqrt(float(squared_errors[0]))
        return value, value
    result = stats.bootstrap(
        (squared_errors,),
        _rmse_statistic,
        n_resamples=BOOTSTRAP_RESAMPLES,
        confidence_level=BOOTSTRAP_CONFIDENCE,
        method="percentile",
        vectorized=True,
        batch=100,
        rng=rng,
    )
    return float(result.confidence_interval.low), float(result.confidence_interval.high)


@dataclass(frozen=True, eq=False)
class SweepCell:
    variable: SweepVariable
    value: float
    method: Method
    rmse: float
    trials: int
    failures: int
    ci_low: float
    ci_high: float
    squared_errors: np.ndarray = field(repr=False)


def summarize_errors(
    variable: SweepVariable,
    value: float,
    method: Method,
    squared_errors: np.ndarray,
    failures: int,
    rng: np.random.Generator,
) -> SweepCell:
    """Aggregate per-trial squared errors (failed trials already removed) into a cell."""
    squared_errors = np.asarray(squared_errors, dtype=float)
    value_rmse = math.sqrt(float(np.mean(squared_errors))) if squared_errors.size else math.nan
    ci_low, ci_high = bootstrap_ci(squared_errors, rng)
    return SweepCell(
        variable=variable,
        value=value,
        method=method,
        rmse=value_rmse,
        trials=int(squared_errors.size + failures),
        failures=int(failures),
        ci_low=ci_low,
        ci_high=ci_high,
        squared_errors=squared_errors,
    )


@dataclass(eq=False)
class SweepResult:
    variable: SweepVariable
    cells: list[SweepCell] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        rows = [
            (c.variable.value, c.value, c.method.value, c.rmse, c.trials, c.failures, c.ci_low, c.ci_high)
            for c in self.cells
        ]
        return pd.DataFrame(rows, columns=list(SWEEP_CSV_COLUMNS))

    def write_csv(self, path: Path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.12g")

    def methods(self) -> list[Method]:
        return list(dict.fromkeys(c.method for c in self.cells))

    def values(self) -> list[float]:
        return list(dict.fromkeys(c.value for c in self.cells))

    def cell(self, value: float, method: Method) -> SweepCell:
        for c in self.cells:
            if c.value == value and c.method == method:
                return c
        msg = f"No {method.value} cell at {self.variable.value}={value}"
        raise KeyError(msg)


def read_sweep_csv(path: Path) -> pd.DataFrame:
    frame = pd.read_csv(path)
    if tuple(frame.columns) != SWEEP_CSV_COLUMNS:
        msg = f"{path} does not have the sweep CSV header {','.join(SWEEP_CSV_COLUMNS)}"
        raise ConfigurationError(msg)
    return frame


def _check_models(
    models: Mapping[Method, MlpModel], scene_cfg: SceneConfig, anchors: np.ndarray | None
) -> None:
    if models and scene_cfg.anchor_layout == AnchorLayout.RANDOM_PER_SCENE:
        msg = "MLP estimators need fixed anchors; random_per_scene sweeps are closed-form only"
        raise ConfigurationError(msg)
    n = scene_cfg.anchor_count
    for method, model in models.items():
        if method not in MLP_MODES:
            msg = f"{method.value} is not an MLP method"
            raise ConfigurationError(msg)
        mode = MLP_MODES[method]
        expected_dim = 12 * n if mode == InputMode.PREPROCESSED else 3 * n
        if model.input_mode != mode or model.input_dim != expected_dim:
            msg = (
                f"{method.value} needs a {mode.value} model with D={expected_dim}, got "
                f"{model.input_mode.value} with D={model.input_dim}"
            )
            raise ConfigurationError(msg)
        if (
            anchors is not None
            and model.anchors is not None
            and not np.allclose(model.anchors, anchors, rtol=0, atol=1e-9)
        ):
            msg = f"{method.value} model was trained on a different anchor geometry"
            raise ConfigurationError(msg)


def _run_chunk(
    seed_key: list[int],
    count: int,
    mlp_count: int,
    noise: NoiseConfig,
    scene_cfg: SceneConfig,
    pl: PathLossConfig,
    models: Mapping[Method, MlpModel],
) -> dict[Method, tuple[np.ndarray, np.ndarray]]:
    """Squared errors and failure masks per method for one chunk of trials."""
    rng = np.random.default_rng(seed_key)
    batch = sample_scenes(scene_cfg, pl, rng, count)
    sigmas = noise.per_anchor(scene_cfg.anchor_count)[:, None, :]
    rss, azimuth, elevation = synthesize_batch(batch, pl, sigmas, rng)
    A, b = system_arrays(rss, azimuth, elevation, batch.anchors, pl)
    w, _ = weight_arrays(rss, pl)

    out: dict[Method, tuple[np.ndarray, np.ndarray]] = {}
    for method, weights in ((Method.WLS, w), (Method.LS, None)):
        estimate = solve_wls_batch(A, b, weights) if weights is not None else solve_ls_batch(A, b)
        errors = np.sum((estimate.positions - batch.targets) ** 2, axis=-1)
        out[method] = (errors, estimate.failed)

    if mlp_count and models:
        inputs = {
            InputMode.PREPROCESSED: feature_arrays(*weight_rows(A[:mlp_count], b[:mlp_count], w[:mlp_count])),
            InputMode.RAW: np.concatenate([rss, azimuth, elevation], axis=-1)[:mlp_count],
        }
        for method, model in models.items():
            positions = predict(model, inputs[model.input_mode])
            errors = np.sum((positions - batch.targets[:mlp_count]) ** 2, axis=-1)
            out[method] = (errors, np.zeros(mlp_count, dtype=bool))
    return out


def run_sweep(
    spec: SweepSpec,
    scene_cfg: SceneConfig,
    pl: PathLossConfig,
    models: Mapping[Method, MlpModel] | None = None,
    seed: int = 0,
    matched_gamma: bool = False,
    workers: int = DEFAULT_WORKERS,
) -> SweepResult:
    """Monte Carlo RMSE of every estimator at each grid point of one sweep.

    Trials are freshly synthesized; each chunk of trials has its own random
    stream derived from (seed, variable, grid point, chunk), so results do not
    depend on the number of workers.
    """
    models = dict(models or {})
    anchors = (
        None
        if scene_cfg.anchor_layout == AnchorLayout.RANDOM_PER_SCENE
        else np.array([a.as_array() for a in resolve_anchors(scene_cfg)])
    )
    _check_models(models, scene_cfg, anchors)
    effective_pl = pl.matched() if matched_gamma else pl
    methods = [Method.WLS, Method.LS, *[m for m in _METHODS if m in models]]
    var_index = _VARIABLES.index(spec.variable)
    result = SweepResult(variable=spec.variable)

    for point_index, value in enumerate(spec.grid):
        noise = spec.noise_at(value)
        starts = list(range(0, spec.trials, GENERATION_CHUNK_SIZE))
        jobs = []
        for chunk, start in enumerate(starts):
            count = min(GENERATION_CHUNK_SIZE, spec.trials - start)
            mlp_count = int(np.clip(spec.effective_mlp_trials - start, 0, count))
            key = [seed, STREAM_SWEEP, var_index, point_index, chunk]
            jobs.append((key, count, mlp_count))
        with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
            chunks = list(
                executor.map(
                    lambda job: _run_chunk(*job, noise, scene_cfg, effective_pl, models), jobs
                )
            )

        for method in methods:
            errors = np.concatenate([c[method][0] for c in chunks if method in c])
            failed = np.concatenate([c[method][1] for c in chunks if method in c])
            failures = int(failed.sum())
            if failures > MAX_FAILURE_FRACTION * failed.size:
                msg = (
                    f"{method.value} failed on {failures}/{failed.size} trials at "
                    f"{spec.variable.value}={value}; aborting sweep"
                )
                raise SweepAbortedError(msg)
            rng = np.random.default_rng(
                [seed, STREAM_BOOTSTRAP, var_index, point_index, _METHODS.index(method)]
            )
            cell = summarize_errors(spec.variable, value, method, errors[~failed], failures, rng)
            result.cells.append(cell)
            if failures:
                _LOGGER.warning(
                    "%s: %d singular trials excluded at %s=%s",
                    method.value,
                    failures,
                    spec.variable.value,
                    value,
                )
        _LOGGER.info(
            f"{spec.variable.value}={value}: "
            + ", ".join(f"{c.method.value} {c.rmse:.4g} m" for c in result.cells[-len(methods) :])
        )
    return result


@dataclass(frozen=True)
class RankedMethod:
    method: Method
    rank: int
    rmse: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class PointSummary:
    value: float
    ranking: tuple[RankedMethod, ...]

    @property
    def leaders(self) -> tuple[Method, ...]:
        return tuple(r.method for r in self.ranking if r.rank == 1)

    def rank_of(self, method: Method) -> int:
        return next(r.rank for r in self.ranking if r.method == method)


@dataclass(frozen=True)
class ComparisonReport:
    variable: SweepVariable
    points: tuple[PointSummary, ...]

    def format(self) -> str:
        lines = [f"Ranking by RMSE along {self.variable.value} (95% bootstrap CI)"]
        for point in self.points:
            entries = ", ".join(
                f"{r.rank}. {r.method.value} {r.rmse:.4g} [{r.ci_low:.4g}, {r.ci_high:.4g}]"
                for r in point.ranking
            )
            lines.append(f"  {point.value:g}: {entries}")
        return "\n".join(lines)


def compare_report(
    result: SweepResult, required: Sequence[Method] = _METHODS
) -> ComparisonReport:
    """Rank methods at each grid point; exactly equal RMSE values share a rank."""
    missing = [m for m in required if m not in result.methods()]
    if missing:
        msg = f"Comparison needs all methods; missing {[m.value for m in missing]}"
        raise ConfigurationError(msg)
    points = []
    for value in result.values():
        cells = sorted(
            (result.cell(value, m) for m in result.methods()),
            key=lambda c: (c.rmse, _METHODS.index(c.method)),
        )
        ranking = []
        rank = 0
        previous = None
        for cell in cells:
            if previous is None or cell.rmse != previous:
                rank += 1
                previous = cell.rmse
            ranking.append(RankedMethod(cell.method, rank, cell.rmse, cell.ci_low, cell.ci_high))
        points.append(PointSummary(value=value, ranking=tuple(ranking)))
    return ComparisonReport(variable=result.variable, points=tuple(points))


def write_sweep_csv(result: SweepResult, path: Path) -> Path:
    """Write one sweep as CSV with the fixed column header."""
    path.parent.mkdir(parents=True, exist_ok=True)
    result.write_csv(path)
    _LOGGER.info("Wrote %s sweep to %s", result.variable.value, path)
    return path
