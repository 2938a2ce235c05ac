"""Multilayer perceptron (Linear -> LayerNorm -> ReLU -> Linear) trained with Adam.

Forward and backward passes are written out by hand on numpy arrays. Inputs
may be a single vector of shape (D,) or a batch of shape (B, D). The loss is
the mean over samples of the squared Euclidean position error.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from .const import (
    CHECKPOINT_FORMAT,
    CHECKPOINT_FORMAT_VERSION,
    CURVE_CSV_COLUMNS,
    DEFAULT_ADAM_EPS,
    DEFAULT_BATCH_SIZE,
    DEFAULT_BETA1,
    DEFAULT_BETA2,
    DEFAULT_EPOCHS,
    DEFAULT_HIDDEN,
    DEFAULT_LEARNING_RATE,
    LAYER_NORM_EPS,
    NORMALIZER_STD_FLOOR,
    STREAM_TRAIN,
    InputMode,
)
from .errors import CheckpointFormatError, ConfigurationError, TrainingDivergedError

_LOGGER = logging.getLogger(__name__)

PARAM_NAMES = ("W1", "b1", "ln_gain", "ln_bias", "W2", "b2")
OUTPUT_DIM = 3

Params = dict[str, np.ndarray]


@dataclass(frozen=True, eq=False)
class Normalizer:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std


def fit_normalizer(features: Any, std_floor: float = NORMALIZER_STD_FLOOR) -> Normalizer:
    """Per-dimension mean and (floored) population std of the training features."""
    features = np.atleast_2d(np.asarray(features, dtype=float))
    if features.shape[0] == 0:
        msg = "Cannot fit a normalizer on an empty batch"
        raise ConfigurationError(msg)
    return Normalizer(
        mean=features.mean(axis=0), std=np.maximum(features.std(axis=0), std_floor)
    )


@dataclass(eq=False)
class MlpModel:
    W1: np.ndarray
    b1: np.ndarray
    ln_gain: np.ndarray
    ln_bias: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    normalizer: Normalizer
    input_mode: InputMode = InputMode.PREPROCESSED
    seed: int = 0
    anchors: np.ndarray | None = None
    """Anchor geometry of the training data, (N, 3)."""

    def __post_init__(self) -> None:
        hidden, input_dim = self.W1.shape
        expected = {
            "b1": (hidden,),
            "ln_gain": (hidden,),
            "ln_bias": (hidden,),
            "W2": (OUTPUT_DIM, hidden),
            "b2": (OUTPUT_DIM,),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                msg = f"{name} has shape {getattr(self, name).shape}, expected {shape}"
                raise ConfigurationError(msg)
        if self.normalizer.mean.shape != (input_dim,) or self.normalizer.std.shape != (input_dim,):
            msg = f"Normalizer dimension does not match input dimension {input_dim}"
            raise ConfigurationError(msg)

    @property
    def input_dim(self) -> int:
        return int(self.W1.shape[1])

    @property
    def hidden(self) -> int:
        return int(self.W1.shape[0])

    def params(self) -> Params:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def with_params(self, params: Params) -> MlpModel:
        return replace(self, **{name: params[name] for name in PARAM_NAMES})


def init_model(
    input_dim: int,
    normalizer: Normalizer,
    rng: np.random.Generator,
    hidden: int = DEFAULT_HIDDEN,
    input_mode: InputMode = InputMode.PREPROCESSED,
    seed: int = 0,
) -> MlpModel:
    """Uniform +-sqrt(6 / fan_in) weights, zero biases, unit LayerNorm gain."""
    limit1 = math.sqrt(6.0 / input_dim)
    limit2 = math.sqrt(6.0 / hidden)
    return MlpModel(
        W1=rng.uniform(-limit1, limit1, size=(hidden, input_dim)),
        b1=np.zeros(hidden),
        ln_gain=np.ones(hidden),
        ln_bias=np.zeros(hidden),
        W2=rng.uniform(-limit2, limit2, size=(OUTPUT_DIM, hidden)),
        b2=np.zeros(OUTPUT_DIM),
        normalizer=normalizer,
        input_mode=input_mode,
        seed=seed,
    )


@dataclass(frozen=True, eq=False)
class ForwardCache:
    x_norm: np.ndarray
    x_hat: np.ndarray
    inv_std: np.ndarray
    h2: np.ndarray
    h3: np.ndarray
    t_hat: np.ndarray
    single: bool


def layer_norm(
    h: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float = LAYER_NORM_EPS
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Normalize over the last axis; returns (output, normalized input, 1/std)."""
    mu = h.mean(axis=-1, keepdims=True)
    var = h.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (h - mu) * inv_std
    return x_hat * gain + bias, x_hat, inv_std


def forward(model: MlpModel, x: Any) -> tuple[np.ndarray, ForwardCache]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    batch = np.atleast_2d(x)
    if batch.ndim != 2 or batch.shape[1] != model.input_dim:  # noqa: PLR2004
        msg = f"Input has dimension {batch.shape[-1]}, model expects {model.input_dim}"
        raise ConfigurationError(msg)
    finite = np.isfinite(batch).all(axis=1)
    if not finite.all():
        msg = f"{np.count_nonzero(~finite)} of {len(batch)} inputs contain non-finite values"
        raise ConfigurationError(msg)
    x_norm = model.normalizer.apply(batch)
    h1 = x_norm @ model.W1.T + model.b1
    h2, x_hat, inv_std = layer_norm(h1, model.ln_gain, model.ln_bias)
    h3 = np.maximum(h2, 0.0)
    t_hat = h3 @ model.W2.T + model.b2
    cache = ForwardCache(
        x_norm=x_norm, x_hat=x_hat, inv_std=inv_std, h2=h2, h3=h3, t_hat=t_hat, single=single
    )
    return (t_hat[0] if single else t_hat), cache


def mse_loss(predictions: Any, labels: Any) -> float:
    """Mean over samples of the squared Euclidean error (not divided by 3)."""
    predictions = np.atleast_2d(np.asarray(predictions, dtype=float))
    labels = np.atleast_2d(np.asarray(labels, dtype=float))
    if predictions.shape != labels.shape:
        msg = f"Prediction shape {predictions.shape} != label shape {labels.shape}"
        raise ConfigurationError(msg)
    if predictions.shape[0] == 0:
        msg = "mse_loss needs at least one sample"
        raise ConfigurationError(msg)
    return float(np.mean(np.sum((predictions - labels) ** 2, axis=-1)))


def backward(model: MlpModel, cache: ForwardCache, label: Any) -> Params:
    """Gradients of the loss for the cached forward pass.

    For a single sample this is the gradient of ||t_hat - t||^2; for a batch it
    is the gradient of the batch mean.
    """
    label = np.atleast_2d(np.asarray(label, dtype=float))
    batch_size = cache.t_hat.shape[0]
    d_out = 2.0 * (cache.t_hat - label) / batch_size

    grad_w2 = d_out.T @ cache.h3
    grad_b2 = d_out.sum(axis=0)
    d_h2 = (d_out @ model.W2) * (cache.h2 > 0)

    grad_gain = np.sum(d_h2 * cache.x_hat, axis=0)
    grad_bias = d_h2.sum(axis=0)
    d_xhat = d_h2 * model.ln_gain
    # Full LayerNorm Jacobian: mean and variance both depend on every unit
    d_h1 = cache.inv_std * (
        d_xhat
        - d_xhat.mean(axis=-1, keepdims=True)
        - cache.x_hat * np.mean(d_xhat * cache.x_hat, axis=-1, keepdims=True)
    )
    grad_w1 = d_h1.T @ cache.x_norm
    grad_b1 = d_h1.sum(axis=0)
    return {
        "W1": grad_w1,
        "b1": grad_b1,
        "ln_gain": grad_gain,
        "ln_bias": grad_bias,
        "W2": grad_w2,
        "b2": grad_b2,
    }


@dataclass(eq=False)
class AdamState:
    lr: float = DEFAULT_LEARNING_RATE
    beta1: float = DEFAULT_BETA1
    beta2: float = DEFAULT_BETA2
    eps: float = DEFAULT_ADAM_EPS
    step: int = 0
    m: Params = field(default_factory=dict)
    v: Params = field(default_factory=dict)

    @classmethod
    def fresh(cls, params: Params, lr: float = DEFAULT_LEARNING_RATE, **kwargs: Any) -> AdamState:
        return cls(
            lr=lr,
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
            **kwargs,
        )


def adam_step(state: AdamState, params: Params, grads: Params) -> tuple[Params, AdamState]:
    """One bias-corrected Adam update; returns new parameters and a new state."""
    step = state.step + 1
    m = {k: state.beta1 * state.m.get(k, 0.0) + (1 - state.beta1) * g for k, g in grads.items()}
    v = {
        k: state.beta2 * state.v.get(k, 0.0) + (1 - state.beta2) * g * g for k, g in grads.items()
    }
    correction1 = 1 - state.beta1**step
    correction2 = 1 - state.beta2**step
    new_params = {}
    for key, value in params.items():
        if key not in grads:
            new_params[key] = value
            continue
        if np.shape(grads[key]) != np.shape(value):
            msg = f"Gradient for {key} has shape {np.shape(grads[key])}, expected {np.shape(value)}"
            raise ConfigurationError(msg)
        m_hat = m[key] / correction1
        v_hat = v[key] / correction2
        new_params[key] = value - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, replace(state, step=step, m=m, v=v)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = DEFAULT_EPOCHS
    batch_size: int = DEFAULT_BATCH_SIZE
    seed: int = 0
    lr: float = DEFAULT_LEARNING_RATE
    input_mode: InputMode = InputMode.PREPROCESSED
    hidden: int = DEFAULT_HIDDEN

    def __post_init__(self) -> None:
        if self.epochs < 1:
            msg = f"epochs must be >= 1, got {self.epochs}"
            raise ConfigurationError(msg)
        if self.batch_size < 1:
            msg = f"batch_size must be >= 1, got {self.batch_size}"
            raise ConfigurationError(msg)
        if not self.lr > 0:
            msg = f"lr must be positive, got {self.lr}"
            raise ConfigurationError(msg)
        if self.hidden < 1:
            msg = f"hidden must be >= 1, got {self.hidden}"
            raise ConfigurationError(msg)


@dataclass(frozen=True, eq=False)
class TrainingSplits:
    train_x: np.ndarray
    train_y: np.ndarray
    val_x: np.ndarray
    val_y: np.ndarray
    anchors: np.ndarray | None = None


@dataclass(eq=False)
class TrainingCurve:
    epochs: list[int] = field(default_factory=list)
    train_mse: list[float] = field(default_factory=list)
    val_mse: list[float] = field(default_factory=list)
    best_epoch: int = 0

    def append(self, epoch: int, train_mse: float, val_mse: float) -> None:
        self.epochs.append(epoch)
        self.train_mse.append(train_mse)
        self.val_mse.append(val_mse)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            dict(zip(CURVE_CSV_COLUMNS, (self.epochs, self.train_mse, self.val_mse), strict=True))
        )

    def write_csv(self, path: Path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")


def predict(model: MlpModel, features: Any) -> np.ndarray:
    """Predicted positions, shape (B, 3) for a batch or (3,) for one vector."""
    t_hat, _ = forward(model, features)
    return t_hat


def evaluate_rmse(model: MlpModel, features: Any, targets: Any) -> float:
    return math.sqrt(mse_loss(predict(model, features), targets))


def train(splits: TrainingSplits, cfg: TrainConfig) -> tuple[MlpModel, TrainingCurve]:
    """Mini-batch Adam training; keeps the parameters with the best validation MSE.

    With an empty validation split the training MSE is used for selection.
    """
    train_x = np.asarray(splits.train_x, dtype=float)
    train_y = np.asarray(splits.train_y, dtype=float)
    val_x = np.asarray(splits.val_x, dtype=float)
    val_y = np.asarray(splits.val_y, dtype=float)
    if train_x.shape[0] == 0 or train_x.shape[0] != train_y.shape[0]:
        msg = f"Training split has {train_x.shape[0]} inputs and {train_y.shape[0]} labels"
        raise ConfigurationError(msg)

    rng = np.random.default_rng([cfg.seed, STREAM_TRAIN])
    model = init_model(
        train_x.shape[1],
        fit_normalizer(train_x),
        rng,
        hidden=cfg.hidden,
        input_mode=cfg.input_mode,
        seed=cfg.seed,
    )
    model = replace(model, anchors=splits.anchors)
    params = model.params()
    state = AdamState.fresh(params, lr=cfg.lr)
    curve = TrainingCurve()
    best_score = math.inf
    best_params = {k: v.copy() for k, v in params.items()}
    sample_count = train_x.shape[0]
    log_every = max(1, cfg.epochs // 10)
    _LOGGER.info(
        f"Training {cfg.input_mode.value} MLP: D={train_x.shape[1]}, "
        f"{sample_count} samples, {cfg.epochs} epochs, batch {cfg.batch_size}, lr {cfg.lr}"
    )

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(sample_count)
        loss_sum = 0.0
        for start in range(0, sample_count, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            model = model.with_params(params)
            t_hat, cache = forward(model, train_x[idx])
            loss_sum += mse_loss(t_hat, train_y[idx]) * idx.shape[0]
            params, state = adam_step(state, params, backward(model, cache, train_y[idx]))
        train_mse = loss_sum / sample_count
        model = model.with_params(params)
        val_mse = mse_loss(predict(model, val_x), val_y) if val_x.shape[0] else math.nan
        if not math.isfinite(train_mse) or (val_x.shape[0] and not math.isfinite(val_mse)):
            msg = f"Training diverged at epoch {epoch} (train MSE {train_mse}, val MSE {val_mse})"
            raise TrainingDivergedError(msg, epoch)
        curve.append(epoch, train_mse, val_mse)

        score = train_mse if math.isnan(val_mse) else val_mse
        if score < best_score:
            best_score = score
            best_params = {k: v.copy() for k, v in params.items()}
            curve.best_epoch = epoch
        if epoch % log_every == 0 or epoch == cfg.epochs:
            _LOGGER.info(f"epoch {epoch}: train MSE {train_mse:.5g}, val MSE {val_mse:.5g}")
        else:
            _LOGGER.debug("epoch %d: train MSE %.5g, val MSE %.5g", epoch, train_mse, val_mse)

    _LOGGER.info(f"Best epoch {curve.best_epoch} (selection MSE {best_score:.5g})")
    return model.with_params(best_params), curve


def _encode(array: np.ndarray) -> Any:
    return array.tolist()


def _decode(value: Any, shape: tuple[int, ...], name: str) -> np.ndarray:
    array = np.asarray(value, dtype=float)
    if array.shape != shape:
        msg = f"Checkpoint field {name} has shape {array.shape}, expected {shape}"
        raise CheckpointFormatError(msg)
    return array


def _decode_anchors(value: Any) -> np.ndarray | None:
    if value is None:
        return None
    anchors = np.asarray(value, dtype=float)
    if anchors.ndim != 2 or anchors.shape[1] != 3:  # noqa: PLR2004
        msg = f"Checkpoint anchors have shape {anchors.shape}, expected (N, 3)"
        raise CheckpointFormatError(msg)
    return anchors


def save_checkpoint(
    model: MlpModel, path: Path, provenance: dict[str, Any] | None = None
) -> None:
    """Write a versioned JSON checkpoint; floats use repr, so reloading is lossless."""
    document = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_FORMAT_VERSION,
        "input_mode": model.input_mode.value,
        "input_dim": model.input_dim,
        "hidden": model.hidden,
        "seed": model.seed,
        "anchors": None if model.anchors is None else _encode(model.anchors),
        "params": {name: _encode(getattr(model, name)) for name in PARAM_NAMES},
        "normalizer": {
            "mean": _encode(model.normalizer.mean),
            "std": _encode(model.normalizer.std),
        },
        "provenance": provenance or {},
    }
    path.write_text(json.dumps(document, indent=1))
    _LOGGER.info("Saved %s checkpoint to %s", model.input_mode.value, path)


def load_checkpoint(path: Path, expected_input_dim: int | None = None) -> MlpModel:
    try:
        document = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        msg = f"{path} is not a JSON checkpoint: {err}"
        raise CheckpointFormatError(msg) from err
    if not isinstance(document, dict) or document.get("format") != CHECKPOINT_FORMAT:
        msg = f"{path} is not a {CHECKPOINT_FORMAT} checkpoint"
        raise CheckpointFormatError(msg)
    if document.get("version") != CHECKPOINT_FORMAT_VERSION:
        msg = (
            f"{path} has checkpoint version {document.get('version')}, "
            f"this build reads version {CHECKPOINT_FORMAT_VERSION}"
        )
        raise CheckpointFormatError(msg)

    try:
        input_dim = int(document["input_dim"])
        hidden = int(document["hidden"])
        params = document["params"]
        shapes = {
            "W1": (hidden, input_dim),
            "b1": (hidden,),
            "ln_gain": (hidden,),
            "ln_bias": (hidden,),
            "W2": (OUTPUT_DIM, hidden),
            "b2": (OUTPUT_DIM,),
        }
        model = MlpModel(
            **{name: _decode(params[name], shapes[name], name) for name in PARAM_NAMES},
            normalizer=Normalizer(
                mean=_decode(document["normalizer"]["mean"], (input_dim,), "normalizer.mean"),
                std=_decode(document["normalizer"]["std"], (input_dim,), "normalizer.std"),
            ),
            input_mode=InputMode(document["input_mode"]),
            seed=int(document["seed"]),
            anchors=_decode_anchors(document.get("anchors")),
        )
    except (KeyError, TypeError, ValueError) as err:
        msg = f"{path} is missing or has invalid checkpoint fields: {err}"
        raise CheckpointFormatError(msg) from err

    if expected_input_dim is not None and model.input_dim != expected_input_dim:
        msg = (
            f"{path} was trained on D={model.input_dim} "
            f"({model.input_mode.value}) but D={expected_input_dim} is required"
        )
        raise CheckpointFormatError(msg)
    return model
