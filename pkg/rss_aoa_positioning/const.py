"""Constants for the RSS/AoA positioning package."""

from __future__ import annotations

from enum import Enum


class AnchorLayout(str, Enum):
    """Enum for anchor placement strategies."""

    FIXED_SEEDED = "fixed_seeded"
    USER_PROVIDED = "user_provided"
    RANDOM_PER_SCENE = "random_per_scene"


class InputMode(str, Enum):
    """Enum for MLP input representations."""

    PREPROCESSED = "preprocessed"
    RAW = "raw"


class Method(str, Enum):
    """Enum for position estimators compared in sweeps."""

    WLS = "WLS"
    LS = "LS"
    MLP_RAW = "MLP_RAW"
    MLP_PRE = "MLP_PRE"


class SweepVariable(str, Enum):
    """Enum for the noise parameter swept in an evaluation run."""

    SIGMA_RSS = "sigma_rss"
    SIGMA_AZIMUTH = "sigma_azimuth"
    SIGMA_ELEVATION = "sigma_elevation"


VERSION = "0.1.0"
TITLE = "RSS/AoA Positioning"

# Config file keys
CONF_SEED = "seed"
CONF_OUTPUT_DIR = "output_dir"
CONF_SCENE = "scene"
CONF_BOX_SIZE = "box_size"
CONF_ANCHOR_COUNT = "anchor_count"
CONF_ANCHOR_LAYOUT = "anchor_layout"
CONF_ANCHORS = "anchors"
CONF_ANCHOR_SEED = "anchor_seed"
CONF_PATH_LOSS = "path_loss"
CONF_P0_DBM = "p0_dbm"
CONF_D0 = "d0"
CONF_GAMMA_TRUE_RANGE = "gamma_true_range"
CONF_GAMMA_RX = "gamma_rx"
CONF_DATASET = "dataset"
CONF_SAMPLE_COUNT = "sample_count"
CONF_SPLIT_RATIOS = "split_ratios"
CONF_NOISE_GRID = "noise_grid"
CONF_TRAIN = "train"
CONF_EPOCHS = "epochs"
CONF_BATCH_SIZE = "batch_size"
CONF_LEARNING_RATE = "lr"
CONF_HIDDEN = "hidden"
CONF_SWEEPS = "sweeps"
CONF_SWEPT_VARIABLE = "variable"
CONF_GRID = "grid"
CONF_FIXED = "fixed"
CONF_TRIALS = "trials"
CONF_MLP_TRIALS = "mlp_trials"
CONF_MATCHED_GAMMA = "matched_gamma"
CONF_WORKERS = "workers"

DEFAULT_OUTPUT_DIR = "runs"

# Scene defaults
DEFAULT_BOX_SIZE = 15.0
DEFAULT_ANCHOR_COUNT = 4
MIN_ANCHOR_COUNT = 4
DEFAULT_ANCHOR_LAYOUT = AnchorLayout.FIXED_SEEDED
MIN_TARGET_ANCHOR_DISTANCE = 0.5
MAX_ANCHOR_CONDITION = 1e6
MAX_SAMPLING_ATTEMPTS = 10_000

# Path-loss defaults
DEFAULT_P0_DBM = -10.0
DEFAULT_D0 = 1.0
DEFAULT_GAMMA_TRUE_RANGE = (2.2, 2.8)
DEFAULT_GAMMA_RX = 2.5

# Estimator thresholds
MAX_CONDITION_ESTIMATE = 1e12

# MLP defaults
DEFAULT_HIDDEN = 128
DEFAULT_EPOCHS = 300
DEFAULT_BATCH_SIZE = 256
DEFAULT_LEARNING_RATE = 0.01
DEFAULT_BETA1 = 0.9
DEFAULT_BETA2 = 0.999
DEFAULT_ADAM_EPS = 1e-8
LAYER_NORM_EPS = 1e-5
NORMALIZER_STD_FLOOR = 1e-8

# Dataset defaults
DEFAULT_SAMPLE_COUNT = 100_000
DEFAULT_SPLIT_RATIOS = (0.75, 0.15, 0.10)
GENERATION_CHUNK_SIZE = 1024
DEFAULT_WORKERS = 1

# Sweep defaults (angles in degrees, RSS in dB)
DEFAULT_RSS_GRID_DB = (0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
DEFAULT_ANGLE_GRID_DEG = (0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0)
DEFAULT_FIXED_SIGMA_RSS_DB = 3.0
DEFAULT_FIXED_SIGMA_ANGLE_DEG = 5.0
DEFAULT_TRIALS = 10_000
BOOTSTRAP_RESAMPLES = 1000
BOOTSTRAP_CONFIDENCE = 0.95
MAX_FAILURE_FRACTION = 0.01

# RNG stream tags, combined with the master seed and an index
STREAM_ANCHORS = 0
STREAM_DATASET = 1
STREAM_SPLIT = 2
STREAM_TRAIN = 3
STREAM_SWEEP = 4
STREAM_BOOTSTRAP = 5

# File formats
DATASET_MAGIC = b"RSSAOADS"
DATASET_FORMAT_VERSION = 1
CHECKPOINT_FORMAT = "rss_aoa_positioning.mlp"
CHECKPOINT_FORMAT_VERSION = 1
SWEEP_CSV_COLUMNS = (
    "sweep_var",
    "value",
    "method",
    "rmse_m",
    "trials",
    "failures",
    "ci_low",
    "ci_high",
)
CURVE_CSV_COLUMNS = ("epoch", "train_mse", "val_mse")
