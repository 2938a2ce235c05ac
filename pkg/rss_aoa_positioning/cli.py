"""Command-line entry point: gen-data, train, sweep, evaluate and plot."""

from __future__ import annotations

# ruff: noqa: PLC0415 (import-outside-toplevel) - keep --help fast, numeric stack loads per command
import argparse
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any, NoReturn

from .const import TITLE, VERSION, InputMode, Method
from .errors import ConfigurationError, PositioningError

_LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

DATASET_FILE = "dataset.bin"
META_SUFFIX = ".meta.json"


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def checkpoint_name(mode: InputMode) -> str:
    return f"mlp_{mode.value}.json"


def curve_name(mode: InputMode) -> str:
    return f"curve_{mode.value}.csv"


def sweep_name(variable: str) -> str:
    return f"sweep_{variable}.csv"


def write_meta(path: Path, provenance: dict[str, Any]) -> Path:
    """Provenance sidecar next to an output file; contents are deterministic."""
    meta = path.with_name(path.name + META_SUFFIX)
    meta.write_text(json.dumps(provenance, indent=2, sort_keys=True) + "\n")
    return meta


def _provenance(command: str, config: Any, **inputs: Any) -> dict[str, Any]:
    return {
        "tool": TITLE,
        "version": VERSION,
        "command": command,
        "config": config.to_dict(),
        "inputs": {k: str(v) for k, v in inputs.items()},
    }


def _load(args: argparse.Namespace) -> Any:
    from .config import ensure_output_dir, load_config

    config = load_config(args.config, seed=args.seed, output_dir=args.out)
    ensure_output_dir(config.output_dir)
    return config


def _load_dataset(args: argparse.Namespace, config: Any) -> Any:
    from . import dataset

    manifest = config.dataset_manifest()
    path = args.dataset or config.output_dir / DATASET_FILE
    data = dataset.load(path)
    if data.manifest != manifest:
        _LOGGER.warning("Dataset %s was generated from a different configuration", path)
    return data


def cmd_gen_data(args: argparse.Namespace) -> int:
    from . import dataset

    config = _load(args)
    path = config.output_dir / DATASET_FILE
    manifest = config.dataset_manifest()
    provenance = _provenance("gen-data", config)
    data = dataset.generate(manifest, workers=config.workers)
    dataset.save(data, path, provenance)
    write_meta(path, provenance)
    print(f"Wrote {len(data)} samples to {path}")
    print(f"  seed={manifest.seed} anchors={data.anchor_count} box={manifest.scene.box_size} m")
    print(f"  noise levels={len(manifest.noise_grid)} split={list(manifest.split_ratios)}")
    print(f"  feature D={data.features.shape[1]} raw D={data.theta.shape[1]}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    from dataclasses import replace

    from . import dataset, mlp

    config = _load(args)
    mode = InputMode(args.mode)
    data = _load_dataset(args, config)
    splits = dataset.split(len(data), data.manifest.split_ratios, config.seed)
    train_cfg = replace(config.train, input_mode=mode)
    model, curve = mlp.train(data.training_splits(mode, splits), train_cfg)

    provenance = _provenance("train", config, dataset=args.dataset or DATASET_FILE, mode=mode.value)
    checkpoint = config.output_dir / checkpoint_name(mode)
    mlp.save_checkpoint(model, checkpoint, provenance)
    write_meta(checkpoint, provenance)
    curve_path = config.output_dir / curve_name(mode)
    curve.write_csv(curve_path)
    write_meta(curve_path, provenance)

    if len(splits.test):
        test_rmse = dataset.evaluate_split(model, data, splits.test)
        print(f"{mode.value}: best epoch {curve.best_epoch}, test RMSE {test_rmse:.4f} m")
    print(f"Wrote {checkpoint} and {curve_path}")
    return EXIT_OK


def _load_models(paths: Sequence[Path], anchor_count: int) -> dict[Method, Any]:
    from . import mlp
    from .evaluation import MLP_MODES

    by_mode = {mode: method for method, mode in MLP_MODES.items()}
    models: dict[Method, Any] = {}
    for path in paths:
        model = mlp.load_checkpoint(path)
        expected = 12 * anchor_count if model.input_mode == InputMode.PREPROCESSED else 3 * anchor_count
        if model.input_dim != expected:
            msg = (
                f"{path} expects D={model.input_dim} but the scene has {anchor_count} anchors "
                f"(D={expected} for {model.input_mode.value})"
            )
            raise ConfigurationError(msg)
        method = by_mode[model.input_mode]
        if method in models:
            msg = f"More than one {model.input_mode.value} checkpoint given"
            raise ConfigurationError(msg)
        models[method] = model
    return models


def cmd_sweep(args: argparse.Namespace) -> int:
    from .evaluation import MLP_MODES, compare_report, run_sweep, write_sweep_csv
    from .plotting import write_plot_script

    config = _load(args)
    models = _load_models(args.checkpoints, config.scene.anchor_count)
    provenance = _provenance(
        "sweep", config, checkpoints=",".join(str(p) for p in args.checkpoints)
    )
    csv_paths = []
    for spec in config.sweeps:
        result = run_sweep(
            spec,
            config.scene,
            config.path_loss,
            models=models,
            seed=config.seed,
            matched_gamma=config.matched_gamma,
            workers=config.workers,
        )
        path = write_sweep_csv(result, config.output_dir / sweep_name(spec.variable.value))
        write_meta(path, provenance)
        csv_paths.append(path)
        if set(models) == set(MLP_MODES):
            report = compare_report(result)
            report_path = path.with_suffix(".txt")
            report_path.write_text(report.format() + "\n")
            print(report.format())
        else:
            _LOGGER.info("Skipping the method ranking for %s: not every MLP was given", spec.variable.value)
    script = write_plot_script(config.output_dir, csv_paths)
    print(f"Wrote {len(csv_paths)} sweep CSVs and {script}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    from . import dataset, mlp

    config = _load(args)
    data = _load_dataset(args, config)
    splits = dataset.split(len(data), data.manifest.split_ratios, config.seed)
    for path in args.checkpoints:
        model = mlp.load_checkpoint(path)
        test_rmse = dataset.evaluate_split(model, data, splits.test)
        print(f"{path}: {model.input_mode.value} test RMSE {test_rmse:.4f} m over {len(splits.test)} samples")
    return EXIT_OK


def cmd_plot(args: argparse.Namespace) -> int:
    from .plotting import plot_sweep

    config = _load(args)
    paths = args.csv or sorted(config.output_dir.glob(sweep_name("*")))
    if not paths:
        msg = f"No sweep CSVs found in {config.output_dir}"
        raise ConfigurationError(msg)
    for path in paths:
        plot_sweep(path, path.with_suffix(".png"))
    print(f"Rendered {len(paths)} figures")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, required=True, help="Experiment YAML file")
    common.add_argument("--seed", type=int, default=None, help="Override the master seed")
    common.add_argument("--out", type=Path, default=None, help="Override the output directory")
    common.add_argument("-v", "--verbose", action="store_true", help="Debug logging")

    parser = _Parser(prog="rss-aoa-positioning", description=f"{TITLE} experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("gen-data", parents=[common], help="Generate the training dataset")
    gen.set_defaults(func=cmd_gen_data)

    train = sub.add_parser("train", parents=[common], help="Train one MLP")
    train.add_argument(
        "--mode", required=True, choices=[m.value for m in InputMode], help="Input representation"
    )
    train.add_argument("--dataset", type=Path, default=None, help=f"Dataset file (default <out>/{DATASET_FILE})")
    train.set_defaults(func=cmd_train)

    sweep = sub.add_parser("sweep", parents=[common], help="Run the RMSE noise sweeps")
    sweep.add_argument("checkpoints", nargs="*", type=Path, help="MLP checkpoints to include")
    sweep.set_defaults(func=cmd_sweep)

    evaluate = sub.add_parser("evaluate", parents=[common], help="Test-split RMSE of checkpoints")
    evaluate.add_argument("checkpoints", nargs="+", type=Path)
    evaluate.add_argument("--dataset", type=Path, default=None)
    evaluate.set_defaults(func=cmd_evaluate)

    plot = sub.add_parser("plot", parents=[common], help="Render figures from sweep CSVs")
    plot.add_argument("csv", nargs="*", type=Path, help="Sweep CSVs (default: all in <out>)")
    plot.set_defaults(func=cmd_plot)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return int(args.func(args))
    except ConfigurationError as err:
        _LOGGER.error("Configuration error: %s", err)
        return EXIT_CONFIG
    except (PositioningError, OSError) as err:
        _LOGGER.error("%s: %s", type(err).__name__, err)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
