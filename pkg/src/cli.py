"""
Command-line surface: train, calibrate, sweep, stats, eval, compare.
"""

import argparse
import sys

from config.experiment_config import get_available_experiments, get_experiment_config
from config.settings import AVAILABLE_DATASETS, AVAILABLE_VARIANTS
from src.experiments import commands
from src.utils.errors import AwnError, ConfigError
from src.utils.logging_utils import configure_logging
from src.utils.run_config import build_run_config

# CLI flag -> run config key
OVERRIDE_FLAGS = {
    "variant": "variant",
    "dataset": "dataset",
    "data_dir": "data_dir",
    "output_dir": "output_dir",
    "epochs": "epochs",
    "batch_size": "batch_size",
    "lr": "lr",
    "momentum": "momentum",
    "wd": "weight_decay",
    "schedule": "schedule",
    "widths": "widths",
    "widths_mode": "widths_mode",
    "n_samples": "n_samples",
    "alpha_min": "alpha_min",
    "alpha_max": "alpha_max",
    "seed": "seed",
    "width_multiplier": "width_multiplier",
    "train_subset": "train_subset",
    "test_subset": "test_subset",
    "max_batches": "max_batches",
    "augment": "augment",
}


def _floats(text: str, flag: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{flag}: expected comma-separated numbers, got {text!r}") from None


def _add_run_options(parser: argparse.ArgumentParser):
    parser.add_argument("--config", "-c", help="Flat key=value run config file")
    parser.add_argument("--experiment", "-e", choices=get_available_experiments(),
                        help="Start from a registered experiment preset")
    parser.add_argument("--variant", choices=AVAILABLE_VARIANTS, help="Model variant")
    parser.add_argument("--dataset", choices=AVAILABLE_DATASETS, help="Dataset name")
    parser.add_argument("--data-dir", help="Directory holding <dataset>/ folders")
    parser.add_argument("--output-dir", "-o", help="Directory for checkpoints and reports")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--batch-size", type=int)
    parser.add_argument("--lr", type=float, help="Initial learning rate")
    parser.add_argument("--momentum", type=float)
    parser.add_argument("--wd", type=float, help="Weight decay")
    parser.add_argument("--schedule", choices=["step", "linear"])
    parser.add_argument("--widths", help="Comma-separated width-factors, e.g. 1.0,0.75,0.5,0.25")
    parser.add_argument("--widths-mode", choices=["fixed", "random"])
    parser.add_argument("--n-samples", type=int, help="Widths sampled per iteration (random mode)")
    parser.add_argument("--alpha-min", type=float)
    parser.add_argument("--alpha-max", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--width-multiplier", type=float)
    parser.add_argument("--train-subset", type=int, help="Seeded subset of the training split")
    parser.add_argument("--test-subset", type=int, help="Seeded subset of the test split")
    parser.add_argument("--max-batches", type=int, help="Cap on batches per epoch")
    parser.add_argument("--augment", choices=["true", "false"])
    parser.add_argument("--log-level", help="Logging level (default from AWN_LOG_LEVEL)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Any-width network training and evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in [
        ("train", "Train a model and write a checkpoint"),
        ("stats", "Track BN statistics across widths for three variants"),
        ("compare", "Triangular vs standard convolution, trained at full width"),
    ]:
        _add_run_options(sub.add_parser(name, help=help_text))

    calibrate = sub.add_parser("calibrate", help="Post-training BN calibration (usnet)")
    _add_run_options(calibrate)
    calibrate.add_argument("--checkpoint", required=True)
    calibrate.add_argument("--count", type=int, help="Evenly spaced widths in [alpha_min, 1]")
    calibrate.add_argument("--calibrate-widths", help="Explicit comma-separated widths")
    calibrate.add_argument("--output", help="Output checkpoint path")

    sweep = sub.add_parser("sweep", help="Width sweep, curve CSV and AUC")
    _add_run_options(sweep)
    sweep.add_argument("--checkpoint", required=True)
    sweep.add_argument("--grid", help="Comma-separated alphas (default: alpha_min..1 step 0.025)")
    sweep.add_argument("--output", help="Curve CSV path")

    evaluate = sub.add_parser("eval", help="Accuracy at given width-factors")
    _add_run_options(evaluate)
    evaluate.add_argument("--checkpoint", required=True)
    evaluate.add_argument("--alphas", default="1.0", help="Comma-separated alphas")

    return parser


def resolve_config(args) -> dict:
    base = get_experiment_config(args.experiment) if args.experiment else None
    overrides = {key: getattr(args, flag) for flag, key in OVERRIDE_FLAGS.items()}
    return build_run_config(args.config, overrides, base)


def run(args) -> dict:
    config = resolve_config(args)
    if args.command == "train":
        return commands.cmd_train(config)
    if args.command == "calibrate":
        widths = _floats(args.calibrate_widths, "--calibrate-widths") if args.calibrate_widths else None
        return commands.cmd_calibrate(config, args.checkpoint, widths, args.count, args.output)
    if args.command == "sweep":
        grid = _floats(args.grid, "--grid") if args.grid else None
        return commands.cmd_sweep(config, args.checkpoint, grid, args.output)
    if args.command == "eval":
        return commands.cmd_eval(config, args.checkpoint, _floats(args.alphas, "--alphas"))
    if args.command == "stats":
        return commands.cmd_stats(config)
    return commands.cmd_compare(config)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        run(args)
    except (AwnError, OSError, KeyError, IndexError) as e:
        print(f"❌ Error running {args.command}: {e}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
