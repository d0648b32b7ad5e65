"""
Command implementations behind the CLI.

Each ``cmd_*`` takes a merged run configuration (see src/utils/run_config.py),
prints a short console summary and writes its artifacts under
``config["output_dir"]``.
"""

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from config.settings import CHECKPOINT_FILENAME, CURVE_FILE, TRAIN_LOG_FILE
from src.analysis.evaluation import (
    curve_summary,
    default_sweep_grid,
    evaluate,
    relative_improvement,
    resolve_alpha,
    width_sweep,
)
from src.analysis.statlab import run_varying_stats_experiment
from src.models.lenet import ModelVariant, build_lenet3c1l
from src.training.trainer import bn_storage_report, calibrate_bn, train
from src.utils.checkpoint import file_digest, load_checkpoint, save_checkpoint
from src.utils.datasets import load_dataset, subset
from src.utils.errors import VariantError
from src.utils.run_config import config_hash, to_train_config

logger = logging.getLogger(__name__)

CALIBRATED_FILENAME = "model_calibrated.ckpt"
COMPARISON_FILE = "comparison.csv"


def load_split(config: dict, split: str, dataset_name: str = None):
    name = dataset_name or config["dataset"]
    dataset = load_dataset(name, config["data_dir"], split)
    size = config["train_subset"] if split == "train" else config["test_subset"]
    return subset(dataset, size, config["seed"])


def build_model(config: dict, dataset, kind: str = None, width_multiplier: float = None):
    kind = kind or config["variant"]
    multiplier = width_multiplier if width_multiplier is not None else (config["width_multiplier"] or None)
    variant = ModelVariant(kind, multiplier, config["base_channels"])
    return build_lenet3c1l(
        variant, dataset.images.shape[1], dataset.num_classes,
        trained_widths=config["widths"] if variant.switchable else None,
        input_size=dataset.images.shape[2], seed=config["seed"],
    )


def _output_dir(config: dict) -> Path:
    path = Path(config["output_dir"])
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_train(config: dict) -> dict:
    """Train one model; writes model.ckpt and train_log.csv."""
    train_set = load_split(config, "train")
    model = build_model(config, train_set)
    train_config = to_train_config(config)

    print(f"🚀 Training {model.kind} ({model.channels} channels) on {config['dataset']}")
    print(f"📊 {len(train_set)} images, {train_config.epochs} epochs, widths mode {train_config.widths_mode}")
    print("-" * 50)

    result = train(model, train_set, train_config)
    out = _output_dir(config)
    result.history.to_csv(out / TRAIN_LOG_FILE, index=False)
    ckpt = save_checkpoint(
        out / CHECKPOINT_FILENAME, model, result.sgd_state,
        epoch=train_config.epochs, config_hash=config_hash(config), dataset=config["dataset"],
    )
    digest = file_digest(ckpt)

    final = result.history[result.history["epoch"] == train_config.epochs - 1]
    print("\n📊 TRAINING RESULTS:")
    print("=" * 50)
    for _, row in final.iterrows():
        print(f"width {row['width']:>8}: loss {row['loss']:.4f}")
    print(f"\n💾 Checkpoint saved to: {ckpt}")
    print(f"🔑 sha256: {digest}")
    return {"checkpoint": ckpt, "digest": digest, "history": result.history, "model": model}


def calibration_widths(config: dict, count: int = None) -> list:
    count = count or config["calibrate_count"]
    return [round(float(w), 10) for w in np.linspace(config["alpha_min"], 1.0, count)]


def cmd_calibrate(config: dict, checkpoint, widths=None, count: int = None, output=None) -> dict:
    """Post-training BN calibration of a usnet checkpoint."""
    ckpt = load_checkpoint(checkpoint)
    model = ckpt.model
    if model.kind != "usnet":
        raise VariantError(f"calibrate needs a usnet checkpoint, {checkpoint} holds {model.kind!r}")
    widths = list(widths) if widths else calibration_widths(config, count)
    train_set = load_split(config, "train", ckpt.metadata.get("dataset"))

    before = bn_storage_report(model)
    calibrate_bn(model, train_set, widths, passes=config["calibrate_passes"],
                 batch_size=config["batch_size"], alpha_min=config["alpha_min"], seed=config["seed"])
    after = bn_storage_report(model)

    output = Path(output) if output else Path(checkpoint).with_name(CALIBRATED_FILENAME)
    extra = {k: v for k, v in ckpt.metadata.items() if k in ("epoch", "config_hash", "dataset")}
    save_checkpoint(output, model, ckpt.sgd_state, **extra)

    delta = after["bn_bytes"] - before["bn_bytes"]
    print(f"🔧 Calibrated {len(widths)} widths: {', '.join(f'{w:g}' for w in widths)}")
    print(f"📦 BN storage: {before['bn_bytes']} -> {after['bn_bytes']} bytes (+{delta}), "
          f"{after['bn_share_pct']:.2f}% of the model")
    print(f"💾 Calibrated checkpoint saved to: {output}")
    return {"checkpoint": output, "before": before, "after": after, "delta_bytes": delta, "widths": widths}


def cmd_sweep(config: dict, checkpoint, grid=None, output=None) -> dict:
    """Evaluate a checkpoint over a width grid; writes the curve CSV and prints AUC."""
    ckpt = load_checkpoint(checkpoint)
    test_set = load_split(config, "test", ckpt.metadata.get("dataset"))
    grid = list(grid) if grid else default_sweep_grid(config["alpha_min"], 1.0, config["sweep_step"])

    curve = width_sweep(ckpt.model, test_set, grid)
    output = Path(output) if output else _output_dir(config) / CURVE_FILE
    output.parent.mkdir(parents=True, exist_ok=True)
    curve.to_csv(output)
    summary = curve_summary(curve)

    print(f"📈 Swept {len(grid)} widths of {ckpt.model.kind} on {len(test_set)} test images")
    print(f"AUC={summary['auc']:.6f}")
    print(f"📉 max step drop {summary['max_step_drop']:.4f}")
    print(f"💾 Curve saved to: {output}")
    return {"curve": curve, "curve_path": output, **summary}


def cmd_eval(config: dict, checkpoint, alphas) -> dict:
    """Accuracy of a checkpoint at each requested width-factor."""
    ckpt = load_checkpoint(checkpoint)
    test_set = load_split(config, "test", ckpt.metadata.get("dataset"))
    results = {}
    for alpha in alphas:
        used = resolve_alpha(ckpt.model, alpha)
        results[alpha] = evaluate(ckpt.model, test_set, alpha)
        note = f" (BN slot {used:g})" if used != alpha else ""
        print(f"🎯 alpha={alpha:g}{note}: accuracy {results[alpha]:.4f}")
    return results


def cmd_stats(config: dict) -> dict:
    """Varying-activation-statistics experiment for shared BN, switchable BN and AWN."""
    train_set = load_split(config, "train")
    test_set = load_split(config, "test")
    train_config = to_train_config({**config, "widths_mode": "fixed"})
    out = _output_dir(config)

    print(f"🔬 Tracking BN statistics on {config['dataset']} at widths {list(train_config.widths)}")
    result = run_varying_stats_experiment(
        train_set, test_set, train_config, out,
        probe_size=config["probe_size"], base_channels=config["base_channels"],
    )
    for kind, report in result.reports.items():
        print(f"📊 {kind:<20} divergence {report.summary:.6g}")
    print(f"{'✅' if result.passed else '❌'} report written to: {out}")
    return {"result": result, "output_dir": out}


def cmd_compare(config: dict) -> dict:
    """
    Multi-width suitability: triangular vs standard convolution, both trained
    at full width only and swept over [alpha_min, 1].
    """
    train_set = load_split(config, "train")
    test_set = load_split(config, "test")
    train_config = to_train_config({**config, "widths_mode": "fixed", "widths": [1.0]})
    grid = default_sweep_grid(config["alpha_min"], 1.0, config["sweep_step"])
    out = _output_dir(config)
    multiplier = config["width_multiplier"] or 1.0

    rows = []
    for kind in ("awn", "standard_shared_bn"):
        model = build_model(config, train_set, kind=kind, width_multiplier=multiplier)
        print(f"🚀 Training {kind} at full width")
        train(model, train_set, train_config)
        curve = width_sweep(model, test_set, grid)
        curve.to_csv(out / f"curve_{kind}.csv")
        rows.append({"variant": kind, **curve_summary(curve)})

    table = pd.DataFrame(rows)
    tri_auc, std_auc = table["auc"].tolist()
    improvement = relative_improvement(tri_auc, std_auc)
    table["relative_improvement"] = [improvement, 0.0]
    table.to_csv(out / COMPARISON_FILE, index=False, float_format="%.6f")

    print("\n📊 MULTI-WIDTH SUITABILITY:")
    print("=" * 50)
    print(f"triangular AUC={tri_auc:.6f}")
    print(f"standard   AUC={std_auc:.6f}")
    print(f"relative improvement {100 * improvement:.1f}%")
    return {"table": table, "auc_triangular": tri_auc, "auc_standard": std_auc,
            "relative_improvement": improvement}
