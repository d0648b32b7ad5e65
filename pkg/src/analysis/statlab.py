"""
Activation-statistics laboratory.

Tracks per-width batch statistics at every BN site, compares them with the
running statistics, and scores how far the widths drift apart. A model whose
pre-BN activations depend on the width (dense convs with one shared BN) shows
a large drift; triangular convs show none.
"""

import itertools
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from config.settings import ACCURACY_TABLE_FILE, BN_EPS, STATS_SUMMARY_FILE
from src.analysis.evaluation import evaluate
from src.engine.layers import SwitchableBatchNorm
from src.engine.widths import active_count, check_alpha
from src.models.lenet import ModelVariant, build_lenet3c1l
from src.training.optim import TrainConfig
from src.training.trainer import select_inference_width, train_fixed_widths
from src.utils.datasets import default_preprocess, subset
from src.utils.errors import ArgumentError, WidthError

logger = logging.getLogger(__name__)

STATS_VARIANTS = ("standard_shared_bn", "snet", "awn")
DIVERGENCE_COLUMNS = ["site", "width_a", "width_b", "mean_shift", "var_ratio", "epoch"]
PROBE_SIZE = 256


@dataclass
class StatRecord:
    epoch: int
    width: float
    site: int
    batch_mean: np.ndarray  # NaN beyond the active channels
    batch_var: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray


@dataclass
class StatTrace:
    records: list = field(default_factory=list)

    def add(self, epoch, width, site, batch_mean, batch_var, running_mean, running_var):
        channels = len(running_mean)
        mean = np.full(channels, np.nan)
        var = np.full(channels, np.nan)
        mean[:len(batch_mean)] = batch_mean
        var[:len(batch_var)] = batch_var
        self.records.append(StatRecord(int(epoch), float(width), int(site), mean, var,
                                       np.asarray(running_mean, dtype=np.float64).copy(),
                                       np.asarray(running_var, dtype=np.float64).copy()))

    def extend(self, other: "StatTrace"):
        self.records.extend(other.records)

    @property
    def widths(self) -> list:
        return sorted({r.width for r in self.records})

    @property
    def epochs(self) -> list:
        return sorted({r.epoch for r in self.records})

    @property
    def sites(self) -> list:
        return sorted({r.site for r in self.records})

    def get(self, epoch: int, width: float, site: int) -> StatRecord:
        for r in self.records:
            if r.epoch == epoch and r.site == site and abs(r.width - width) < 1e-9:
                return r
        raise WidthError(f"width {width} not tracked at epoch {epoch}, site {site}")

    def to_frame(self) -> pd.DataFrame:
        """Long format: one row per (epoch, width, site, channel)."""
        rows = []
        for r in self.records:
            for c in range(len(r.running_mean)):
                if np.isnan(r.batch_mean[c]):
                    continue
                rows.append({
                    "epoch": r.epoch, "width": r.width, "site": r.site, "channel": c,
                    "batch_mean": r.batch_mean[c], "batch_var": r.batch_var[c],
                    "running_mean": r.running_mean[c], "running_var": r.running_var[c],
                })
        return pd.DataFrame(rows)


def _stats_slot(model, alpha: float):
    if model.kind == "snet":
        return model.blocks[0].bn.index_of(alpha)
    if model.kind == "usnet":
        return model.blocks[0].bn.index_of(select_inference_width(model.trained_widths, alpha))
    return None


def track_stats(model, images, widths, epoch: int = 0) -> StatTrace:
    """Observation passes at each width; nothing in the model is updated."""
    if not widths:
        raise ArgumentError("track_stats needs at least one width")
    trace = StatTrace()
    for width in widths:
        width = check_alpha(width)
        slot = _stats_slot(model, width)
        model.forward(images, width, "observe", bn_index=slot, keep_cache=False)
        for site, (block, (mean, var)) in enumerate(zip(model.blocks, model.last_bn_stats)):
            state = block.bn.states[slot] if isinstance(block.bn, SwitchableBatchNorm) else block.bn
            trace.add(epoch, width, site, mean, var, state.running_mean, state.running_var)
    return trace


def divergence(trace: StatTrace, width_a: float, width_b: float, epoch: int = None) -> dict:
    """
    Per-site drift between two widths: ``{site: (mean_shift, var_ratio)}``.

    mean_shift is the mean over channels active at both widths of
    |mean_a − mean_b| / sqrt(running_var + eps), using the wider width's
    running variance. var_ratio is the mean |ln((var_a + eps) / (var_b + eps))|.
    """
    epoch = trace.epochs[-1] if epoch is None else epoch
    result = {}
    for site in trace.sites:
        a = trace.get(epoch, width_a, site)
        b = trace.get(epoch, width_b, site)
        channels = len(a.running_mean)
        k = active_count(min(width_a, width_b), channels)
        wide = a if width_a >= width_b else b
        scale = np.sqrt(wide.running_var[:k] + BN_EPS)
        mean_shift = float(np.mean(np.abs(a.batch_mean[:k] - b.batch_mean[:k]) / scale))
        var_ratio = float(np.mean(np.abs(np.log((a.batch_var[:k] + BN_EPS) / (b.batch_var[:k] + BN_EPS)))))
        result[site] = (mean_shift, var_ratio)
    return result


@dataclass
class DivergenceReport:
    """Pairwise drift matrices per site for one epoch."""

    widths: list
    mean_shift: dict  # site -> (W, W) array
    var_ratio: dict
    epoch: int

    @property
    def summary(self) -> float:
        return float(max(m.max() for m in self.mean_shift.values()))

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for site, matrix in self.mean_shift.items():
            for i, j in itertools.combinations(range(len(self.widths)), 2):
                rows.append({
                    "site": site, "width_a": self.widths[i], "width_b": self.widths[j],
                    "mean_shift": matrix[i, j], "var_ratio": self.var_ratio[site][i, j], "epoch": self.epoch,
                })
        return pd.DataFrame(rows, columns=DIVERGENCE_COLUMNS)


def divergence_report(trace: StatTrace, epoch: int = None) -> DivergenceReport:
    epoch = trace.epochs[-1] if epoch is None else epoch
    widths = trace.widths
    n = len(widths)
    mean_shift = {site: np.zeros((n, n)) for site in trace.sites}
    var_ratio = {site: np.zeros((n, n)) for site in trace.sites}
    for i, j in itertools.combinations(range(n), 2):
        for site, (shift, ratio) in divergence(trace, widths[i], widths[j], epoch).items():
            mean_shift[site][i, j] = mean_shift[site][j, i] = shift
            var_ratio[site][i, j] = var_ratio[site][j, i] = ratio
    return DivergenceReport(widths, mean_shift, var_ratio, epoch)


def divergence_table(trace: StatTrace) -> pd.DataFrame:
    """Divergence rows for every traced epoch."""
    frames = [divergence_report(trace, epoch).to_frame() for epoch in trace.epochs]
    return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=DIVERGENCE_COLUMNS)


@dataclass
class StatsExperimentResult:
    traces: dict
    reports: dict
    accuracy: pd.DataFrame
    passed: bool


def _probe_images(dataset, size: int, seed: int):
    probe = subset(dataset, size, seed)
    return default_preprocess(dataset.name).normalize(probe.images)


def run_varying_stats_experiment(train_set, test_set, config: TrainConfig, output_dir,
                                 variants=STATS_VARIANTS, probe_size: int = PROBE_SIZE,
                                 base_channels: int = 32) -> StatsExperimentResult:
    """
    Train each variant at ``config.widths``, trace BN statistics every epoch on
    a seeded probe batch, and write per-variant CSVs plus a summary report.

    All variants share the channel count (the AWN here is not widened).
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    widths = sorted(config.widths)
    probe = _probe_images(test_set, probe_size, config.seed)

    traces, reports, accuracy_rows = {}, {}, []
    for kind in variants:
        variant = ModelVariant(kind, width_multiplier=1.0, base_channels=base_channels)
        model = build_lenet3c1l(
            variant, train_set.images.shape[1], train_set.num_classes,
            trained_widths=widths if variant.switchable else None,
            input_size=train_set.images.shape[2], seed=config.seed,
        )
        trace = StatTrace()
        train_fixed_widths(
            model, train_set, config,
            on_epoch_end=lambda epoch, m: trace.extend(track_stats(m, probe, widths, epoch)),
        )
        traces[kind] = trace
        reports[kind] = divergence_report(trace)

        trace.to_frame().to_csv(output_dir / f"channel_stats_{kind}.csv", index=False)
        divergence_table(trace).to_csv(output_dir / f"divergence_{kind}.csv", index=False)
        for w in widths:
            accuracy_rows.append({"variant": kind, "width": w, "accuracy": evaluate(model, test_set, w)})
        logger.info(f"{kind}: summary divergence {reports[kind].summary:.6g}")

    accuracy = pd.DataFrame(accuracy_rows, columns=["variant", "width", "accuracy"])
    accuracy.to_csv(output_dir / ACCURACY_TABLE_FILE, index=False, float_format="%.6f")

    passed = True
    lines = ["Varying activation statistics", "=" * 40]
    for kind, report in reports.items():
        lines.append(f"{kind:<20} summary divergence {report.summary:.6g}")
    lines.append("")
    lines.append(accuracy.pivot(index="width", columns="variant", values="accuracy").to_string())
    lines.append("")
    if "awn" in reports and "standard_shared_bn" in reports:
        awn_div = reports["awn"].summary
        shared_div = reports["standard_shared_bn"].summary
        passed = awn_div < shared_div
        verdict = "PASS" if passed else "FAIL"
        lines.append(f"{verdict}: awn divergence {awn_div:.6g} < standard_shared_bn divergence {shared_div:.6g}")
    (output_dir / STATS_SUMMARY_FILE).write_text("\n".join(lines) + "\n")

    return StatsExperimentResult(traces, reports, accuracy, passed)
