"""
Width sweeps, accuracy and the width-accuracy trade-off AUC.
"""

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from config.settings import DEFAULT_ALPHA_MAX, DEFAULT_ALPHA_MIN, SWEEP_STEP
from src.engine.widths import check_alpha
from src.training.trainer import select_inference_width
from src.utils.datasets import batch_iter, default_preprocess
from src.utils.errors import ArgumentError, DataFormatError

logger = logging.getLogger(__name__)

EVAL_BATCH_SIZE = 500


@dataclass(frozen=True)
class TradeoffCurve:
    """(alpha, accuracy) points, alpha strictly ascending."""

    alphas: tuple
    accuracies: tuple

    def __post_init__(self):
        alphas = tuple(float(a) for a in self.alphas)
        accuracies = tuple(float(a) for a in self.accuracies)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "accuracies", accuracies)
        if len(alphas) != len(accuracies):
            raise ArgumentError(f"{len(alphas)} alphas for {len(accuracies)} accuracies")
        if len(alphas) < 2:
            raise ArgumentError(f"a trade-off curve needs at least 2 points, got {len(alphas)}")
        if any(a >= b for a, b in zip(alphas, alphas[1:])):
            raise ArgumentError(f"curve alphas must be strictly ascending: {alphas}")
        if any(not (0.0 <= acc <= 1.0) for acc in accuracies):
            raise ArgumentError(f"accuracies must lie in [0, 1]: {accuracies}")

    @property
    def points(self):
        return list(zip(self.alphas, self.accuracies))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"alpha": self.alphas, "accuracy": self.accuracies})

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False, float_format="%.6f")

    @classmethod
    def from_csv(cls, path) -> "TradeoffCurve":
        df = pd.read_csv(path)
        if list(df.columns) != ["alpha", "accuracy"]:
            raise DataFormatError(f"{path}: expected header alpha,accuracy, got {','.join(df.columns)}")
        return cls(tuple(df["alpha"]), tuple(df["accuracy"]))


def default_sweep_grid(alpha_min: float = DEFAULT_ALPHA_MIN, alpha_max: float = DEFAULT_ALPHA_MAX,
                       step: float = SWEEP_STEP) -> list:
    """Evenly spaced alphas from alpha_min to alpha_max inclusive (31 points by default)."""
    count = int(round((alpha_max - alpha_min) / step)) + 1
    return [round(a, 10) for a in np.linspace(alpha_min, alpha_max, count)]


def resolve_alpha(model, alpha: float) -> float:
    """Switchable models evaluate at the next-larger trained width."""
    alpha = check_alpha(alpha)
    if model.variant.switchable:
        return select_inference_width(model.trained_widths, alpha)
    return alpha


def predict(model, images, alpha: float) -> np.ndarray:
    alpha = resolve_alpha(model, alpha)
    logits = model.forward(images, alpha, "eval", keep_cache=False)
    return logits.argmax(axis=1)


def evaluate(model, dataset, alpha: float, preprocess=None, batch_size: int = EVAL_BATCH_SIZE) -> float:
    """Eval-mode accuracy over the whole dataset at ``alpha``."""
    if dataset is None or len(dataset) == 0:
        raise ArgumentError("cannot evaluate on an empty dataset")
    preprocess = preprocess or default_preprocess(dataset.name)
    correct = 0
    for batch in batch_iter(dataset, batch_size):
        correct += int((predict(model, preprocess.normalize(batch.images), alpha) == batch.labels).sum())
    return correct / len(dataset)


def width_sweep(model, dataset, alphas=None, preprocess=None) -> TradeoffCurve:
    alphas = default_sweep_grid() if alphas is None else [float(a) for a in alphas]
    accuracies = []
    for alpha in alphas:
        acc = evaluate(model, dataset, alpha, preprocess)
        logger.debug(f"alpha={alpha:.3f} accuracy={acc:.4f}")
        accuracies.append(acc)
    return TradeoffCurve(tuple(alphas), tuple(accuracies))


def auc(curve: TradeoffCurve) -> float:
    """Trapezoidal area under the curve divided by the alpha range."""
    a = np.asarray(curve.alphas, dtype=np.float64)
    y = np.asarray(curve.accuracies, dtype=np.float64)
    area = float(np.sum(np.diff(a) * (y[1:] + y[:-1]) / 2.0))
    return area / (a[-1] - a[0])


def max_step_drop(curve: TradeoffCurve) -> float:
    """Largest accuracy decrease between consecutive alphas, read from wide to narrow."""
    y = np.asarray(curve.accuracies, dtype=np.float64)
    drops = y[1:] - y[:-1]
    return float(max(drops.max(), 0.0))


def relative_improvement(value: float, baseline: float) -> float:
    if baseline == 0:
        return float("inf") if value > 0 else 0.0
    return (value - baseline) / baseline


def curve_summary(curve: TradeoffCurve) -> dict:
    return {
        "auc": auc(curve),
        "max_step_drop": max_step_drop(curve),
        "accuracy_at_min": curve.accuracies[0],
        "accuracy_at_max": curve.accuracies[-1],
    }
