"""
Tests for accuracy evaluation, width sweeps and the trade-off AUC.
"""

import numpy as np
import pytest

from conftest import make_dataset
from src.analysis.evaluation import (
    TradeoffCurve,
    auc,
    curve_summary,
    default_sweep_grid,
    evaluate,
    max_step_drop,
    relative_improvement,
    resolve_alpha,
    width_sweep,
)
from src.models.lenet import ModelVariant, build_lenet3c1l
from src.training.optim import TrainConfig
from src.training.trainer import train_fixed_widths
from src.utils.datasets import default_preprocess
from src.utils.errors import ArgumentError, DataFormatError


def _piecewise_integral(alphas, accuracies, samples_per_segment=7):
    """Independent integrator: Simpson's rule per segment over the linear interpolant."""
    total = 0.0
    for (a0, y0), (a1, y1) in zip(zip(alphas, accuracies), zip(alphas[1:], accuracies[1:])):
        xs = np.linspace(a0, a1, samples_per_segment)
        ys = np.interp(xs, [a0, a1], [y0, y1])
        h = (a1 - a0) / (samples_per_segment - 1)
        total += h / 3 * (ys[0] + ys[-1] + 4 * ys[1:-1:2].sum() + 2 * ys[2:-1:2].sum())
    return total / (alphas[-1] - alphas[0])


class TestTradeoffCurve:
    def test_needs_two_points(self):
        with pytest.raises(ArgumentError):
            TradeoffCurve((1.0,), (0.5,))

    def test_alphas_strictly_ascending(self):
        with pytest.raises(ArgumentError):
            TradeoffCurve((0.5, 0.5), (0.1, 0.2))

    def test_accuracy_range(self):
        with pytest.raises(ArgumentError):
            TradeoffCurve((0.5, 1.0), (0.1, 1.2))

    def test_csv(self, tmp_path):
        curve = TradeoffCurve((0.25, 0.5, 1.0), (0.1, 0.55, 0.9))
        path = tmp_path / "curve.csv"
        curve.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "alpha,accuracy"
        assert lines[1] == "0.250000,0.100000"
        assert TradeoffCurve.from_csv(path) == curve

    def test_csv_bad_header(self, tmp_path):
        path = tmp_path / "curve.csv"
        path.write_text("width,acc\n0.5,0.1\n1.0,0.2\n")
        with pytest.raises(DataFormatError):
            TradeoffCurve.from_csv(path)


class TestAuc:
    def test_constant(self):
        assert auc(TradeoffCurve((0.25, 0.5, 1.0), (0.9, 0.9, 0.9))) == pytest.approx(0.9)

    def test_linear_ramp(self):
        assert auc(TradeoffCurve((0.25, 1.0), (0.0, 1.0))) == pytest.approx(0.5)

    def test_subdivision_invariant(self):
        coarse = TradeoffCurve((0.25, 0.5, 1.0), (0.2, 0.6, 0.8))
        fine = TradeoffCurve((0.25, 0.375, 0.5, 0.75, 1.0), (0.2, 0.4, 0.6, 0.7, 0.8))
        assert auc(fine) == pytest.approx(auc(coarse), abs=1e-12)

    def test_matches_independent_integrator(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            n = int(rng.integers(2, 12))
            alphas = np.sort(rng.choice(np.arange(1, 1001), size=n, replace=False)) / 1000.0
            accuracies = rng.random(n)
            curve = TradeoffCurve(tuple(alphas), tuple(accuracies))
            assert abs(auc(curve) - _piecewise_integral(alphas, accuracies)) < 1e-12

    def test_step_drop(self):
        curve = TradeoffCurve((0.25, 0.5, 0.75, 1.0), (0.3, 0.8, 0.85, 0.84))
        assert max_step_drop(curve) == pytest.approx(0.5)
        assert max_step_drop(TradeoffCurve((0.5, 1.0), (0.9, 0.4))) == 0.0

    def test_summary(self):
        summary = curve_summary(TradeoffCurve((0.25, 1.0), (0.2, 0.8)))
        assert summary["accuracy_at_min"] == 0.2 and summary["accuracy_at_max"] == 0.8
        assert summary["auc"] == pytest.approx(0.5)

    def test_relative_improvement(self):
        assert relative_improvement(0.6, 0.4) == pytest.approx(0.5)
        assert relative_improvement(0.0, 0.0) == 0.0


class TestSweepGrid:
    def test_default_has_31_points(self):
        grid = default_sweep_grid()
        assert len(grid) == 31
        assert grid[0] == 0.25 and grid[-1] == 1.0
        assert grid[1] == pytest.approx(0.275)

    def test_custom_range(self):
        assert default_sweep_grid(0.5, 1.0, 0.25) == [0.5, 0.75, 1.0]


class TestEvaluate:
    def _model(self, kind="awn", widths=None):
        return build_lenet3c1l(ModelVariant(kind, base_channels=4), 1, 10, trained_widths=widths,
                               input_size=12, seed=2)

    def test_matches_manual_argmax(self, tiny_dataset):
        model = self._model()
        images = default_preprocess("mnist").normalize(tiny_dataset.images)
        expected = np.mean(model.forward(images, 0.5).argmax(axis=1) == tiny_dataset.labels)
        assert evaluate(model, tiny_dataset, 0.5, batch_size=7) == pytest.approx(expected)

    def test_empty_dataset(self):
        with pytest.raises(ArgumentError):
            evaluate(self._model(), None, 1.0)

    def test_equal_active_counts_equal_accuracy(self, tiny_dataset):
        model = self._model()
        # 6 channels: 0.5 and 0.45 both activate 3
        assert evaluate(model, tiny_dataset, 0.5) == evaluate(model, tiny_dataset, 0.45)

    def test_switchable_next_larger(self):
        model = self._model("snet", [0.25, 0.5, 1.0])
        assert resolve_alpha(model, 0.3) == 0.5
        assert resolve_alpha(self._model(), 0.3) == 0.3

    def test_snet_curve_steps_only_at_trained_widths(self, tiny_dataset):
        model = self._model("snet", [0.5, 1.0])
        curve = width_sweep(model, tiny_dataset, [0.3, 0.4, 0.5, 0.6, 0.8, 1.0])
        acc = curve.accuracies
        assert acc[0] == acc[1] == acc[2]
        assert acc[3] == acc[4] == acc[5]

    def test_sweep_order_independent(self, tiny_dataset):
        model = self._model()
        forward = width_sweep(model, tiny_dataset, [0.25, 0.5, 0.75, 1.0])
        backward = [evaluate(model, tiny_dataset, a) for a in [1.0, 0.75, 0.5, 0.25]]
        assert list(forward.accuracies) == backward[::-1]

    def test_learned_model_scores_above_chance(self):
        data = make_dataset(n=100, size=12, seed=7)
        model = self._model()
        train_fixed_widths(model, data, TrainConfig(batch_size=10, lr0=0.1, epochs=8, widths=(1.0,), seed=1))
        assert evaluate(model, data, 1.0) > 0.3
