"""
Tests for SGD updates and learning-rate schedules.
"""

import numpy as np
import pytest

from src.training.optim import SgdState, TrainConfig, lr_at, sgd_step
from src.utils.errors import ArgumentError, DimensionError


class TestSgdStep:
    def test_first_step_without_momentum_history(self):
        p = np.array([1.0, -2.0])
        sgd_step({"w": p}, {"w": np.array([0.5, 0.5])}, SgdState(), lr=0.1)
        np.testing.assert_allclose(p, [0.95, -2.05])

    def test_momentum_accumulates(self):
        p = np.array([0.0])
        state = SgdState()
        for _ in range(2):
            sgd_step({"w": p}, {"w": np.array([1.0])}, state, lr=1.0, momentum=0.9)
        np.testing.assert_allclose(state.velocity["w"], [1.9])
        np.testing.assert_allclose(p, [-2.9])

    def test_weight_decay_enters_velocity(self):
        p = np.array([2.0])
        state = SgdState()
        sgd_step({"w": p}, {"w": np.array([0.0])}, state, lr=0.5, momentum=0.0, weight_decay=0.1)
        np.testing.assert_allclose(p, [1.9])

    def test_missing_grad_is_skipped(self):
        p = np.array([1.0])
        sgd_step({"w": p}, {}, SgdState(), lr=1.0)
        assert p[0] == 1.0

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            sgd_step({"w": np.zeros(3)}, {"w": np.zeros(2)}, SgdState(), lr=0.1)


class TestSchedule:
    def test_step_schedule_examples(self):
        config = TrainConfig(lr0=0.01, epochs=20, schedule="step", milestones=(0.5, 0.75), decay_factor=0.1)
        assert lr_at(config, 0) == pytest.approx(0.01)
        assert lr_at(config, 9) == pytest.approx(0.01)
        assert lr_at(config, 10) == pytest.approx(0.001)
        assert lr_at(config, 14) == pytest.approx(0.001)
        assert lr_at(config, 15) == pytest.approx(0.0001)
        assert lr_at(config, 19) == pytest.approx(0.0001)

    def test_linear_schedule(self):
        config = TrainConfig(lr0=0.1, epochs=4, schedule="linear")
        assert lr_at(config, 0, 0, 10) == pytest.approx(0.1)
        assert lr_at(config, 2, 0, 10) == pytest.approx(0.05)
        assert lr_at(config, 3, 9, 10) == pytest.approx(0.1 / 40)

    def test_linear_is_decreasing(self):
        config = TrainConfig(lr0=0.1, epochs=3, schedule="linear")
        rates = [lr_at(config, e, i, 5) for e in range(3) for i in range(5)]
        assert all(a > b for a, b in zip(rates, rates[1:]))
        assert rates[-1] > 0


class TestTrainConfig:
    def test_widths_sorted_descending(self):
        assert TrainConfig(widths=(0.25, 1.0, 0.5)).widths == (1.0, 0.5, 0.25)

    @pytest.mark.parametrize("kwargs", [
        {"batch_size": 0},
        {"epochs": 0},
        {"schedule": "cosine"},
        {"widths_mode": "sometimes"},
        {"widths_mode": "random", "n_samples": 1},
    ])
    def test_rejects(self, kwargs):
        with pytest.raises(ArgumentError):
            TrainConfig(**kwargs)
