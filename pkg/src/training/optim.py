"""
SGD with momentum and weight decay, plus learning-rate schedules.
"""

from dataclasses import dataclass, field

import numpy as np

from src.utils.errors import ArgumentError, DimensionError

SCHEDULES = ("step", "linear")
WIDTH_MODES = ("fixed", "random")


@dataclass
class TrainConfig:
    """Optimizer, schedule and width-sampling settings for one training run."""

    batch_size: int = 128
    lr0: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 0.0
    epochs: int = 20
    schedule: str = "step"
    milestones: tuple = (0.5, 0.75)
    decay_factor: float = 0.1
    widths_mode: str = "fixed"
    widths: tuple = (1.0, 0.75, 0.5, 0.25)
    n_samples: int = 4
    alpha_min: float = 0.25
    alpha_max: float = 1.0
    seed: int = 0
    augment: bool = True  # off switch; datasets without crop4_flip are never augmented
    max_batches: int = 0  # 0 means every batch of the epoch

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1:
            raise ArgumentError(f"batch_size and epochs must be >= 1, got {self.batch_size}, {self.epochs}")
        if self.schedule not in SCHEDULES:
            raise ArgumentError(f"unknown schedule {self.schedule!r}; expected one of {SCHEDULES}")
        if self.widths_mode not in WIDTH_MODES:
            raise ArgumentError(f"unknown widths_mode {self.widths_mode!r}; expected one of {WIDTH_MODES}")
        if self.widths_mode == "random" and self.n_samples < 2:
            raise ArgumentError(f"random width sampling needs n_samples >= 2, got {self.n_samples}")
        self.widths = tuple(sorted((float(w) for w in self.widths), reverse=True))
        self.milestones = tuple(float(m) for m in self.milestones)


@dataclass
class SgdState:
    velocity: dict = field(default_factory=dict)


def sgd_step(params: dict, grads: dict, state: SgdState, lr: float, momentum: float = 0.9,
             weight_decay: float = 0.0, masked_layers=()):
    """
    In-place update: v <- momentum·v + grad + weight_decay·param; param <- param − lr·v.

    Masks of ``masked_layers`` are re-applied afterwards.
    """
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != p.shape:
            raise DimensionError(f"{name}: gradient shape {g.shape} does not match parameter {p.shape}")
        v = state.velocity.get(name)
        if v is None:
            v = state.velocity[name] = np.zeros_like(p)
        v *= momentum
        v += g
        if weight_decay:
            v += weight_decay * p
        p -= lr * v
    for layer in masked_layers:
        layer.apply_mask()


def lr_at(config: TrainConfig, epoch: int, iteration: int = 0, iters_per_epoch: int = 1) -> float:
    """Learning rate for ``iteration`` (within ``epoch``)."""
    if config.schedule == "linear":
        total = config.epochs * iters_per_epoch
        done = epoch * iters_per_epoch + iteration
        return config.lr0 * (1.0 - done / total)
    passed = sum(1 for m in config.milestones if epoch >= round(m * config.epochs))
    return config.lr0 * config.decay_factor ** passed
