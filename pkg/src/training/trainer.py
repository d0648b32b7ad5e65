"""
Training regimes for width-conditioned models.

- train_fixed_widths: unweighted loss sum over a fixed width list per iteration
- train_random_sample: alpha_min, alpha_max and (n − 2) uniform draws per iteration
- calibrate_bn: post-training BN statistics for a new set of widths (usnet)
"""

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from src.engine.layers import SwitchableBatchNorm
from src.engine.tensor import softmax_cross_entropy
from src.engine.widths import check_alpha
from src.training.optim import SgdState, TrainConfig, lr_at, sgd_step
from src.utils.datasets import augment_crop_flip, batch_iter, default_preprocess, num_batches
from src.utils.errors import ArgumentError, VariantError, WidthError

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ["epoch", "width", "loss", "lr"]
RANDOM_WIDTH_LABEL = "random"
FIXED_WIDTH_VARIANTS = ("snet", "standard_shared_bn")


@dataclass
class TrainResult:
    model: object
    history: pd.DataFrame
    sgd_state: SgdState


def select_inference_width(trained_widths, alpha: float) -> float:
    """Smallest trained width >= alpha (the next-larger rule)."""
    alpha = check_alpha(alpha)
    widths = sorted(float(w) for w in trained_widths)
    if not widths or widths[-1] != 1.0:
        raise WidthError(f"trained widths must be non-empty and end at 1.0: {widths}")
    for w in widths:
        if w >= alpha - 1e-12:
            return w
    return widths[-1]


def _bn_slot(model, alpha: float):
    """BN slot for a training pass: exact for snet, next-larger for usnet, none otherwise."""
    if model.kind == "snet":
        return model.blocks[0].bn.index_of(alpha)
    if model.kind == "usnet":
        return model.blocks[0].bn.index_of(select_inference_width(model.trained_widths, alpha))
    return None


def _width_label(alpha: float) -> str:
    return f"{alpha:g}"


def _run_epochs(model, dataset, config: TrainConfig, plan_widths, preprocess=None,
                sgd_state: SgdState = None, on_epoch_end=None) -> TrainResult:
    """
    Shared loop. ``plan_widths(rng)`` returns the (label, alpha) passes of one iteration.
    """
    preprocess = preprocess or default_preprocess(dataset.name)
    sgd_state = sgd_state or SgdState()
    shuffle_seq, augment_seq, width_seq = np.random.SeedSequence(config.seed).spawn(3)
    shuffle_seeds = shuffle_seq.generate_state(config.epochs)
    augment_rng = np.random.default_rng(augment_seq)
    width_rng = np.random.default_rng(width_seq)

    # crop/flip only where the preprocessing asks for it, and never outside the train split
    augment = config.augment and preprocess.augmentation == "crop4_flip" and dataset.split == "train"
    iters = num_batches(dataset, config.batch_size)
    if config.max_batches:
        iters = min(iters, config.max_batches)
    masked = model.masked_layers()

    rows = []
    for epoch in range(config.epochs):
        losses = {}
        for it, batch in enumerate(batch_iter(dataset, config.batch_size, shuffle=True,
                                              seed=int(shuffle_seeds[epoch]))):
            if it >= iters:
                break
            if augment:
                batch = augment_crop_flip(batch, augment_rng)
            images = preprocess.normalize(batch.images)

            total = None
            for label, alpha in plan_widths(width_rng):
                logits = model.forward(images, alpha, "train", bn_index=_bn_slot(model, alpha))
                loss, d_logits = softmax_cross_entropy(logits, batch.labels)
                grads = model.backward(d_logits)
                losses.setdefault(label, []).append(loss)
                if total is None:
                    total = grads
                else:
                    for name, g in grads.items():
                        total[name] += g

            lr = lr_at(config, epoch, it, iters)
            sgd_step(model.parameters(), total, sgd_state, lr, config.momentum, config.weight_decay, masked)

        lr = lr_at(config, epoch, 0, iters)
        for label, values in losses.items():
            mean_loss = float(np.mean(values))
            rows.append({"epoch": epoch, "width": label, "loss": mean_loss, "lr": lr})
            logger.info(f"epoch={epoch} width={label} loss={mean_loss:.4f} lr={lr:.6g}")
        if on_epoch_end is not None:
            on_epoch_end(epoch, model)

    return TrainResult(model, pd.DataFrame(rows, columns=HISTORY_COLUMNS), sgd_state)


def train_fixed_widths(model, dataset, config: TrainConfig, preprocess=None, sgd_state=None,
                       on_epoch_end=None) -> TrainResult:
    """Every iteration trains each width of ``config.widths`` (descending) and steps once."""
    if not config.widths:
        raise WidthError("fixed-width training needs at least one width")
    widths = [check_alpha(w) for w in config.widths]
    if model.kind == "snet":
        missing = [w for w in widths if not any(abs(w - t) < 1e-9 for t in model.trained_widths)]
        if missing:
            raise WidthError(f"widths {missing} have no switchable BN slot in {model.trained_widths}")
    passes = [(_width_label(w), w) for w in widths]
    logger.info(f"Training {model.kind} at fixed widths {widths} for {config.epochs} epochs")
    return _run_epochs(model, dataset, config, lambda rng: passes, preprocess, sgd_state, on_epoch_end)


def sample_widths(rng: np.random.Generator, n: int, alpha_min: float, alpha_max: float) -> list:
    """alpha_max, (n − 2) uniform draws in descending order, alpha_min."""
    draws = sorted(rng.uniform(alpha_min, alpha_max, size=n - 2).tolist(), reverse=True)
    return [alpha_max] + draws + [alpha_min]


def train_random_sample(model, dataset, config: TrainConfig, preprocess=None, sgd_state=None,
                        on_epoch_end=None) -> TrainResult:
    """Random width sampling; loss rows are kept per endpoint plus one for the draws."""
    if model.kind not in ("awn", "usnet"):
        raise VariantError(f"random width sampling supports awn and usnet, not {model.kind!r}")
    alpha_min, alpha_max = check_alpha(config.alpha_min), check_alpha(config.alpha_max)
    if alpha_min >= alpha_max:
        raise WidthError(f"alpha_min {alpha_min} must be below alpha_max {alpha_max}")
    if config.n_samples < 2:
        raise ArgumentError(f"n_samples must be >= 2, got {config.n_samples}")

    def plan(rng):
        alphas = sample_widths(rng, config.n_samples, alpha_min, alpha_max)
        labels = [_width_label(alpha_max)] + [RANDOM_WIDTH_LABEL] * (config.n_samples - 2) + [_width_label(alpha_min)]
        return list(zip(labels, alphas))

    logger.info(f"Training {model.kind} with {config.n_samples} sampled widths in "
                f"[{alpha_min}, {alpha_max}] for {config.epochs} epochs")
    return _run_epochs(model, dataset, config, plan, preprocess, sgd_state, on_epoch_end)


def train(model, dataset, config: TrainConfig, **kwargs) -> TrainResult:
    """awn and usnet follow ``config.widths_mode``; snet and standard_shared_bn always train at fixed widths."""
    if config.widths_mode == "random" and model.kind not in FIXED_WIDTH_VARIANTS:
        return train_random_sample(model, dataset, config, **kwargs)
    return train_fixed_widths(model, dataset, config, **kwargs)


def calibrate_bn(model, dataset, widths, passes: int = 1, batch_size: int = 128, alpha_min: float = 0.25,
                 seed: int = 0, preprocess=None):
    """
    Replace the model's BN slots with one per entry of ``widths`` and re-estimate statistics.

    Each new slot copies gamma/beta from the old slot the next-larger rule picks,
    then accumulates running statistics as an exact cumulative average over
    ``passes`` seeded epochs. Parameters are never updated.
    """
    if model.kind != "usnet":
        raise VariantError(f"BN calibration applies to usnet models, not {model.kind!r}")
    if passes < 1:
        raise ArgumentError(f"passes must be >= 1, got {passes}")
    widths = sorted({check_alpha(w) for w in widths})
    outside = [w for w in widths if w < alpha_min - 1e-12]
    if outside:
        raise WidthError(f"calibration widths {outside} lie below alpha_min {alpha_min}")
    if widths[-1] != 1.0:
        raise WidthError(f"calibration widths must include 1.0: {widths}")

    old_widths = list(model.trained_widths)
    new_states = []
    for block in model.blocks:
        states = []
        for w in widths:
            source = block.bn.states[block.bn.index_of(select_inference_width(old_widths, w))]
            state = source.copy()
            state.reset_running_stats()
            states.append(state)
        new_states.append(states)
    model.set_switchable_bn(widths, new_states)

    preprocess = preprocess or default_preprocess(dataset.name)
    pass_seeds = np.random.SeedSequence(seed).generate_state(passes)
    for index, w in enumerate(widths):
        seen = 0
        for p in range(passes):
            for batch in batch_iter(dataset, batch_size, shuffle=True, seed=int(pass_seeds[p])):
                images = preprocess.normalize(batch.images)
                model.forward(images, w, "train", bn_index=index, keep_cache=False,
                              bn_momentum=1.0 / (seen + 1))
                seen += 1
        logger.info(f"Calibrated BN for width {w:g} over {seen} batches")
    return model


def bn_storage_report(model) -> dict:
    """Stored BN scalars and bytes, and their share of all stored scalars."""
    bn_scalars = model.stored_bn_scalars()
    total = model.total_scalars()
    itemsize = np.dtype(model.dtype).itemsize
    slots = len(model.blocks[0].bn.states) if isinstance(model.blocks[0].bn, SwitchableBatchNorm) else 1
    return {
        "bn_slots": slots,
        "bn_scalars": bn_scalars,
        "bn_bytes": bn_scalars * itemsize,
        "total_scalars": total,
        "total_bytes": total * itemsize,
        "bn_share_pct": 100.0 * bn_scalars / total,
    }
