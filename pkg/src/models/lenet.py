"""
LeNet-3C1L in four variants.

Three blocks of (conv 5x5 pad 2 -> BN -> relu -> maxpool 2x2), then a dense
classifier over the active flattened features.

    awn                 triangular convs, one shared BN per site
    standard_shared_bn  dense convs, one shared BN per site
    snet                dense convs, switchable BN over the trained widths
    usnet               dense convs, switchable BN, calibrated after training
"""

import logging
from dataclasses import dataclass

import numpy as np

from config.settings import (
    AVAILABLE_VARIANTS,
    AWN_WIDTH_MULTIPLIER,
    BASE_CHANNELS,
    CONV_KERNEL_SIZE,
    CONV_PADDING,
    NUM_CONV_BLOCKS,
    POOL_STRIDE,
    POOL_WINDOW,
    SWITCHABLE_VARIANTS,
)
from src.engine.layers import (
    BatchNormState,
    Conv2dLayer,
    LinearLayer,
    SwitchableBatchNorm,
    TriangularConv2d,
    batchnorm_backward,
    batchnorm_forward,
    switchable_bn_forward,
)
from src.engine.tensor import (
    DEFAULT_DTYPE,
    flatten,
    flatten_backward,
    maxpool2d,
    maxpool2d_backward,
    relu,
    relu_backward,
)
from src.engine.widths import check_alpha
from src.utils.errors import ArgumentError, ModelStateError, VariantError, WidthError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelVariant:
    kind: str
    width_multiplier: float = None
    base_channels: int = BASE_CHANNELS

    def __post_init__(self):
        if self.kind not in AVAILABLE_VARIANTS:
            raise VariantError(f"unknown variant {self.kind!r}; available: {AVAILABLE_VARIANTS}")
        if self.width_multiplier is None:
            default = AWN_WIDTH_MULTIPLIER if self.kind == "awn" else 1.0
            object.__setattr__(self, "width_multiplier", default)
        if self.width_multiplier < 1.0:
            raise ArgumentError(f"width_multiplier must be >= 1, got {self.width_multiplier}")
        if self.base_channels < 1:
            raise ArgumentError(f"base_channels must be >= 1, got {self.base_channels}")

    @property
    def channels(self) -> int:
        return int(round(self.base_channels * self.width_multiplier))

    @property
    def switchable(self) -> bool:
        return self.kind in SWITCHABLE_VARIANTS

    @property
    def triangular(self) -> bool:
        return self.kind == "awn"


@dataclass(eq=False)
class ConvBlock:
    conv: Conv2dLayer
    bn: object  # BatchNormState or SwitchableBatchNorm


def pooled_size(size: int) -> int:
    return (size - POOL_WINDOW) // POOL_STRIDE + 1


class LeNet3C1L:
    """Width-conditioned LeNet-3C1L with explicit forward/backward passes."""

    def __init__(self, variant: ModelVariant, in_channels: int, num_classes: int, input_size: int = 28,
                 trained_widths=None, seed: int = 0, dtype=DEFAULT_DTYPE):
        if variant.switchable and not trained_widths:
            raise VariantError(f"variant {variant.kind!r} needs trained_widths")
        if in_channels < 1 or num_classes < 2:
            raise ArgumentError(f"need in_channels >= 1 and num_classes >= 2, got {in_channels}, {num_classes}")

        self.variant = variant
        self.in_channels = in_channels
        self.num_classes = num_classes
        self.input_size = input_size
        self.seed = seed
        self.dtype = dtype
        self.trained_widths = sorted(check_alpha(w) for w in trained_widths) if trained_widths else []
        if self.trained_widths and self.trained_widths[-1] != 1.0:
            raise WidthError(f"trained widths must include 1.0: {self.trained_widths}")

        channels = variant.channels
        conv_cls = TriangularConv2d if variant.triangular else Conv2dLayer
        seeds = np.random.SeedSequence(seed).generate_state(NUM_CONV_BLOCKS + 1)

        self.blocks = []
        size, c_in = input_size, in_channels
        for i in range(NUM_CONV_BLOCKS):
            conv = conv_cls(
                c_in, channels, CONV_KERNEL_SIZE, stride=1, pad=CONV_PADDING,
                input_scaled=(i > 0), seed=int(seeds[i]), dtype=dtype,
            )
            bn = (SwitchableBatchNorm.create(channels, self.trained_widths, dtype)
                  if variant.switchable else BatchNormState.create(channels, dtype))
            self.blocks.append(ConvBlock(conv, bn))
            size = pooled_size(size)
            if size < 1:
                raise ArgumentError(f"input size {input_size} too small for {NUM_CONV_BLOCKS} pooling stages")
            c_in = channels

        self.feature_area = size * size
        self.classifier = LinearLayer(
            channels * self.feature_area, num_classes, in_group=self.feature_area,
            output_scaled=False, seed=int(seeds[-1]), dtype=dtype,
        )
        self._cache = None
        self.last_pre_bn = []
        self.last_bn_stats = []
        logger.debug("built %s LeNet-3C1L: %d channels, %d classes, input %d",
                     variant.kind, channels, num_classes, input_size)

    @property
    def channels(self) -> int:
        return self.variant.channels

    @property
    def kind(self) -> str:
        return self.variant.kind

    # ------------------------------------------------------------------
    # Passes
    # ------------------------------------------------------------------

    def resolve_bn_index(self, alpha: float, bn_index=None):
        if not self.variant.switchable:
            return None
        if bn_index is not None:
            return bn_index
        return self.blocks[0].bn.index_of(alpha)

    def forward(self, images, alpha: float, mode: str = "eval", bn_index: int = None,
                keep_cache: bool = True, bn_momentum: float = None):
        """
        Logits (N, num_classes) at width-factor ``alpha``.

        Switchable variants use BN slot ``bn_index``; without one, ``alpha``
        must be a trained width.
        """
        alpha = check_alpha(alpha)
        bn_index = self.resolve_bn_index(alpha, bn_index)
        if images.ndim != 4 or images.shape[1] != self.in_channels:
            raise ArgumentError(f"expected (N, {self.in_channels}, H, W) images, got {images.shape}")

        x = images.astype(self.dtype, copy=False)
        caches, pre_bn, stats = [], [], []
        for block in self.blocks:
            x, conv_cache = block.conv.forward(x, alpha)
            pre_bn.append(x)
            k = x.shape[1]
            if bn_index is None:
                x, bn_cache = batchnorm_forward(x, block.bn, mode, k=k, momentum=bn_momentum)
            else:
                x, bn_cache = switchable_bn_forward(x, block.bn, bn_index, mode, k=k, momentum=bn_momentum)
            stats.append((bn_cache["batch_mean"], bn_cache["batch_var"]))
            x, relu_cache = relu(x)
            x, pool_cache = maxpool2d(x, POOL_WINDOW, POOL_STRIDE)
            caches.append((conv_cache, bn_cache, relu_cache, pool_cache))

        x, flat_cache = flatten(x)
        logits, fc_cache = self.classifier.forward(x, alpha)

        self.last_pre_bn = pre_bn
        self.last_bn_stats = stats
        self._cache = (caches, flat_cache, fc_cache, bn_index) if keep_cache else None
        return logits

    def backward(self, d_logits) -> dict:
        """Gradients keyed like ``parameters()``, for the most recent cached forward."""
        if self._cache is None:
            raise ModelStateError("backward called without a cached forward pass")
        caches, flat_cache, fc_cache, bn_index = self._cache
        self._cache = None

        grads = {}
        dx, fc_grads = self.classifier.backward(d_logits, fc_cache)
        for name, g in fc_grads.items():
            grads[f"classifier.{name}"] = g
        dx = flatten_backward(dx, flat_cache)

        for i in reversed(range(len(self.blocks))):
            conv_cache, bn_cache, relu_cache, pool_cache = caches[i]
            dx = maxpool2d_backward(dx, pool_cache)
            dx = relu_backward(dx, relu_cache)
            dx, bn_grads = batchnorm_backward(dx, bn_cache)
            for name, g in bn_grads.items():
                grads[self._bn_key(i, bn_index, name)] = g
            dx, conv_grads = self.blocks[i].conv.backward(dx, conv_cache)
            for name, g in conv_grads.items():
                grads[f"blocks.{i}.conv.{name}"] = g

        if bn_index is not None:
            # untouched BN slots get explicit zeros so grads mirror parameters()
            for key, p in self.parameters().items():
                grads.setdefault(key, np.zeros_like(p))
        return grads

    def _bn_key(self, block: int, bn_index, name: str) -> str:
        if bn_index is None:
            return f"blocks.{block}.bn.{name}"
        return f"blocks.{block}.bn.{bn_index}.{name}"

    # ------------------------------------------------------------------
    # Parameters and state
    # ------------------------------------------------------------------

    def _bn_states(self, block: ConvBlock):
        if isinstance(block.bn, SwitchableBatchNorm):
            return [(f".{j}", s) for j, s in enumerate(block.bn.states)]
        return [("", block.bn)]

    def parameters(self) -> dict:
        params = {}
        for i, block in enumerate(self.blocks):
            for name, p in block.conv.parameters().items():
                params[f"blocks.{i}.conv.{name}"] = p
            for suffix, state in self._bn_states(block):
                params[f"blocks.{i}.bn{suffix}.gamma"] = state.gamma
                params[f"blocks.{i}.bn{suffix}.beta"] = state.beta
        for name, p in self.classifier.parameters().items():
            params[f"classifier.{name}"] = p
        return params

    def buffers(self) -> dict:
        buffers = {}
        for i, block in enumerate(self.blocks):
            for suffix, state in self._bn_states(block):
                buffers[f"blocks.{i}.bn{suffix}.running_mean"] = state.running_mean
                buffers[f"blocks.{i}.bn{suffix}.running_var"] = state.running_var
        return buffers

    def state_dict(self) -> dict:
        return {name: t.copy() for name, t in {**self.parameters(), **self.buffers()}.items()}

    def load_state_dict(self, state: dict):
        targets = {**self.parameters(), **self.buffers()}
        missing = sorted(set(targets) - set(state))
        unexpected = sorted(set(state) - set(targets))
        if missing or unexpected:
            raise ModelStateError(f"state dict mismatch: missing {missing}, unexpected {unexpected}")
        for name, target in targets.items():
            if state[name].shape != target.shape:
                raise ModelStateError(f"{name}: shape {state[name].shape} does not match {target.shape}")
            target[...] = state[name]

    def set_switchable_bn(self, widths, states_per_block):
        """Install new switchable BN slots (one list of states per block)."""
        if not self.variant.switchable:
            raise VariantError(f"variant {self.kind!r} has no switchable BN")
        widths = sorted(float(w) for w in widths)
        for block, states in zip(self.blocks, states_per_block):
            block.bn = SwitchableBatchNorm(list(states), widths)
        self.trained_widths = widths

    def masked_layers(self) -> list:
        return [block.conv for block in self.blocks if block.conv.masked]

    def apply_masks(self):
        for layer in self.masked_layers():
            layer.apply_mask()

    def active_parameter_count(self, alpha: float = 1.0) -> int:
        """Trainable scalars the network touches at ``alpha`` (one BN slot)."""
        total = 0
        for block in self.blocks:
            k_out, _ = block.conv.widths_at(alpha)
            total += block.conv.active_parameter_count(alpha) + 2 * k_out
        return total + self.classifier.active_parameter_count(alpha)

    def stored_bn_scalars(self) -> int:
        """BN scalars held across all sites and slots (means, vars, gammas, betas)."""
        total = 0
        for block in self.blocks:
            total += sum(state.num_scalars for _, state in self._bn_states(block))
        return total

    def total_scalars(self) -> int:
        return int(sum(t.size for t in {**self.parameters(), **self.buffers()}.values()))

    def spatial_sizes(self) -> list:
        sizes, size = [], self.input_size
        for _ in self.blocks:
            size = pooled_size(size)
            sizes.append(size)
        return sizes


def build_lenet3c1l(variant: ModelVariant, in_channels: int, num_classes: int, trained_widths=None,
                    input_size: int = 28, seed: int = 0, dtype=DEFAULT_DTYPE) -> LeNet3C1L:
    if isinstance(variant, str):
        variant = ModelVariant(variant)
    return LeNet3C1L(variant, in_channels, num_classes, input_size, trained_widths, seed, dtype)


def forward(model: LeNet3C1L, images, alpha: float, mode: str = "eval", **kwargs):
    return model.forward(images, alpha, mode, **kwargs)


def backward(model: LeNet3C1L, d_logits) -> dict:
    return model.backward(d_logits)


def parameter_ratio(model: LeNet3C1L, reference: LeNet3C1L) -> float:
    """Full-width active parameters of ``model`` relative to ``reference``."""
    return model.active_parameter_count(1.0) / reference.active_parameter_count(1.0)

