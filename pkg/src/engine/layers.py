"""
Width-aware layers: dense and triangular conv/linear, plus batch normalization.

Every layer takes the network width-factor alpha and resolves its own active
channel counts. Dense layers slice their weights to the active block.
Triangular layers always run the full-shape masked product and slice the
first ``k_out`` outputs, which keeps the result bitwise equal to a slice of
the full-width pass. Gradients are returned at full parameter shape with
zeros for inactive and masked entries.
"""

from dataclasses import dataclass, field

import numpy as np

from config.settings import BN_EPS, BN_MOMENTUM
from src.engine.tensor import (
    DEFAULT_DTYPE,
    conv2d,
    conv2d_backward,
    matmul,
    matmul_backward,
)
from src.engine.widths import TriangularMask, active_count, triangular_mask
from src.utils.errors import ArgumentError, DimensionError, WidthError

BN_MODES = ("train", "eval", "observe")


# ---------------------------------------------------------------------------
# Batch normalization
# ---------------------------------------------------------------------------

@dataclass
class BatchNormState:
    """Affine parameters and running statistics of one BN site."""

    running_mean: np.ndarray
    running_var: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray
    eps: float = BN_EPS
    momentum: float = BN_MOMENTUM

    def __post_init__(self):
        lengths = {len(self.running_mean), len(self.running_var), len(self.gamma), len(self.beta)}
        if len(lengths) != 1:
            raise DimensionError(f"BatchNormState vectors differ in length: {sorted(lengths)}")
        if self.eps <= 0:
            raise ArgumentError(f"eps must be positive, got {self.eps}")
        if not (0.0 < self.momentum < 1.0):
            raise ArgumentError(f"momentum must lie in (0, 1), got {self.momentum}")

    @classmethod
    def create(cls, channels: int, dtype=DEFAULT_DTYPE, eps: float = BN_EPS, momentum: float = BN_MOMENTUM):
        return cls(
            running_mean=np.zeros(channels, dtype=dtype),
            running_var=np.ones(channels, dtype=dtype),
            gamma=np.ones(channels, dtype=dtype),
            beta=np.zeros(channels, dtype=dtype),
            eps=eps,
            momentum=momentum,
        )

    @property
    def channels(self) -> int:
        return len(self.gamma)

    @property
    def num_scalars(self) -> int:
        return 4 * self.channels

    def copy(self) -> "BatchNormState":
        return BatchNormState(
            self.running_mean.copy(), self.running_var.copy(),
            self.gamma.copy(), self.beta.copy(), self.eps, self.momentum,
        )

    def reset_running_stats(self):
        self.running_mean[...] = 0
        self.running_var[...] = 1


def batchnorm_forward(x, state: BatchNormState, mode: str = "train", k: int = None, momentum: float = None):
    """
    Normalize the first ``k`` channels of ``x`` (N, C[, H, W]).

    train: batch statistics, running stats of active channels updated.
    eval: running statistics.
    observe: batch statistics, running stats left alone.

    ``momentum`` overrides ``state.momentum`` for this call only. Returns
    ``(out, cache)`` where ``out`` holds ``k`` channels.
    """
    if mode not in BN_MODES:
        raise ArgumentError(f"unknown batchnorm mode {mode!r}; expected one of {BN_MODES}")
    channels = state.channels
    k = channels if k is None else int(k)
    if not (1 <= k <= channels):
        raise ArgumentError(f"active channels must lie in [1, {channels}], got {k}")
    if x.ndim not in (2, 4):
        raise DimensionError(f"batchnorm expects (N, C) or (N, C, H, W), got {x.shape}")
    if x.shape[1] < k:
        raise DimensionError(f"input has {x.shape[1]} channels, {k} are active")

    axes = (0,) if x.ndim == 2 else (0, 2, 3)
    count = int(np.prod([x.shape[a] for a in axes]))
    if count == 0:
        raise ArgumentError("batchnorm over an empty batch")
    shape = (1, k) if x.ndim == 2 else (1, k, 1, 1)

    xa = x[:, :k]
    batch_mean = batch_var = None
    if mode == "eval":
        mean = state.running_mean[:k]
        var = state.running_var[:k]
    else:
        batch_mean = xa.mean(axis=axes)
        batch_var = xa.var(axis=axes)
        mean, var = batch_mean, batch_var

    inv_std = (1.0 / np.sqrt(var + state.eps)).astype(x.dtype)
    xhat = (xa - mean.reshape(shape).astype(x.dtype)) * inv_std.reshape(shape)
    gamma_k = state.gamma[:k]
    out = gamma_k.reshape(shape) * xhat + state.beta[:k].reshape(shape)

    if mode == "train":
        m = state.momentum if momentum is None else momentum
        state.running_mean[:k] = (1 - m) * state.running_mean[:k] + m * batch_mean
        state.running_var[:k] = (1 - m) * state.running_var[:k] + m * batch_var

    cache = {
        "mode": mode,
        "xhat": xhat,
        "inv_std": inv_std,
        "gamma_k": gamma_k.copy(),
        "axes": axes,
        "shape": shape,
        "count": count,
        "batch_mean": batch_mean,
        "batch_var": batch_var,
        "k": k,
        "channels": channels,
        "x_channels": x.shape[1],
    }
    return out, cache


def batchnorm_backward(dout, cache):
    """Returns ``(dx, {"gamma": ..., "beta": ...})`` with full-length parameter grads."""
    axes, shape, k = cache["axes"], cache["shape"], cache["k"]
    xhat, inv_std = cache["xhat"], cache["inv_std"].reshape(shape)
    dxhat = dout * cache["gamma_k"].reshape(shape)

    if cache["mode"] == "eval":
        dxa = dxhat * inv_std
    else:
        n = cache["count"]
        dxa = (inv_std / n) * (
            n * dxhat
            - dxhat.sum(axis=axes, keepdims=True)
            - xhat * (dxhat * xhat).sum(axis=axes, keepdims=True)
        )

    dx = np.zeros((dout.shape[0], cache["x_channels"]) + dout.shape[2:], dtype=dout.dtype)
    dx[:, :k] = dxa
    dgamma = np.zeros(cache["channels"], dtype=dout.dtype)
    dbeta = np.zeros(cache["channels"], dtype=dout.dtype)
    dgamma[:k] = (dout * xhat).sum(axis=axes)
    dbeta[:k] = dout.sum(axis=axes)
    return dx, {"gamma": dgamma, "beta": dbeta}


@dataclass
class SwitchableBatchNorm:
    """One private BatchNormState per trained width-factor."""

    states: list
    widths: list

    def __post_init__(self):
        if len(self.states) != len(self.widths) or not self.states:
            raise ArgumentError(f"{len(self.states)} BN states for {len(self.widths)} widths")
        if any(a >= b for a, b in zip(self.widths, self.widths[1:])):
            raise ArgumentError(f"switchable BN widths must be strictly ascending: {self.widths}")
        if self.widths[-1] != 1.0:
            raise ArgumentError(f"switchable BN widths must end at 1.0: {self.widths}")

    @classmethod
    def create(cls, channels: int, widths, dtype=DEFAULT_DTYPE) -> "SwitchableBatchNorm":
        widths = sorted(float(w) for w in widths)
        return cls([BatchNormState.create(channels, dtype) for _ in widths], widths)

    @property
    def channels(self) -> int:
        return self.states[0].channels

    @property
    def num_scalars(self) -> int:
        return sum(s.num_scalars for s in self.states)

    def index_of(self, alpha: float) -> int:
        for i, w in enumerate(self.widths):
            if abs(w - alpha) < 1e-9:
                return i
        raise WidthError(f"width-factor {alpha} is not one of the trained widths {self.widths}")


def switchable_bn_forward(x, sbn: SwitchableBatchNorm, width_index: int, mode: str = "train",
                          k: int = None, momentum: float = None):
    """
    Batchnorm through ``sbn.states[width_index]``.

    ``k`` defaults to the active channels of that slot's own width; routing a
    narrower alpha into a wider slot passes its own ``k``.
    """
    if not (0 <= width_index < len(sbn.states)):
        raise IndexError(f"width index {width_index} out of range for {len(sbn.states)} BN states")
    if k is None:
        k = active_count(sbn.widths[width_index], sbn.channels)
    return batchnorm_forward(x, sbn.states[width_index], mode, k=k, momentum=momentum)


# ---------------------------------------------------------------------------
# Conv and linear layers
# ---------------------------------------------------------------------------

def _kaiming_rows(rng, shape, fan_in_per_row, dtype):
    std = np.sqrt(2.0 / np.asarray(fan_in_per_row, dtype=np.float64))
    std = std.reshape((-1,) + (1,) * (len(shape) - 1))
    return (rng.standard_normal(shape) * std).astype(dtype)


@dataclass(eq=False)
class Conv2dLayer:
    """
    Dense conv whose active block is ``weight[:k_out, :k_in]``.

    ``input_scaled`` is False for a layer fed by the image, which keeps all
    input channels at every alpha.
    """

    in_channels: int
    out_channels: int
    kernel_size: int
    stride: int = 1
    pad: int = 0
    input_scaled: bool = True
    seed: int = 0
    dtype: type = DEFAULT_DTYPE
    weight: np.ndarray = field(init=False, repr=False)
    bias: np.ndarray = field(init=False, repr=False)

    masked = False

    def __post_init__(self):
        if min(self.in_channels, self.out_channels, self.kernel_size) < 1:
            raise ArgumentError(
                f"conv extents must be positive: in={self.in_channels} out={self.out_channels} k={self.kernel_size}"
            )
        rng = np.random.default_rng(self.seed)
        shape = (self.out_channels, self.in_channels, self.kernel_size, self.kernel_size)
        self.weight = _kaiming_rows(rng, shape, self._row_fan_in(), self.dtype)
        self.bias = np.zeros(self.out_channels, dtype=self.dtype)
        self.apply_mask()

    def _row_fan_in(self):
        return np.full(self.out_channels, self.in_channels * self.kernel_size ** 2)

    def widths_at(self, alpha: float):
        k_out = active_count(alpha, self.out_channels)
        k_in = active_count(alpha, self.in_channels) if self.input_scaled else self.in_channels
        return k_out, k_in

    def _check_input(self, x, k_in):
        if x.ndim != 4 or x.shape[1] < k_in:
            raise DimensionError(f"{type(self).__name__} needs NCHW input with >= {k_in} channels, got {x.shape}")

    def forward(self, x, alpha: float):
        k_out, k_in = self.widths_at(alpha)
        self._check_input(x, k_in)
        out, conv_cache = conv2d(
            x[:, :k_in], self.weight[:k_out, :k_in], self.bias[:k_out], self.stride, self.pad
        )
        return out, (conv_cache, k_out, k_in, x.shape[1])

    def backward(self, dout, cache):
        conv_cache, k_out, k_in, x_channels = cache
        dxa, dw, db = conv2d_backward(dout, conv_cache)
        dx = np.zeros((dxa.shape[0], x_channels) + dxa.shape[2:], dtype=dxa.dtype)
        dx[:, :k_in] = dxa
        dweight = np.zeros_like(self.weight)
        dweight[:k_out, :k_in] = dw
        dbias = np.zeros_like(self.bias)
        dbias[:k_out] = db
        return dx, {"weight": dweight, "bias": dbias}

    def apply_mask(self):
        pass

    def parameters(self) -> dict:
        return {"weight": self.weight, "bias": self.bias}

    def active_parameter_count(self, alpha: float = 1.0) -> int:
        k_out, k_in = self.widths_at(alpha)
        return k_out * k_in * self.kernel_size ** 2 + k_out


@dataclass(eq=False)
class TriangularConv2d(Conv2dLayer):
    """Conv whose output channel ``s`` reads only input channels ``t <= t_max(s)``."""

    mask: TriangularMask = field(init=False, repr=False)

    masked = True

    def __post_init__(self):
        if self.input_scaled:
            self.mask = triangular_mask(self.out_channels, self.in_channels)
        else:
            self.mask = TriangularMask.full(self.out_channels, self.in_channels)
        self._mask4d = self.mask.matrix(self.dtype)[:, :, None, None]
        super().__post_init__()

    def _row_fan_in(self):
        return np.asarray(self.mask.t_max) * self.kernel_size ** 2

    def forward(self, x, alpha: float):
        k_out, k_in = self.widths_at(alpha)
        self._check_input(x, k_in)
        x_full = np.zeros((x.shape[0], self.in_channels) + x.shape[2:], dtype=x.dtype)
        x_full[:, :k_in] = x[:, :k_in]
        out, conv_cache = conv2d(x_full, self.weight * self._mask4d, self.bias, self.stride, self.pad)
        return np.ascontiguousarray(out[:, :k_out]), (conv_cache, k_out, k_in, x.shape[1])

    def backward(self, dout, cache):
        conv_cache, k_out, k_in, x_channels = cache
        dout_full = np.zeros((dout.shape[0], self.out_channels) + dout.shape[2:], dtype=dout.dtype)
        dout_full[:, :k_out] = dout
        dx_full, dw, db = conv2d_backward(dout_full, conv_cache)
        dx = np.zeros((dx_full.shape[0], x_channels) + dx_full.shape[2:], dtype=dx_full.dtype)
        dx[:, :k_in] = dx_full[:, :k_in]
        return dx, {"weight": dw * self._mask4d, "bias": db}

    def apply_mask(self):
        self.weight *= self._mask4d

    def active_parameter_count(self, alpha: float = 1.0) -> int:
        k_out, _ = self.widths_at(alpha)
        return int(sum(self.mask.t_max[:k_out])) * self.kernel_size ** 2 + k_out


@dataclass(eq=False)
class LinearLayer:
    """
    Dense affine map ``y = x·Wᵀ + b``.

    Inputs come in groups of ``in_group`` features per channel (the spatial
    area after flattening), so the active input block is ``k_in·in_group``.
    The classifier keeps all outputs (``output_scaled=False``).
    """

    in_features: int
    out_features: int
    in_group: int = 1
    input_scaled: bool = True
    output_scaled: bool = True
    seed: int = 0
    dtype: type = DEFAULT_DTYPE
    weight: np.ndarray = field(init=False, repr=False)
    bias: np.ndarray = field(init=False, repr=False)

    masked = False

    def __post_init__(self):
        if min(self.in_features, self.out_features, self.in_group) < 1 or self.in_features % self.in_group:
            raise ArgumentError(
                f"linear extents invalid: in={self.in_features} out={self.out_features} group={self.in_group}"
            )
        rng = np.random.default_rng(self.seed)
        self.weight = _kaiming_rows(rng, (self.out_features, self.in_features), self._row_fan_in(), self.dtype)
        self.bias = np.zeros(self.out_features, dtype=self.dtype)
        self.apply_mask()

    @property
    def in_channels(self) -> int:
        return self.in_features // self.in_group

    def _row_fan_in(self):
        return np.full(self.out_features, self.in_features)

    def widths_at(self, alpha: float):
        k_out = active_count(alpha, self.out_features) if self.output_scaled else self.out_features
        k_in = active_count(alpha, self.in_channels) if self.input_scaled else self.in_channels
        return k_out, k_in * self.in_group

    def _check_input(self, x, n_in):
        if x.ndim != 2 or x.shape[1] < n_in:
            raise DimensionError(f"{type(self).__name__} needs (N, >= {n_in}) input, got {x.shape}")

    def forward(self, x, alpha: float):
        k_out, n_in = self.widths_at(alpha)
        self._check_input(x, n_in)
        out, mm_cache = matmul(x[:, :n_in], self.weight[:k_out, :n_in].T)
        return out + self.bias[:k_out], (mm_cache, k_out, n_in, x.shape[1])

    def backward(self, dout, cache):
        mm_cache, k_out, n_in, x_features = cache
        dxa, dwt = matmul_backward(dout, mm_cache)
        dx = np.zeros((dxa.shape[0], x_features), dtype=dxa.dtype)
        dx[:, :n_in] = dxa
        dweight = np.zeros_like(self.weight)
        dweight[:k_out, :n_in] = dwt.T
        dbias = np.zeros_like(self.bias)
        dbias[:k_out] = dout.sum(axis=0)
        return dx, {"weight": dweight, "bias": dbias}

    def apply_mask(self):
        pass

    def parameters(self) -> dict:
        return {"weight": self.weight, "bias": self.bias}

    def active_parameter_count(self, alpha: float = 1.0) -> int:
        k_out, n_in = self.widths_at(alpha)
        return k_out * n_in + k_out


@dataclass(eq=False)
class TriangularLinear(LinearLayer):
    """Fully-connected layer under a triangular mask over (out_features, in_features)."""

    mask: TriangularMask = field(init=False, repr=False)

    masked = True

    def __post_init__(self):
        if self.in_group != 1 or not self.output_scaled:
            raise ArgumentError("TriangularLinear scales every input and output feature")
        if self.input_scaled:
            self.mask = triangular_mask(self.out_features, self.in_features)
        else:
            self.mask = TriangularMask.full(self.out_features, self.in_features)
        self._mask2d = self.mask.matrix(self.dtype)
        super().__post_init__()

    def _row_fan_in(self):
        return np.asarray(self.mask.t_max)

    def forward(self, x, alpha: float):
        k_out, n_in = self.widths_at(alpha)
        self._check_input(x, n_in)
        x_full = np.zeros((x.shape[0], self.in_features), dtype=x.dtype)
        x_full[:, :n_in] = x[:, :n_in]
        out, mm_cache = matmul(x_full, (self.weight * self._mask2d).T)
        out = out + self.bias
        return np.ascontiguousarray(out[:, :k_out]), (mm_cache, k_out, n_in, x.shape[1])

    def backward(self, dout, cache):
        mm_cache, k_out, n_in, x_features = cache
        dout_full = np.zeros((dout.shape[0], self.out_features), dtype=dout.dtype)
        dout_full[:, :k_out] = dout
        dx_full, dwt = matmul_backward(dout_full, mm_cache)
        dx = np.zeros((dx_full.shape[0], x_features), dtype=dx_full.dtype)
        dx[:, :n_in] = dx_full[:, :n_in]
        return dx, {"weight": dwt.T * self._mask2d, "bias": dout_full.sum(axis=0)}

    def apply_mask(self):
        self.weight *= self._mask2d

    def active_parameter_count(self, alpha: float = 1.0) -> int:
        k_out, _ = self.widths_at(alpha)
        return int(sum(self.mask.t_max[:k_out])) + k_out


def triangular_forward(layer, x, alpha: float):
    """Forward of a triangular conv or linear layer at width-factor ``alpha``; returns ``(out, cache)``."""
    if not getattr(layer, "masked", False):
        raise ArgumentError(f"{type(layer).__name__} is not a triangular layer")
    return layer.forward(x, alpha)


def triangular_backward(layer, dout, cache):
    return layer.backward(dout, cache)


def apply_mask(layer):
    """Zero every masked weight entry; a no-op for dense layers."""
    layer.apply_mask()
