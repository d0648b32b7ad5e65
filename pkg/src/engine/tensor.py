"""
Dense tensor kernels with explicit paired backward passes.

Activations are NCHW numpy arrays and conv weights are OIHW. Every forward
returns ``(out, cache)``; the matching ``*_backward`` consumes that cache.
There is no autodiff graph. Inputs are never written to.

Production tensors are float32. float64 exists for finite-difference checks.
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.utils.errors import DimensionError

Tensor = np.ndarray
DEFAULT_DTYPE = np.float32
GRADCHECK_DTYPE = np.float64


@dataclass(frozen=True)
class Batch:
    """Images (N, C, H, W) paired with N integer class labels."""

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.images.ndim != 4:
            raise DimensionError(f"Batch images must be NCHW, got shape {self.images.shape}")
        if self.labels.ndim != 1 or len(self.labels) != self.images.shape[0]:
            raise DimensionError(
                f"Batch has {self.images.shape[0]} images but labels of shape {self.labels.shape}"
            )

    def __len__(self):
        return len(self.labels)


def check_extents(x: Tensor, name: str = "tensor"):
    """Reject tensors with a zero-sized extent."""
    if any(extent < 1 for extent in x.shape):
        raise DimensionError(f"{name} has an empty extent: shape {x.shape}")


# ---------------------------------------------------------------------------
# Matrix multiplication
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor):
    """C = A·B for A (M, K) and B (K, N)."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} · {b.shape}")
    return a @ b, (a, b)


def matmul_backward(dout: Tensor, cache):
    a, b = cache
    return dout @ b.T, a.T @ dout


# ---------------------------------------------------------------------------
# Convolution
# ---------------------------------------------------------------------------

def conv_output_size(size: int, kernel: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - kernel) // stride + 1


def _im2col(x, kh, kw, stride, pad, out_h, out_w):
    n, c = x.shape[:2]
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    cols = np.empty((c, kh, kw, n, out_h, out_w), dtype=x.dtype)
    for i in range(kh):
        i_end = i + stride * out_h
        for j in range(kw):
            j_end = j + stride * out_w
            cols[:, i, j] = xp[:, :, i:i_end:stride, j:j_end:stride].transpose(1, 0, 2, 3)
    return cols.reshape(c * kh * kw, n * out_h * out_w)


def _col2im(dcols, x_shape, kh, kw, stride, pad, out_h, out_w):
    n, c, h, w = x_shape
    dcols = dcols.reshape(c, kh, kw, n, out_h, out_w)
    dxp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=dcols.dtype)
    for i in range(kh):
        i_end = i + stride * out_h
        for j in range(kw):
            j_end = j + stride * out_w
            dxp[:, :, i:i_end:stride, j:j_end:stride] += dcols[:, i, j].transpose(1, 0, 2, 3)
    return dxp[:, :, pad:pad + h, pad:pad + w]


def conv2d(x: Tensor, weight: Tensor, bias: Tensor, stride: int = 1, pad: int = 0):
    """
    2D cross-correlation (no kernel flip) via im2col + one matmul.

    x: (N, C_in, H, W); weight: (C_out, C_in, kH, kW); bias: (C_out,).
    Output spatial extent is floor((H + 2·pad − kH) / stride) + 1.
    """
    if x.ndim != 4 or weight.ndim != 4:
        raise DimensionError(f"conv2d expects NCHW input and OIHW weight, got {x.shape} and {weight.shape}")
    n, c_in, h, w = x.shape
    c_out, w_in, kh, kw = weight.shape
    if w_in != c_in:
        raise DimensionError(f"conv2d channel mismatch: input {x.shape} vs weight {weight.shape}")
    if bias.shape != (c_out,):
        raise DimensionError(f"conv2d bias shape {bias.shape} does not match weight {weight.shape}")
    if stride < 1 or pad < 0:
        raise DimensionError(f"conv2d needs stride >= 1 and pad >= 0, got stride={stride} pad={pad}")
    if h + 2 * pad < kh or w + 2 * pad < kw:
        raise DimensionError(f"conv2d kernel {weight.shape[2:]} larger than padded input {x.shape} (pad={pad})")

    out_h = conv_output_size(h, kh, stride, pad)
    out_w = conv_output_size(w, kw, stride, pad)
    cols = _im2col(x, kh, kw, stride, pad, out_h, out_w)
    w_mat = weight.reshape(c_out, -1)
    out = (w_mat @ cols).reshape(c_out, n, out_h, out_w).transpose(1, 0, 2, 3)
    out = np.ascontiguousarray(out) + bias.reshape(1, -1, 1, 1)
    cache = (x.shape, cols, weight, stride, pad, out_h, out_w)
    return out, cache


def conv2d_backward(dout: Tensor, cache):
    """Returns (d_input, d_weight, d_bias)."""
    x_shape, cols, weight, stride, pad, out_h, out_w = cache
    c_out, _, kh, kw = weight.shape
    dout_mat = dout.transpose(1, 0, 2, 3).reshape(c_out, -1)
    dweight = (dout_mat @ cols.T).reshape(weight.shape)
    dbias = dout.sum(axis=(0, 2, 3))
    dcols = weight.reshape(c_out, -1).T @ dout_mat
    dx = _col2im(dcols, x_shape, kh, kw, stride, pad, out_h, out_w)
    return np.ascontiguousarray(dx), dweight, dbias


def conv2d_reference(x: Tensor, weight: Tensor, bias: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    """Direct nested-loop convolution, the oracle for ``conv2d``."""
    n, _, h, w = x.shape
    c_out, _, kh, kw = weight.shape
    out_h = conv_output_size(h, kh, stride, pad)
    out_w = conv_output_size(w, kw, stride, pad)
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    out = np.empty((n, c_out, out_h, out_w), dtype=x.dtype)
    for b in range(n):
        for o in range(c_out):
            for i in range(out_h):
                for j in range(out_w):
                    window = xp[b, :, i * stride:i * stride + kh, j * stride:j * stride + kw]
                    out[b, o, i, j] = np.sum(window * weight[o]) + bias[o]
    return out


# ---------------------------------------------------------------------------
# Elementwise, pooling, reshaping
# ---------------------------------------------------------------------------

def relu(x: Tensor):
    return np.maximum(x, 0), x > 0


def relu_backward(dout: Tensor, cache):
    return dout * cache


def maxpool2d(x: Tensor, window: int = 2, stride: int = 2):
    """Windowed max over NCHW input; backward routes to the argmax only."""
    n, c, h, w = x.shape
    if window > h or window > w:
        raise DimensionError(f"maxpool2d window {window} exceeds spatial extents of {x.shape}")
    out_h = (h - window) // stride + 1
    out_w = (w - window) // stride + 1

    windows = sliding_window_view(x, (window, window), axis=(2, 3))[:, :, ::stride, ::stride]
    windows = windows[:, :, :out_h, :out_w].reshape(n, c, out_h, out_w, window * window)
    arg = windows.argmax(axis=-1)
    out = np.take_along_axis(windows, arg[..., None], axis=-1)[..., 0]

    rows = np.arange(out_h).reshape(1, 1, -1, 1) * stride + arg // window
    cols = np.arange(out_w).reshape(1, 1, 1, -1) * stride + arg % window
    planes = np.arange(n * c).reshape(n, c, 1, 1)
    flat_index = (planes * h + rows) * w + cols
    return np.ascontiguousarray(out), (x.shape, x.dtype, flat_index)


def maxpool2d_backward(dout: Tensor, cache):
    x_shape, dtype, flat_index = cache
    size = int(np.prod(x_shape))
    dx = np.bincount(flat_index.ravel(), weights=dout.ravel(), minlength=size)
    return dx.astype(dtype).reshape(x_shape)


def flatten(x: Tensor):
    """(N, C, H, W) -> (N, C·H·W); channel-major so channel prefixes stay feature prefixes."""
    return x.reshape(x.shape[0], -1), x.shape


def flatten_backward(dout: Tensor, cache):
    return dout.reshape(cache)


# ---------------------------------------------------------------------------
# Loss
# ---------------------------------------------------------------------------

def softmax_cross_entropy(logits: Tensor, labels: np.ndarray):
    """
    Mean negative log-likelihood of the labels under softmax(logits).

    Returns ``(loss, d_logits)`` with d_logits = (softmax − onehot) / N.
    """
    if logits.ndim != 2 or len(labels) != logits.shape[0]:
        raise DimensionError(f"logits {logits.shape} do not match {len(labels)} labels")
    n, k = logits.shape
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise IndexError(f"labels must lie in [0, {k}), got range [{labels.min()}, {labels.max()}]")

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    rows = np.arange(n)
    loss = -log_probs[rows, labels].mean()

    d_logits = np.exp(log_probs)
    d_logits[rows, labels] -= 1
    d_logits /= n
    return float(loss), d_logits
