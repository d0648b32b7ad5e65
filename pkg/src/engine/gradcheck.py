"""
Central finite-difference gradient checking.

Two flavours: per-coordinate differences for single layers, and random
direction (Taylor) checks for whole networks where probing every coordinate
is too slow.
"""

import numpy as np

FD_STEP = 1e-5


def numerical_gradient(f, x: np.ndarray, h: float = FD_STEP, indices=None) -> np.ndarray:
    """
    Central differences of the scalar function ``f()`` with respect to ``x``.

    ``x`` is perturbed in place and restored, so ``f`` must read it by
    reference. Only ``indices`` are probed when given; the rest stay zero.
    """
    grad = np.zeros_like(x)
    for idx in (indices if indices is not None else np.ndindex(x.shape)):
        original = x[idx]
        x[idx] = original + h
        f_plus = f()
        x[idx] = original - h
        f_minus = f()
        x[idx] = original
        grad[idx] = (f_plus - f_minus) / (2 * h)
    return grad


def directional_derivative(f, tensors, directions, h: float = FD_STEP) -> float:
    """Central difference of ``f()`` along ``directions`` (one per tensor, updated in place)."""
    originals = [t.copy() for t in tensors]
    for t, o, d in zip(tensors, originals, directions):
        t[...] = o + h * d
    f_plus = f()
    for t, o, d in zip(tensors, originals, directions):
        t[...] = o - h * d
    f_minus = f()
    for t, o in zip(tensors, originals):
        t[...] = o
    return (f_plus - f_minus) / (2 * h)


def relative_error(analytic, numeric) -> float:
    """Largest absolute deviation relative to the larger gradient magnitude."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0), 1e-12)
    return float(np.abs(analytic - numeric).max(initial=0.0) / scale)


def sample_indices(shape, count: int, rng: np.random.Generator):
    """Up to ``count`` distinct random coordinates of an array of ``shape``."""
    size = int(np.prod(shape))
    flat = rng.choice(size, size=min(count, size), replace=False)
    return [np.unravel_index(i, shape) for i in flat]
