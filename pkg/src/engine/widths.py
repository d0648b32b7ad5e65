"""
Width-factor resolution and triangular channel masks.

A network-wide width-factor alpha in (0, 1] activates the first
``k = ceil(alpha·m)`` of a layer's ``m`` channels. A triangular mask limits
each output channel ``s`` (1-based) to inputs ``t <= t_max(s)`` so that, for
every alpha, an active output never reads an inactive input.
"""

import math
from dataclasses import dataclass

import numpy as np

from src.utils.errors import ArgumentError, WidthError

WidthFactor = float

# alpha·m is computed in floating point; 0.35·20 lands a hair above 7.
_CEIL_TOLERANCE = 1e-9


def check_alpha(alpha: WidthFactor) -> float:
    """Return alpha as a float, raising WidthError unless 0 < alpha <= 1."""
    try:
        value = float(alpha)
    except (TypeError, ValueError):
        raise WidthError(f"width-factor must be a real number, got {alpha!r}") from None
    if not (0.0 < value <= 1.0):
        raise WidthError(f"width-factor must lie in (0, 1], got {alpha}")
    return value


def active_count(alpha: WidthFactor, m: int) -> int:
    """Active channels of an ``m``-channel layer: ceil(alpha·m) clamped to [1, m]."""
    if m < 1:
        raise ArgumentError(f"channel count must be >= 1, got {m}")
    alpha = check_alpha(alpha)
    return min(m, max(1, math.ceil(alpha * m - _CEIL_TOLERANCE)))


def active_counts(alphas: np.ndarray, m: int) -> np.ndarray:
    """Vectorized ``active_count`` over an array of already-validated alphas."""
    k = np.ceil(np.asarray(alphas, dtype=np.float64) * m - _CEIL_TOLERANCE).astype(np.int64)
    return np.clip(k, 1, m)


@dataclass(frozen=True)
class LayerWidth:
    """Total channels ``m`` and active channels ``k`` at one width-factor."""

    m: int
    k: int

    @classmethod
    def resolve(cls, alpha: WidthFactor, m: int) -> "LayerWidth":
        return cls(m=m, k=active_count(alpha, m))


@dataclass(frozen=True)
class TriangularMask:
    """
    Channel connectivity of an (m_out, m_in) layer.

    ``t_max[s - 1]`` is the largest 1-based input index output ``s`` may read.
    Masks built by ``triangular_mask`` are non-decreasing in ``s``; hand-built
    masks need not be, which is what lets the safety checker reject them.
    """

    m_out: int
    m_in: int
    t_max: tuple

    def __post_init__(self):
        if self.m_out < 1 or self.m_in < 1:
            raise ArgumentError(f"mask extents must be positive, got ({self.m_out}, {self.m_in})")
        if len(self.t_max) != self.m_out:
            raise ArgumentError(f"t_max has {len(self.t_max)} entries for {self.m_out} outputs")
        if any(t < 1 or t > self.m_in for t in self.t_max):
            raise ArgumentError(f"t_max entries must lie in [1, {self.m_in}]: {self.t_max}")

    @classmethod
    def full(cls, m_out: int, m_in: int) -> "TriangularMask":
        """Dense connectivity; only any-width safe when the input width never changes."""
        return cls(m_out, m_in, tuple([m_in] * m_out))

    def matrix(self, dtype=np.float32) -> np.ndarray:
        """Binary (m_out, m_in) matrix, 1 where a connection is allowed."""
        t = np.arange(1, self.m_in + 1)
        return (t[None, :] <= np.asarray(self.t_max)[:, None]).astype(dtype)

    @property
    def is_monotone(self) -> bool:
        return all(a <= b for a, b in zip(self.t_max, self.t_max[1:]))

    def connections(self) -> int:
        return int(sum(self.t_max))


def triangular_mask(m_out: int, m_in: int) -> TriangularMask:
    """
    The maximal any-width safe mask: t_max(s) = floor((s − 1)·m_in / m_out) + 1.

    Square layers reduce to the lower-triangular t_max(s) = s.
    """
    if m_out < 1 or m_in < 1:
        raise ArgumentError(f"mask extents must be positive, got ({m_out}, {m_in})")
    return TriangularMask(m_out, m_in, tuple((s - 1) * m_in // m_out + 1 for s in range(1, m_out + 1)))


def safety_grid(m_out: int, m_in: int) -> np.ndarray:
    """
    Alphas that exercise every (k_out, k_in) pair reachable in (0, 1].

    Both active counts are constant on the cells of the 1/(m_out·m_in) grid,
    so the cell endpoints plus the explicit breakpoints cover every case.
    """
    cells = m_out * m_in
    dense = np.arange(1, cells + 1) / cells
    breakpoints = np.concatenate([np.arange(1, m_out + 1) / m_out, np.arange(1, m_in + 1) / m_in])
    return np.unique(np.concatenate([dense, breakpoints]))


def validate_any_width_safety(mask: TriangularMask) -> bool:
    """True iff no active output reads an inactive input at any alpha."""
    alphas = safety_grid(mask.m_out, mask.m_in)
    k_out = active_counts(alphas, mask.m_out)
    k_in = active_counts(alphas, mask.m_in)
    reach = np.maximum.accumulate(np.asarray(mask.t_max))
    return bool(np.all(reach[k_out - 1] <= k_in))
