"""Small dense numeric helpers shared by the other modules.

Maps and matrices are plain 2-D ``float32`` numpy arrays. Sums are
accumulated in float64 and cast back, so repeated runs with the same inputs
are bit-stable.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyInput,
    InvalidKernel,
    NonFiniteInput,
    NotADistribution,
)

DTYPE = np.float32


def as_map(values, name: str = "map") -> np.ndarray:
    """Coerce to a finite 2-D float32 array."""
    arr = np.asarray(values, dtype=DTYPE)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise EmptyInput(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} contains non-finite values")
    return arr


def matmul(a, b, out_dtype=DTYPE) -> np.ndarray:
    """Matrix product with float64 accumulation.

    Accepts stacked (batched) operands in the leading axes like ``np.matmul``.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[-1] != b.shape[-2]:
        raise DimensionMismatch(f"cannot multiply {a.shape} by {b.shape}")
    out = np.matmul(a.astype(np.float64), b.astype(np.float64))
    return out.astype(out_dtype)


def softmax_rows(logits) -> np.ndarray:
    """Row-wise softmax along the last axis with max subtraction."""
    x = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("softmax input contains non-finite values")
    x = x - x.max(axis=-1, keepdims=True)
    e = np.exp(x)
    return (e / e.sum(axis=-1, keepdims=True)).astype(DTYPE)


def _resize_axis(n_in: int, n_out: int):
    # half-pixel centres, clamped at the borders
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(np.int64)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    return lo, hi, frac


def bilinear_resize(values, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with the align-corners-false (half-pixel) convention."""
    m = as_map(values)
    if out_h < 1 or out_w < 1:
        raise EmptyInput(f"output size must be positive, got {out_h}x{out_w}")
    h, w = m.shape
    m = m.astype(np.float64)
    y0, y1, fy = _resize_axis(h, out_h)
    x0, x1, fx = _resize_axis(w, out_w)
    rows = m[y0] * (1.0 - fy)[:, None] + m[y1] * fy[:, None]
    out = rows[:, x0] * (1.0 - fx)[None, :] + rows[:, x1] * fx[None, :]
    return out.astype(DTYPE)


def gaussian_kernel_1d(kernel_size: int, sigma: float) -> np.ndarray:
    if kernel_size < 1 or kernel_size % 2 == 0:
        raise InvalidKernel(f"kernel size must be a positive odd integer, got {kernel_size}")
    if not sigma > 0:
        raise InvalidKernel(f"sigma must be positive, got {sigma}")
    c = kernel_size // 2
    x = np.arange(kernel_size, dtype=np.float64) - c
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def gaussian_blur(values, kernel_size: int = 5, sigma: float = 1.1) -> np.ndarray:
    """Separable Gaussian blur with edge-replicated borders."""
    m = as_map(values).astype(np.float64)
    g = gaussian_kernel_1d(kernel_size, sigma)
    c = kernel_size // 2
    h, w = m.shape
    p = np.pad(m, c, mode="edge")
    # rows first, then columns; fixed tap order
    tmp = np.zeros((h + 2 * c, w), dtype=np.float64)
    for i, wt in enumerate(g):
        tmp += wt * p[:, i:i + w]
    out = np.zeros((h, w), dtype=np.float64)
    for i, wt in enumerate(g):
        out += wt * tmp[i:i + h, :]
    return out.astype(DTYPE)


def row_entropy(weights, atol: float = 1e-4) -> np.ndarray:
    """Shannon entropy (nats) of each row; ``0 * log 0`` counts as 0."""
    p = np.asarray(weights, dtype=np.float64)
    if p.ndim == 1:
        p = p[None, :]
    if np.any(p < 0) or np.any(np.abs(p.sum(axis=-1) - 1.0) > atol):
        raise NotADistribution("rows must be non-negative and sum to 1")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(p), 0.0)
    return -terms.sum(axis=-1)


def minmax_normalize(values, mask=None, degenerate: float = 0.5, eps: float = 1e-8) -> np.ndarray:
    """Scale to [0, 1] using the range found under ``mask`` (everything if None).

    A range narrower than ``eps`` maps to the constant ``degenerate``.
    Values outside the mask are left at 0.
    """
    v = np.asarray(values, dtype=np.float64)
    sel = np.ones(v.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if not sel.any():
        raise EmptyInput("normalization region is empty")
    lo = v[sel].min()
    hi = v[sel].max()
    out = np.zeros_like(v)
    if hi - lo < eps:
        out[sel] = degenerate
    else:
        out[sel] = (v[sel] - lo) / (hi - lo)
    return out.astype(DTYPE)


def check_finite(x, name: str = "input") -> None:
    if not np.all(np.isfinite(np.asarray(x))):
        raise NonFiniteInput(f"{name} contains non-finite values")


def isqrt_scale(d: int) -> float:
    return 1.0 / math.sqrt(d)
