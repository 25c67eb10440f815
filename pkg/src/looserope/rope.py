"""Axial rotary positional embedding with an inverse range factor.

A token of width ``4 * D`` is read as ``2 * D`` consecutive pairs. The first
``D`` pairs rotate with the x coordinate, the last ``D`` with y. Pair ``d``
of either half turns by ``theta_d * r * m``; with ``r < 1`` the positional
distance between tokens shrinks and attention spreads further.

For 1-D positions (``axial=False``) the width is ``2 * D`` and all pairs use
the single coordinate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidDimension, RangeOutOfBounds
from .numerics import DTYPE

_R_TOL = 1e-12


@dataclass(frozen=True)
class FrequencyTable:
    theta_base: float
    frequencies: np.ndarray

    @property
    def D(self) -> int:
        return len(self.frequencies)


def build_frequencies(theta_base: float, D: int) -> FrequencyTable:
    """Geometric progression ``theta_base ** (d / (D - 1))`` for d = 0..D-1.

    ``D == 1`` gives the single frequency 1. A ``theta_base`` below 1 gives
    the decreasing progression most DiT backbones use.
    """
    if D < 1:
        raise InvalidDimension(f"D must be >= 1, got {D}")
    if not theta_base > 0:
        raise InvalidDimension(f"theta_base must be positive, got {theta_base}")
    if D == 1:
        freqs = np.ones(1, dtype=np.float64)
    else:
        freqs = float(theta_base) ** (np.arange(D, dtype=np.float64) / (D - 1))
    freqs.setflags(write=False)
    return FrequencyTable(float(theta_base), freqs)


@dataclass(frozen=True)
class PositionGrid:
    """Row-major token grid; token ``i`` sits at ``(x, y) = (i % width, i // width)``.

    ``block_offset`` is added to both coordinates, which lets the input-image
    block be shifted relative to the output block.
    """

    height: int
    width: int
    block_offset: int = 0

    @property
    def size(self) -> int:
        return self.height * self.width

    def coords(self) -> np.ndarray:
        ys, xs = np.divmod(np.arange(self.size), self.width)
        return np.stack([xs, ys], axis=1).astype(np.int64) + self.block_offset


def _coords_of(positions, axial: bool) -> np.ndarray:
    if isinstance(positions, PositionGrid):
        c = positions.coords().astype(np.float64)
        return c if axial else c[:, 0]
    c = np.asarray(positions, dtype=np.float64)
    if axial and (c.ndim != 2 or c.shape[1] != 2):
        raise DimensionMismatch(f"axial positions must be (T, 2), got {c.shape}")
    if not axial and c.ndim != 1:
        raise DimensionMismatch(f"1-D positions must be (T,), got {c.shape}")
    return c


def check_range(r: float) -> float:
    r = float(r)
    if not (-_R_TOL <= r <= 1.0 + _R_TOL):
        raise RangeOutOfBounds(f"inverse range factor must lie in [0, 1], got {r}")
    return r


def _angles(coords: np.ndarray, freqs: FrequencyTable, r: float, axial: bool) -> np.ndarray:
    f = freqs.frequencies
    if axial:
        ax = coords[:, 0:1] * r * f[None, :]
        ay = coords[:, 1:2] * r * f[None, :]
        return np.concatenate([ax, ay], axis=1)
    return coords[:, None] * r * f[None, :]


def rotate_tokens(tokens, positions, freqs: FrequencyTable, r: float = 1.0,
                  axial: bool = True) -> np.ndarray:
    """Rotate each token's 2-D sub-vectors by ``theta_d * r * m``.

    ``tokens`` is ``(..., T, width)``; leading axes (e.g. heads) share the
    same positions. ``positions`` is a :class:`PositionGrid` or an explicit
    coordinate array (reals allowed).
    """
    r = check_range(r)
    x = np.asarray(tokens)
    coords = _coords_of(positions, axial)
    pairs = (2 if axial else 1) * freqs.D
    if x.shape[-1] != 2 * pairs:
        raise DimensionMismatch(
            f"token width {x.shape[-1]} does not match {2 * pairs} for D={freqs.D}, axial={axial}")
    if x.shape[-2] != coords.shape[0]:
        raise DimensionMismatch(f"{x.shape[-2]} tokens but {coords.shape[0]} positions")
    ang = _angles(coords, freqs, r, axial)
    c, s = np.cos(ang), np.sin(ang)
    v = x.astype(np.float64).reshape(*x.shape[:-1], pairs, 2)
    a, b = v[..., 0], v[..., 1]
    out = np.stack([a * c - b * s, a * s + b * c], axis=-1)
    return out.reshape(x.shape).astype(DTYPE)


def rotate_query_key_pair(q, K, positions_q, positions_K, freqs: FrequencyTable,
                          r: float = 1.0, axial: bool = True):
    """Rotate queries and keys with the same range factor."""
    return (rotate_tokens(q, positions_q, freqs, r, axial),
            rotate_tokens(K, positions_K, freqs, r, axial))
