"""Saliency maps from detector-style feature stacks.

Pipeline: per-layer channel norms, resized to the latent grid and averaged,
then normalized over the crop, blurred, clamped and zeroed at holes.
Optionally quantized to ``N`` evenly spaced levels, and rescaled by the
steering factor lambda.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    DegenerateMask,
    DimensionMismatch,
    EmptyInput,
    InvalidLevelCount,
    NonFiniteInput,
    ValidationError,
)
from .numerics import DTYPE, as_map, bilinear_resize, check_finite, gaussian_blur, minmax_normalize


@dataclass
class FeatureStack:
    """Feature layers, each ``(channels, height, width)``."""

    layers: list
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.layers:
            raise EmptyInput("feature stack has no layers")
        fixed = []
        for i, layer in enumerate(self.layers):
            a = np.asarray(layer, dtype=DTYPE)
            if a.ndim == 2:
                a = a[None]
            if a.ndim != 3 or a.size == 0:
                raise DimensionMismatch(f"layer {i} must be (C, H, W), got {a.shape}")
            check_finite(a, f"layer {i}")
            fixed.append(a)
        self.layers = fixed


@dataclass
class RegionMasks:
    crop: np.ndarray
    holes: Optional[np.ndarray] = None

    def __post_init__(self):
        self.crop = np.asarray(self.crop, dtype=bool)
        if self.holes is None:
            self.holes = np.zeros_like(self.crop)
        self.holes = np.asarray(self.holes, dtype=bool)
        if self.crop.shape != self.holes.shape:
            raise DimensionMismatch("crop and hole masks differ in shape")
        if np.any(self.crop & self.holes):
            raise ValidationError("hole mask overlaps the crop mask")

    @property
    def shape(self):
        return self.crop.shape


@dataclass
class SaliencyMap:
    values: np.ndarray
    levels: Optional[int] = None

    def __post_init__(self):
        self.values = as_map(self.values, "saliency")
        if self.values.min() < 0 or self.values.max() > 1:
            raise ValidationError("saliency values must lie in [0, 1]")

    @property
    def shape(self):
        return self.values.shape


def feature_norm_map(layer) -> np.ndarray:
    """L2 norm across channels at every spatial location."""
    a = np.asarray(layer, dtype=np.float64)
    if a.ndim == 2:
        a = a[None]
    if a.ndim != 3 or a.shape[0] < 1 or a.size == 0:
        raise EmptyInput(f"layer must be a non-empty (C, H, W) array, got {a.shape}")
    return np.sqrt((a * a).sum(axis=0)).astype(DTYPE)


def aggregate_saliency(stack: FeatureStack, target_h: int, target_w: int) -> np.ndarray:
    """Mean over layers of the norm maps, each resized to the target grid."""
    if target_h < 1 or target_w < 1:
        raise EmptyInput("target dims must be positive")
    acc = np.zeros((target_h, target_w), dtype=np.float64)
    for layer in stack.layers:
        acc += bilinear_resize(feature_norm_map(layer), target_h, target_w)
    return (acc / len(stack.layers)).astype(DTYPE)


def finalize_saliency(raw, masks: RegionMasks, blur_size: int = 5,
                      blur_sigma: float = 1.1) -> SaliencyMap:
    """Normalize over the crop, blur, clamp to [0, 1] and zero the holes.

    A flat crop (range below 1e-8) normalizes to 0.5 everywhere in the crop.
    ``blur_size=1`` disables blurring.
    """
    raw = as_map(raw, "raw saliency")
    if raw.shape != masks.shape:
        raise DimensionMismatch(f"raw map {raw.shape} vs masks {masks.shape}")
    if not masks.crop.any():
        raise DegenerateMask("crop mask is empty")
    s = minmax_normalize(raw, masks.crop)
    s = gaussian_blur(s, blur_size, blur_sigma)
    s = np.clip(s, 0.0, 1.0)
    s[masks.holes] = 0.0
    return SaliencyMap(s.astype(DTYPE))


def quantize_values(values, N: int) -> np.ndarray:
    if N < 2:
        raise InvalidLevelCount(f"need at least 2 levels, got {N}")
    v = np.asarray(values, dtype=np.float64)
    # ties go up: 0.875 with N=5 lands on 1.0
    idx = np.floor(v * (N - 1) + 0.5)
    return (np.clip(idx, 0, N - 1) / (N - 1)).astype(DTYPE)


def quantize_saliency(s: SaliencyMap, N: int = 5) -> SaliencyMap:
    return SaliencyMap(quantize_values(s.values, N), levels=N)


def rescale_saliency(s_original: SaliencyMap, lam: float) -> SaliencyMap:
    """``clip(lam * S, 0, 1)``, re-quantized when the input carried levels."""
    if not np.isfinite(lam):
        raise NonFiniteInput(f"lambda must be finite, got {lam}")
    v = np.clip(np.float64(lam) * s_original.values.astype(np.float64), 0.0, 1.0)
    if s_original.levels is not None:
        return SaliencyMap(quantize_values(v, s_original.levels), levels=s_original.levels)
    return SaliencyMap(v.astype(DTYPE))


def synth_features(pattern: str, seed: int, height: int, width: int,
                   channels: int = 3, layers: int = 2, n_blobs: int = 3) -> FeatureStack:
    """Deterministic stand-in for detector features.

    ``blobs`` places Gaussian bumps at seeded integer centres (recorded in
    ``meta["centers"]``), ``checker`` alternates 2x2 cells, and ``ramp``
    grows strictly along x. Every layer has the requested spatial size.
    """
    if height < 1 or width < 1 or channels < 1 or layers < 1:
        raise EmptyInput("synth_features dims must be positive")
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    meta: dict = {"pattern": pattern, "seed": seed}
    if pattern == "blobs":
        cy = rng.integers(0, height, size=n_blobs)
        cx = rng.integers(0, width, size=n_blobs)
        amp = rng.uniform(0.5, 1.5, size=n_blobs)
        width_px = np.maximum(rng.uniform(0.1, 0.25, size=n_blobs) * min(height, width), 0.8)
        base = np.zeros((height, width))
        for y0, x0, a, w in zip(cy, cx, amp, width_px):
            base += a * np.exp(-((ys - y0) ** 2 + (xs - x0) ** 2) / (2 * w * w))
        meta["centers"] = [(int(y0), int(x0)) for y0, x0 in zip(cy, cx)]
    elif pattern == "checker":
        base = (((ys // 2) + (xs // 2)) % 2) + 0.25
    elif pattern == "ramp":
        base = (xs + 1.0) / width
    else:
        raise ValidationError(f"unknown pattern {pattern!r}")
    out = []
    for _ in range(layers):
        w = rng.uniform(0.5, 1.5, size=channels)
        out.append((w[:, None, None] * base[None]).astype(DTYPE))
    return FeatureStack(out, meta)


def saliency_from_features(stack: FeatureStack, masks: RegionMasks, levels: Optional[int] = 5,
                           blur_size: int = 5, blur_sigma: float = 1.1) -> SaliencyMap:
    """Convenience chain: aggregate, finalize and (optionally) quantize."""
    h, w = masks.shape
    s = finalize_saliency(aggregate_saliency(stack, h, w), masks, blur_size, blur_sigma)
    return quantize_saliency(s, levels) if levels else s


def center_box_mask(height: int, width: int, frac: float = 0.5) -> np.ndarray:
    """Centered rectangular mask covering about ``frac`` of each side."""
    mh = max(1, int(round(height * frac)))
    mw = max(1, int(round(width * frac)))
    y0 = (height - mh) // 2
    x0 = (width - mw) // 2
    m = np.zeros((height, width), dtype=bool)
    m[y0:y0 + mh, x0:x0 + mw] = True
    return m
