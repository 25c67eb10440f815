"""Joint attention over output-image and input-image tokens with
saliency-dependent RoPE range and crop-logit scaling.

Keys are the concatenation ``[K_out ; K_in]``. For every query inside the
crop mask, its logits against ``K_in`` are recomputed with both sides
rotated at ``r(S(q))``, and the logits against in-mask keys are multiplied by
``k(S(q))``. Everything else is standard RoPE attention, and the softmax
runs over the full joint row.

Tensors are ``(heads, tokens, head_dim)``; 2-D inputs are treated as a
single head.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    DegenerateMask,
    DimensionMismatch,
    EmptyQuerySet,
    InactiveConfig,
    ZeroOutwardMass,
)
from .modulation import ModulationCurve, identity_curve
from .numerics import DTYPE, matmul, row_entropy, softmax_rows
from .rope import FrequencyTable, PositionGrid, build_frequencies, rotate_tokens
from .saliency import SaliencyMap


def _heads(x, name):
    a = np.asarray(x, dtype=DTYPE)
    if a.ndim == 2:
        a = a[None]
    if a.ndim != 3:
        raise DimensionMismatch(f"{name} must be (heads, T, d) or (T, d), got {a.shape}")
    return a


@dataclass
class AttentionInputs:
    q_out: np.ndarray
    k_out: np.ndarray
    v_out: np.ndarray
    k_in: np.ndarray
    v_in: np.ndarray
    pos_out: PositionGrid
    pos_in: PositionGrid
    crop_mask: np.ndarray
    saliency: Optional[SaliencyMap] = None
    freqs: Optional[FrequencyTable] = None
    theta_base: float = 1e-4

    def __post_init__(self):
        for name in ("q_out", "k_out", "v_out", "k_in", "v_in"):
            setattr(self, name, _heads(getattr(self, name), name))
        h, t_out, d = self.q_out.shape
        t_in = self.k_in.shape[1]
        if d % 4:
            raise DimensionMismatch(f"head_dim {d} must be divisible by 4 for axial RoPE")
        for name, T in (("k_out", t_out), ("v_out", t_out), ("k_in", t_in), ("v_in", t_in)):
            if getattr(self, name).shape != (h, T, d):
                raise DimensionMismatch(f"{name} has shape {getattr(self, name).shape}, expected {(h, T, d)}")
        if self.pos_out.size != t_out or self.pos_in.size != t_in:
            raise DimensionMismatch("position grids do not match token counts")
        if (self.pos_out.height, self.pos_out.width) != (self.pos_in.height, self.pos_in.width):
            raise DimensionMismatch("output and input grids must be aligned")
        self.crop_mask = np.asarray(self.crop_mask, dtype=bool)
        grid = (self.pos_out.height, self.pos_out.width)
        if self.crop_mask.shape != grid:
            raise DimensionMismatch(f"crop mask {self.crop_mask.shape} vs grid {grid}")
        if self.saliency is not None and self.saliency.shape != grid:
            raise DimensionMismatch(f"saliency {self.saliency.shape} vs grid {grid}")
        if self.freqs is None:
            self.freqs = build_frequencies(self.theta_base, d // 4)
        elif self.freqs.D * 4 != d:
            raise DimensionMismatch(f"frequency table D={self.freqs.D} does not fit head_dim {d}")

    @property
    def head_count(self) -> int:
        return self.q_out.shape[0]

    @property
    def head_dim(self) -> int:
        return self.q_out.shape[2]

    @property
    def t_out(self) -> int:
        return self.q_out.shape[1]

    @property
    def crop_queries(self) -> np.ndarray:
        return np.flatnonzero(self.crop_mask.ravel())


@dataclass
class AttentionConfig:
    r_curve: ModulationCurve = field(default_factory=identity_curve)
    k_curve: ModulationCurve = field(default_factory=identity_curve)
    active: bool = True
    scale: Optional[float] = None

    def scale_for(self, d: int) -> float:
        return self.scale if self.scale is not None else 1.0 / np.sqrt(d)


@dataclass
class AttentionOutput:
    context: np.ndarray
    weights: Optional[np.ndarray]
    entropy: np.ndarray
    inward_mass: np.ndarray
    k_in_rotations: int = 0
    t_out: int = 0

    def input_weights(self) -> np.ndarray:
        """Head-averaged weights over ``K_in``, each row renormalized."""
        w = self.weights[..., self.t_out:].astype(np.float64)
        w = w / w.sum(axis=-1, keepdims=True)
        return w.mean(axis=0)


def _finish(inputs: AttentionInputs, logits: np.ndarray, keep_weights: bool,
            rotations: int) -> AttentionOutput:
    w = softmax_rows(logits)
    v = np.concatenate([inputs.v_out, inputs.v_in], axis=1)
    context = matmul(w, v)
    key_mask = inputs.crop_mask.ravel()
    ent = row_entropy(w.reshape(-1, w.shape[-1]), atol=1e-4).reshape(w.shape[:2]).mean(axis=0)
    w_in = w[..., inputs.t_out:].astype(np.float64)
    inward = (w_in[..., key_mask].sum(axis=-1) / w_in.sum(axis=-1)).mean(axis=0)
    return AttentionOutput(context, w if keep_weights else None, ent, inward,
                           rotations, inputs.t_out)


def _baseline_logits(inputs: AttentionInputs, scale: float) -> np.ndarray:
    f = inputs.freqs
    q = rotate_tokens(inputs.q_out, inputs.pos_out, f)
    k = np.concatenate([rotate_tokens(inputs.k_out, inputs.pos_out, f),
                        rotate_tokens(inputs.k_in, inputs.pos_in, f)], axis=1)
    return matmul(q, np.swapaxes(k, -1, -2), out_dtype=np.float64) * scale


def baseline_attention(inputs: AttentionInputs, keep_weights: bool = True) -> AttentionOutput:
    """Standard joint attention with r = 1 everywhere."""
    logits = _baseline_logits(inputs, 1.0 / np.sqrt(inputs.head_dim))
    return _finish(inputs, logits, keep_weights, 0)


def _check(inputs: AttentionInputs, config: AttentionConfig):
    if not config.active:
        raise InactiveConfig("modulated attention called with an inactive config")
    crop = inputs.crop_queries
    if crop.size and inputs.saliency is None:
        raise DimensionMismatch("modulated attention needs a saliency map")
    return crop


def modulated_attention_naive(inputs: AttentionInputs, config: AttentionConfig,
                              keep_weights: bool = True) -> AttentionOutput:
    """Literal per-query loop: rotate, compute logits, scale, update."""
    crop = _check(inputs, config)
    scale = config.scale_for(inputs.head_dim)
    logits = _baseline_logits(inputs, scale)
    coords_out = inputs.pos_out.coords()
    key_mask = inputs.crop_mask.ravel()
    sal = inputs.saliency.values.ravel() if crop.size else None
    rotations = 0
    for h in range(inputs.head_count):
        for qi in crop:
            s = float(sal[qi])
            r = config.r_curve(s)
            k = config.k_curve(s)
            q_r = rotate_tokens(inputs.q_out[h, qi:qi + 1], coords_out[qi:qi + 1], inputs.freqs, r)
            K_r = rotate_tokens(inputs.k_in[h], inputs.pos_in, inputs.freqs, r)
            if h == 0:
                rotations += 1
            w_q = matmul(q_r, K_r.T, out_dtype=np.float64)[0] * scale
            w_q[key_mask] *= k
            logits[h, qi, inputs.t_out:] = w_q
    return _finish(inputs, logits, keep_weights, rotations)


def modulated_attention(inputs: AttentionInputs, config: AttentionConfig,
                        keep_weights: bool = True) -> AttentionOutput:
    """Same result as :func:`modulated_attention_naive`, grouped by range factor.

    ``K_in`` is rotated once per distinct ``r`` among the crop queries, so a
    saliency map quantized to N levels costs at most N rotations per head.
    ``k_in_rotations`` on the output reports that count.
    """
    crop = _check(inputs, config)
    scale = config.scale_for(inputs.head_dim)
    logits = _baseline_logits(inputs, scale)
    if crop.size == 0:
        return _finish(inputs, logits, keep_weights, 0)
    coords_out = inputs.pos_out.coords()
    key_mask = inputs.crop_mask.ravel()
    sal = inputs.saliency.values.ravel()[crop]

    # one curve evaluation per distinct saliency value
    levels, inverse = np.unique(sal, return_inverse=True)
    r_of_level = np.array([config.r_curve(float(s)) for s in levels])
    k_of_level = np.array([config.k_curve(float(s)) for s in levels])
    r_q = r_of_level[inverse]
    k_q = k_of_level[inverse]

    rotations = 0
    for r in np.unique(r_of_level):
        sel = r_q == r
        idx = crop[sel]
        K_r = rotate_tokens(inputs.k_in, inputs.pos_in, inputs.freqs, float(r))
        rotations += 1
        q_r = rotate_tokens(inputs.q_out[:, idx], coords_out[idx], inputs.freqs, float(r))
        w = matmul(q_r, np.swapaxes(K_r, -1, -2), out_dtype=np.float64) * scale
        w[..., key_mask] *= k_q[sel][None, :, None]
        logits[:, idx, inputs.t_out:] = w
    return _finish(inputs, logits, keep_weights, rotations)


def attend(inputs: AttentionInputs, config: Optional[AttentionConfig] = None,
           keep_weights: bool = True) -> AttentionOutput:
    """Dispatch on ``config.active``: modulated when active, baseline otherwise."""
    if config is None or not config.active:
        return baseline_attention(inputs, keep_weights)
    return modulated_attention(inputs, config, keep_weights)


def inward_outward_ratio(weights, mask, query_subset=None) -> float:
    """Attention mass on in-mask keys divided by mass on out-of-mask keys.

    ``weights`` is ``(queries, keys)`` or head-stacked ``(heads, queries,
    keys)``; ``mask`` flags the keys inside the crop. ``query_subset``
    selects rows (indices or boolean mask); all rows by default.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim == 2:
        w = w[None]
    key_mask = np.asarray(mask, dtype=bool).ravel()
    if key_mask.size != w.shape[-1]:
        raise DimensionMismatch(f"mask covers {key_mask.size} keys, weights have {w.shape[-1]}")
    if not key_mask.any():
        raise DegenerateMask("mask selects no keys")
    if query_subset is not None:
        sub = np.asarray(query_subset)
        if sub.dtype == bool:
            sub = np.flatnonzero(sub.ravel())
        w = w[:, sub]
    if w.shape[1] == 0:
        raise EmptyQuerySet("no queries selected")
    inward = 0.0
    outward = 0.0
    for head in w:
        inward += head[:, key_mask].sum()
        outward += head[:, ~key_mask].sum()
    if outward < 1e-12:
        raise ZeroOutwardMass("no attention mass falls outside the mask")
    return float(inward / outward)
