"""
Saliency-aware joint attention
==============================

Output tokens attend over [K_out ; K_in]. Queries inside the crop get their
input-image logits recomputed with a saliency-dependent range factor r(S)
and scaled by k(S) inside the crop. Low saliency (backgrounds) means small
r and k, so those queries look outward; salient queries keep tight focus.
"""
import numpy as np

from looserope import (AttentionConfig, AttentionInputs, PositionGrid, SaliencyMap,
                       baseline_attention, inward_outward_ratio, modulated_attention,
                       modulated_attention_naive, default_k_curve, default_r_curve)
from looserope.saliency import center_box_mask, quantize_values

rng = np.random.default_rng(7)
H = W = 8
T, d = H * W, 32
blocks = [rng.standard_normal((2, T, d)).astype(np.float32) for _ in range(5)]
crop = center_box_mask(H, W, 0.5)
grid = PositionGrid(H, W)

for level in (0.0, 1.0):
    sal = SaliencyMap(np.where(crop, level, 0.0).astype(np.float32), 5)
    inputs = AttentionInputs(*blocks, grid, grid, crop, sal)
    cfg = AttentionConfig(default_r_curve(quant_levels=5), default_k_curve(quant_levels=5))
    out = modulated_attention(inputs, cfg)
    ratio = inward_outward_ratio(out.input_weights(), crop, crop.ravel())
    print(f"saliency {level:.0f}: r = {cfg.r_curve(level):.3f}  k = {cfg.k_curve(level):.3f}  "
          f"inward/outward = {ratio:.3f}")

base = baseline_attention(inputs)
print(f"baseline: inward/outward = "
      f"{inward_outward_ratio(base.input_weights(), crop, crop.ravel()):.3f}")

# the grouped fast path rotates K_in once per distinct r, the literal loop once per crop query
sal = SaliencyMap(quantize_values(rng.random((H, W)), 5), 5)
inputs = AttentionInputs(*blocks, grid, grid, crop, sal)
fast = modulated_attention(inputs, cfg)
slow = modulated_attention_naive(inputs, cfg)
print("max |fast - naive| =", float(np.abs(fast.context - slow.context).max()))
print("K_in rotations: fast", fast.k_in_rotations, "naive", slow.k_in_rotations)
