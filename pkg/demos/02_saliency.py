"""
From feature maps to a quantized saliency map
=============================================

Feature-norm maps from several layers are resized to the token grid and
averaged, normalized inside the crop, smoothed, and snapped to 5 levels.
Hole pixels (where a same-image crop was cut from) stay at zero.
"""
import numpy as np

from looserope import (RegionMasks, aggregate_saliency, finalize_saliency, quantize_saliency,
                       rescale_saliency, synth_features)
from looserope.saliency import center_box_mask

H = W = 12
stack = synth_features("blobs", seed=0, height=24, width=24)
print("layers:", [l.shape for l in stack.layers])

raw = aggregate_saliency(stack, H, W)
crop = center_box_mask(H, W, 0.5)
# the object was moved here from the top-left corner, leaving a hole behind
holes = np.zeros((H, W), bool)
holes[0:3, 0:3] = True

s = finalize_saliency(raw, RegionMasks(crop, holes))
q = quantize_saliency(s, 5)
np.set_printoptions(precision=2, suppress=True)
print("smoothed saliency:\n", s.values)
print("quantized levels:", np.unique(q.values))
print("holes all zero:", bool(np.all(q.values[holes] == 0)))

# steering rescales the map by lambda and re-quantizes
# steering rescales the map by lambda and re-quantizes; only the upper levels move
for lam in (0.74, 0.83, 0.98):
    print(f"lambda = {lam}: levels", np.unique(rescale_saliency(q, lam).values))
