"""
Loosening rotary positions with a range factor
==============================================

A query/key pair rotated at positions m and n only sees m - n. Multiplying
every angle by r < 1 shrinks that distance, so a query "sees" its
neighbourhood as closer than it is and attention spreads out.
"""
import numpy as np

from looserope import (AttentionConfig, AttentionInputs, ModulationCurve, PositionGrid,
                       SaliencyMap, build_frequencies, modulated_attention, rotate_tokens)

# one frequency table per head: theta_d = base ** (d / (D - 1))
freqs = build_frequencies(1e-4, 8)
print("frequencies:", np.round(freqs.frequencies, 5))

rng = np.random.default_rng(0)
q = rng.standard_normal((1, 32)).astype(np.float32)

# rotating at r * m is the same as rotating at m with range factor r
m = np.array([[12.0, 3.0]])
a = rotate_tokens(q, m, freqs, r=0.65)
b = rotate_tokens(q, 0.65 * m, freqs, r=1.0)
print("max |rotate(m, r) - rotate(r m, 1)| =", float(np.abs(a - b).max()))

# content-free profile on a 1x64 strip: all tokens identical, only position matters
L = 64
unit = np.tile(np.array([1.0, 0.0], np.float32), 16)
blocks = [np.tile(unit, (L, 1)) for _ in range(5)]
inputs = AttentionInputs(*blocks, PositionGrid(1, L), PositionGrid(1, L), np.ones((1, L), bool),
                         SaliencyMap(np.ones((1, L))))


def fwhm(p):
    c = int(np.argmax(p))
    lo = hi = c
    while lo > 0 and p[lo - 1] >= p[c] / 2:
        lo -= 1
    while hi < len(p) - 1 and p[hi + 1] >= p[c] / 2:
        hi += 1
    return hi - lo + 1


for r in (1.0, 0.9, 0.8, 0.65):
    cfg = AttentionConfig(ModulationCurve(r, r, 1), ModulationCurve(1, 1, 1))
    row = modulated_attention(inputs, cfg).weights[0, L // 2, L:]
    print(f"r = {r:4.2f}   FWHM = {fwhm(row):2d} tokens   peak = {row.max():.4f}")
