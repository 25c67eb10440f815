"""Slow scalar reference implementations used as independent test oracles.

Nothing here imports from the package: every routine is a direct loop over
the defining formula.
"""
import math

import numpy as np


def matmul_loops(a, b):
    n, k = len(a), len(a[0])
    m = len(b[0])
    out = [[0.0] * m for _ in range(n)]
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for t in range(k):
                acc += float(a[i][t]) * float(b[t][j])
            out[i][j] = acc
    return np.array(out)


def softmax_loop(row):
    mx = max(row)
    ex = [math.exp(v - mx) for v in row]
    s = sum(ex)
    return [e / s for e in ex]


def bilinear_loop(m, out_h, out_w):
    h, w = len(m), len(m[0])
    out = np.zeros((out_h, out_w))
    for i in range(out_h):
        sy = min(max((i + 0.5) * h / out_h - 0.5, 0.0), h - 1)
        y0 = int(math.floor(sy))
        y1 = min(y0 + 1, h - 1)
        fy = sy - y0
        for j in range(out_w):
            sx = min(max((j + 0.5) * w / out_w - 0.5, 0.0), w - 1)
            x0 = int(math.floor(sx))
            x1 = min(x0 + 1, w - 1)
            fx = sx - x0
            top = m[y0][x0] * (1 - fx) + m[y0][x1] * fx
            bot = m[y1][x0] * (1 - fx) + m[y1][x1] * fx
            out[i, j] = top * (1 - fy) + bot * fy
    return out


def norm_map_loop(layer):
    c, h, w = layer.shape
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            out[y, x] = math.sqrt(sum(float(layer[ch, y, x]) ** 2 for ch in range(c)))
    return out


def freqs_loop(theta_base, D):
    if D == 1:
        return [1.0]
    return [theta_base ** (d / (D - 1)) for d in range(D)]


def rotate_loop(vec, x, y, freqs, r):
    """Axial rotation with explicit 2x2 matrices; x drives the first half."""
    D = len(freqs)
    out = list(map(float, vec))
    for half, m in ((0, x), (1, y)):
        for d in range(D):
            i = 2 * (half * D + d)
            ang = freqs[d] * r * m
            c, s = math.cos(ang), math.sin(ang)
            a, b = out[i], out[i + 1]
            out[i] = c * a - s * b
            out[i + 1] = s * a + c * b
    return out


def tanh_curve(s, v_min, v_max, G, levels=None):
    if levels:
        s = math.floor(s * (levels - 1) + 0.5) / (levels - 1)
    return (math.tanh(s * G) / 2 + 0.5) * (v_max - v_min) + v_min


def attention_loop(q_out, k_out, v_out, k_in, v_in, H, W, theta_base, mask=None,
                   saliency=None, r_fn=None, k_fn=None):
    """Joint attention for one head, literally following the per-query recipe.

    With ``mask`` given, crop queries get their K_in logits recomputed at
    ``r_fn(S(q))`` and in-mask logits multiplied by ``k_fn(S(q))``.
    """
    T, d = q_out.shape
    freqs = freqs_loop(theta_base, d // 4)
    pos = [(i % W, i // W) for i in range(T)]
    scale = 1.0 / math.sqrt(d)

    def rot(v, i, r=1.0):
        return rotate_loop(v, pos[i][0], pos[i][1], freqs, r)

    qs = [rot(q_out[i], i) for i in range(T)]
    keys = [rot(k_out[i], i) for i in range(T)] + [rot(k_in[i], i) for i in range(T)]
    vals = [list(map(float, v)) for v in v_out] + [list(map(float, v)) for v in v_in]
    flat_mask = None if mask is None else [bool(b) for b in np.asarray(mask).ravel()]
    flat_sal = None if saliency is None else [float(s) for s in np.asarray(saliency).ravel()]
    ctx = np.zeros((T, d))
    weights = np.zeros((T, 2 * T))
    for i in range(T):
        logits = [sum(a * b for a, b in zip(qs[i], k)) * scale for k in keys]
        if flat_mask is not None and flat_mask[i]:
            r = r_fn(flat_sal[i])
            kk = k_fn(flat_sal[i])
            qr = rot(q_out[i], i, r)
            for j in range(T):
                kr = rot(k_in[j], j, r)
                val = sum(a * b for a, b in zip(qr, kr)) * scale
                if flat_mask[j]:
                    val *= kk
                logits[T + j] = val
        w = softmax_loop(logits)
        weights[i] = w
        for j, wj in enumerate(w):
            for c in range(d):
                ctx[i, c] += wj * vals[j][c]
    return ctx, weights


def ratio_loop(weights, mask, queries):
    inward = 0.0
    outward = 0.0
    for q in queries:
        for k in range(len(mask)):
            if mask[k]:
                inward += weights[q][k]
            else:
                outward += weights[q][k]
    return inward / outward
