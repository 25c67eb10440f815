"""Toy multi-step, multi-layer harness around the attention kernels.

The frozen editing backbone is replaced by seeded random projections and a
fixed residual mix ``state <- keep * state + (1 - keep) * context``. It does
not generate images; it exists to drive the schedule and the steering loop
across many timesteps and layers.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .attention import AttentionConfig, AttentionInputs, attend, inward_outward_ratio
from .config import PipelineConfig
from .errors import DimensionMismatch, IndexOutOfRange, ZeroOutwardMass
from .formats import (
    read_map,
    read_mask,
    read_tnsr,
    to_gray8,
    write_jsonl,
    write_pfm,
    write_pgm,
    write_tnsr,
)
from .modulation import schedule_params
from .numerics import DTYPE, matmul, minmax_normalize
from .rope import PositionGrid, build_frequencies
from .saliency import (
    FeatureStack,
    RegionMasks,
    SaliencyMap,
    aggregate_saliency,
    center_box_mask,
    finalize_saliency,
    quantize_saliency,
    rescale_saliency,
    synth_features,
)
from .steering import steering_loop


def x0_snapshot(state, height: int, width: int) -> np.ndarray:
    """Per-token L2 norm on the grid, min-max scaled (flat state gives 0.5)."""
    s = np.asarray(state, dtype=np.float64)
    norms = np.sqrt((s * s).sum(axis=-1)).reshape(height, width)
    return minmax_normalize(norms)


def render_attention_map(weights, query_index: int, height: int, width: int,
                         path=None) -> np.ndarray:
    """Gray-scale image of one query's attention over the input-image keys.

    ``weights`` rows may cover only ``K_in`` or the joint ``[K_out ; K_in]``;
    in the latter case the trailing ``height * width`` columns are used.
    A head axis, if present, is averaged.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim == 3:
        w = w.mean(axis=0)
    if not 0 <= query_index < w.shape[0]:
        raise IndexOutOfRange(f"query {query_index} outside [0, {w.shape[0]})")
    row = w[query_index, -height * width:]
    img = to_gray8(minmax_normalize(row.reshape(height, width)))
    if path is not None:
        write_pgm(path, img)
    return img


def load_feature_stack(paths) -> FeatureStack:
    layers = []
    for p in paths:
        a = read_tnsr(p)
        if a.ndim == 4:
            layers.extend(list(a))
        else:
            layers.append(a)
    return FeatureStack(layers)


@dataclass
class PipelineResult:
    state: np.ndarray
    diagnostics: list
    saliency: SaliencyMap
    lam: float
    weight_traces: dict = field(default_factory=dict)


class ToyPipeline:
    """Holds the fixed parts of a run: weights, input tokens, masks, saliency.

    Calling the pipeline with a saliency map starts a fresh :class:`PipelineRun`,
    so the object can be handed to the steering loop as its runner.
    """

    def __init__(self, config: PipelineConfig):
        self.config = config
        c = config
        self.grid = PositionGrid(c.height, c.width)
        self.grid_in = PositionGrid(c.height, c.width, c.block_offset)
        self.freqs = build_frequencies(c.theta_base, c.head_dim // 4)
        self.schedule = c.schedule()
        self.d_model = c.head_count * c.head_dim

        crop = read_mask(c.crop_mask) if c.crop_mask else center_box_mask(c.height, c.width, c.crop_fraction)
        holes = read_mask(c.hole_mask) if c.hole_mask else None
        self.masks = RegionMasks(crop, holes)

        if c.features:
            stack = load_feature_stack(c.features)
        else:
            stack = synth_features(c.synth_pattern, c.seed, c.height, c.width)
        raw = aggregate_saliency(stack, c.height, c.width)
        self.raw_saliency = raw
        s = finalize_saliency(raw, self.masks, c.blur_size, c.blur_sigma)
        self.s_original = quantize_saliency(s, c.quant_levels) if c.quant_levels else s
        self.composite = read_map(c.composite) if c.composite else minmax_normalize(raw)
        if self.composite.shape != (c.height, c.width):
            raise DimensionMismatch(f"composite {self.composite.shape} vs grid {(c.height, c.width)}")

        rng = np.random.default_rng([c.seed, 0])
        scale = 1.0 / np.sqrt(self.d_model)
        self.layers = []
        for _ in range(c.layer_count):
            wq, wk, wv = (rng.standard_normal((self.d_model, self.d_model)) * scale for _ in range(3))
            self.layers.append(tuple(w.astype(DTYPE) for w in (wq, wk, wv)))
        direction = rng.standard_normal(self.d_model)
        texture = rng.standard_normal((self.grid.size, self.d_model)) * 0.5
        self.in_tokens = (np.outer(self.composite.ravel(), direction) + texture).astype(DTYPE)
        # input-image keys/values never change across timesteps
        self.in_kv = [(self._heads(matmul(self.in_tokens, wk)), self._heads(matmul(self.in_tokens, wv)))
                      for _, wk, wv in self.layers]

    def _heads(self, x: np.ndarray) -> np.ndarray:
        T = x.shape[0]
        return x.reshape(T, self.config.head_count, self.config.head_dim).transpose(1, 0, 2)

    def initial_state(self) -> np.ndarray:
        rng = np.random.default_rng([self.config.seed, 1])
        return rng.standard_normal((self.grid.size, self.d_model)).astype(DTYPE)

    def start(self, saliency: Optional[SaliencyMap] = None, lam: Optional[float] = None) -> "PipelineRun":
        if lam is None:
            lam = self.config.lambda0
        if saliency is None:
            saliency = rescale_saliency(self.s_original, lam)
        return PipelineRun(self, saliency, lam)

    __call__ = start


class PipelineRun:
    def __init__(self, pipeline: ToyPipeline, saliency: SaliencyMap, lam: float):
        self.p = pipeline
        self.saliency = saliency
        self.lam = lam
        self.t = 0
        self.state = pipeline.initial_state()
        self.diagnostics: list = []
        self.weight_traces: dict = {}
        self._last_ratios: list = []

    def step(self) -> None:
        p, c = self.p, self.p.config
        r_curve, k_curve, active = schedule_params(p.schedule, self.t)
        cfg = AttentionConfig(r_curve, k_curve, active)
        crop = p.masks.crop
        ratios = []
        for li, (wq, wk, wv) in enumerate(p.layers):
            k_in, v_in = p.in_kv[li]
            inputs = AttentionInputs(
                p._heads(matmul(self.state, wq)), p._heads(matmul(self.state, wk)),
                p._heads(matmul(self.state, wv)), k_in, v_in, p.grid, p.grid_in, crop,
                self.saliency, p.freqs)
            out = attend(inputs, cfg)
            if self.t in c.weight_trace_steps:
                self.weight_traces[(self.t, li)] = out.weights
            context = out.context.transpose(1, 0, 2).reshape(-1, p.d_model)
            self.state = (c.residual_keep * self.state + (1.0 - c.residual_keep) * context).astype(DTYPE)
            try:
                ratio = inward_outward_ratio(out.input_weights(), crop, crop.ravel())
            except ZeroOutwardMass:
                ratio = None
            ratios.append(ratio)
            self.diagnostics.append({
                "t": self.t,
                "layer": li,
                "active": bool(active),
                "lambda": self.lam,
                "ratio": ratio,
                "crop_entropy": float(out.entropy[crop.ravel()].mean()),
                "r_low": r_curve.v_min,
                "k_low": k_curve.v_min,
                "k_high": k_curve.v_max,
                "k_in_rotations": out.k_in_rotations,
            })
        self._last_ratios = ratios
        self.t += 1

    def advance_to(self, t: int) -> None:
        t = min(t, self.p.config.total_steps)
        while self.t < t:
            self.step()

    def snapshot(self) -> np.ndarray:
        return x0_snapshot(self.state, self.p.config.height, self.p.config.width)

    def ratio(self) -> Optional[float]:
        vals = [r for r in self._last_ratios if r is not None]
        return float(np.mean(vals)) if vals else None

    def finish(self) -> PipelineResult:
        self.advance_to(self.p.config.total_steps)
        return PipelineResult(self.state, self.diagnostics, self.saliency, self.lam,
                              self.weight_traces)


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """Full run at the configured lambda, no steering."""
    return ToyPipeline(config).start().finish()


def steer_pipeline(config: PipelineConfig, oracle, snapshot_dir=None):
    pipe = ToyPipeline(config)
    return steering_loop(pipe, oracle, config.policy(), pipe.s_original,
                         snapshot_dir=snapshot_dir, composite_path=config.composite)


def write_outputs(result: PipelineResult, out_dir) -> dict:
    """Write state, saliency, snapshot, diagnostics and weight traces.

    Returns ``{filename: sha256 hex digest}`` for every file written.
    """
    out = Path(out_dir)
    h, w = result.saliency.shape
    files = {
        "state.tnsr": lambda p: write_tnsr(p, result.state),
        "saliency.pfm": lambda p: write_pfm(p, result.saliency.values),
        "x0.pgm": lambda p: write_pgm(p, to_gray8(x0_snapshot(result.state, h, w))),
        "diagnostics.jsonl": lambda p: write_jsonl(p, result.diagnostics),
    }
    for (t, layer), weights in sorted(result.weight_traces.items()):
        files[f"weights_t{t:02d}_l{layer:02d}.tnsr"] = (lambda wts: lambda p: write_tnsr(p, wts))(weights)
    digests = {}
    for name, writer in files.items():
        writer(out / name)
        digests[name] = hashlib.sha256((out / name).read_bytes()).hexdigest()
    return digests
