"""tanh modulation curves and their per-timestep relaxation.

A curve maps a saliency value ``s`` to

    (tanh((s - center) * G) / 2 + 1/2) * (v_max - v_min) + v_min

With the default ``center=0`` and ``s`` in [0, 1] the output lies in
``[(v_min + v_max) / 2, v_max)``; ``center=0.5`` spans the full range.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import RangeOutOfBounds, TimestepOutOfRange, ValidationError
from .saliency import quantize_values

R_HIGH = 1.0
R_LOW = 0.65
R_STEEPNESS = 3.5
K_HIGH = 1.34
K_LOW = 0.65
K_STEEPNESS = 6.5
QUANT_LEVELS = 5
TOTAL_STEPS = 28
MODULATION_WINDOW = 22


@dataclass(frozen=True)
class ModulationCurve:
    v_min: float
    v_max: float
    G: float
    quant_levels: Optional[int] = None
    center: float = 0.0

    def __post_init__(self):
        if self.v_min > self.v_max:
            raise ValidationError(f"v_min {self.v_min} exceeds v_max {self.v_max}")
        if not self.G > 0:
            raise ValidationError(f"steepness must be positive, got {self.G}")

    def __call__(self, s: float) -> float:
        return eval_curve(self, s)


def eval_curve(curve: ModulationCurve, s: float) -> float:
    s = float(s)
    if not 0.0 <= s <= 1.0:
        raise RangeOutOfBounds(f"saliency must lie in [0, 1], got {s}")
    if curve.quant_levels is not None:
        s = float(quantize_values(np.float64(s), curve.quant_levels))
    t = math.tanh((s - curve.center) * curve.G)
    return (t / 2 + 0.5) * (curve.v_max - curve.v_min) + curve.v_min


def identity_curve() -> ModulationCurve:
    """Constant 1: no range change, no logit scaling."""
    return ModulationCurve(1.0, 1.0, 1.0)


def default_r_curve(**kw) -> ModulationCurve:
    return ModulationCurve(R_LOW, R_HIGH, R_STEEPNESS, **kw)


def default_k_curve(**kw) -> ModulationCurve:
    return ModulationCurve(K_LOW, K_HIGH, K_STEEPNESS, **kw)


@dataclass(frozen=True)
class Stage:
    from_timestep: int
    r_low: float
    k_low: float
    k_high: float


DEFAULT_STAGES = (
    Stage(0, R_LOW, K_LOW, K_HIGH),
    Stage(10, 0.9, 0.76, 1.24),
    Stage(18, 1.0, 0.84, 1.17),
)


@dataclass(frozen=True)
class RelaxationSchedule:
    """Stage ``i`` applies from its ``from_timestep`` up to the next stage.

    ``r_curve``/``k_curve`` supply steepness, r_high, centre and quantization;
    stages only override the bounds.
    """

    stages: tuple = DEFAULT_STAGES
    total_steps: int = TOTAL_STEPS
    modulation_window: int = MODULATION_WINDOW
    r_curve: ModulationCurve = field(default_factory=default_r_curve)
    k_curve: ModulationCurve = field(default_factory=default_k_curve)

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        starts = [st.from_timestep for st in self.stages]
        if not starts or starts != sorted(starts) or starts[0] != 0:
            raise ValidationError("stages must be sorted and start at timestep 0")
        if not 0 <= self.modulation_window <= self.total_steps:
            raise ValidationError("modulation window must lie within [0, total_steps]")
        if self.total_steps < 1:
            raise ValidationError("total_steps must be >= 1")

    def stage_at(self, t: int) -> Stage:
        current = self.stages[0]
        for st in self.stages:
            if st.from_timestep <= t:
                current = st
        return current


def schedule_params(schedule: RelaxationSchedule, t: int):
    """Return ``(r_curve, k_curve, active)`` in effect at timestep ``t``."""
    if not 0 <= t < schedule.total_steps:
        raise TimestepOutOfRange(f"timestep {t} outside [0, {schedule.total_steps})")
    st = schedule.stage_at(t)
    r_curve = replace(schedule.r_curve, v_min=st.r_low)
    k_curve = replace(schedule.k_curve, v_min=st.k_low, v_max=st.k_high)
    return r_curve, k_curve, t < schedule.modulation_window
