"""Pipeline configuration, stored as a single flat JSON document."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigInvalid, IoError
from .modulation import ModulationCurve, RelaxationSchedule, Stage
from .steering import SteeringPolicy


def _default_relaxation():
    return [
        {"from_timestep": 10, "r_low": 0.9, "k_low": 0.76, "k_high": 1.24},
        {"from_timestep": 18, "r_low": 1.0, "k_low": 0.84, "k_high": 1.17},
    ]


@dataclass
class PipelineConfig:
    # toy model geometry
    height: int = 8
    width: int = 8
    head_count: int = 2
    head_dim: int = 16
    layer_count: int = 4
    theta_base: float = 1e-4
    block_offset: int = 0
    residual_keep: float = 0.9
    # denoising schedule
    total_steps: int = 28
    modulation_window: int = 22
    # modulation curves (initial bounds) and their relaxation
    r_low: float = 0.65
    r_high: float = 1.0
    r_steepness: float = 3.5
    k_low: float = 0.65
    k_high: float = 1.34
    k_steepness: float = 6.5
    curve_center: float = 0.0
    relaxation: list = field(default_factory=_default_relaxation)
    # saliency
    quant_levels: Optional[int] = 5
    blur_size: int = 5
    blur_sigma: float = 1.1
    # steering
    lambda0: float = 0.83
    delta_down: float = 0.045
    delta_up: float = 0.05
    max_tries: int = 4
    eval_timestep: int = 2
    # inputs / outputs
    seed: int = 0
    features: list = field(default_factory=list)
    composite: Optional[str] = None
    crop_mask: Optional[str] = None
    hole_mask: Optional[str] = None
    synth_pattern: str = "blobs"
    crop_fraction: float = 0.5
    weight_trace_steps: list = field(default_factory=list)
    output_dir: Optional[str] = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        counts = ("height", "width", "head_count", "head_dim", "layer_count", "total_steps",
                  "blur_size", "max_tries")
        for name in counts:
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ConfigInvalid(f"{name} must be an integer >= 1, got {v!r}")
        if self.head_dim % 4:
            raise ConfigInvalid("head_dim must be divisible by 4 (axial RoPE)")
        if not 0 <= self.modulation_window <= self.total_steps:
            raise ConfigInvalid("modulation_window must lie in [0, total_steps]")
        if not 0 <= self.eval_timestep < self.total_steps:
            raise ConfigInvalid("eval_timestep must lie in [0, total_steps)")
        if self.quant_levels is not None and self.quant_levels < 2:
            raise ConfigInvalid("quant_levels must be >= 2 or null")
        if not 0 <= self.r_low <= self.r_high <= 1:
            raise ConfigInvalid("need 0 <= r_low <= r_high <= 1")
        if not 0 < self.crop_fraction <= 1:
            raise ConfigInvalid("crop_fraction must lie in (0, 1]")
        try:
            self.schedule()
            self.policy()
        except ValueError as e:
            raise ConfigInvalid(str(e)) from e

    def schedule(self) -> RelaxationSchedule:
        stages = [Stage(0, self.r_low, self.k_low, self.k_high)]
        for st in self.relaxation:
            try:
                stages.append(Stage(int(st["from_timestep"]), float(st["r_low"]),
                                    float(st["k_low"]), float(st["k_high"])))
            except (KeyError, TypeError) as e:
                raise ConfigInvalid(f"bad relaxation stage {st!r}") from e
        for st in stages:
            if not 0 <= st.r_low <= self.r_high:
                raise ConfigInvalid(f"stage r_low {st.r_low} outside [0, r_high]")
        r_curve = ModulationCurve(self.r_low, self.r_high, self.r_steepness,
                                  self.quant_levels, self.curve_center)
        k_curve = ModulationCurve(self.k_low, self.k_high, self.k_steepness,
                                  self.quant_levels, self.curve_center)
        return RelaxationSchedule(tuple(stages), self.total_steps, self.modulation_window,
                                  r_curve, k_curve)

    def policy(self) -> SteeringPolicy:
        return SteeringPolicy(self.lambda0, self.delta_down, self.delta_up,
                              self.max_tries, self.eval_timestep)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2) + "\n"
        if path is not None:
            try:
                Path(path).write_text(text)
            except OSError as e:
                raise IoError(f"cannot write {path}: {e}") from e
        return text

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigInvalid(str(e)) from e

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise IoError(f"cannot read config {path}: {e}") from e
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigInvalid(f"{path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigInvalid("config must be a JSON object")
        return cls.from_dict(data)

    def with_overrides(self, overrides: dict) -> "PipelineConfig":
        data = self.to_dict()
        data.update(overrides)
        return self.from_dict(data)


def parse_override(text: str):
    """``key=value`` where value is JSON if it parses, else a plain string."""
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise ConfigInvalid(f"override must look like key=value, got {text!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value
