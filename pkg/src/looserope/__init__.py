"""Saliency-guided loosening of rotary position embeddings for
crop-and-paste harmonization, at desk scale."""

from .attention import (
    AttentionConfig,
    AttentionInputs,
    AttentionOutput,
    attend,
    baseline_attention,
    inward_outward_ratio,
    modulated_attention,
    modulated_attention_naive,
)
from .config import PipelineConfig
from .modulation import (
    ModulationCurve,
    RelaxationSchedule,
    Stage,
    eval_curve,
    identity_curve,
    default_k_curve,
    default_r_curve,
    schedule_params,
)
from .pipeline import ToyPipeline, render_attention_map, run_pipeline, steer_pipeline, x0_snapshot
from .rope import FrequencyTable, PositionGrid, build_frequencies, rotate_query_key_pair, rotate_tokens
from .saliency import (
    FeatureStack,
    RegionMasks,
    SaliencyMap,
    aggregate_saliency,
    feature_norm_map,
    finalize_saliency,
    quantize_saliency,
    rescale_saliency,
    synth_features,
)
from .steering import (
    ExternalCommandOracle,
    ScriptedOracle,
    SteeringPolicy,
    ThresholdOracle,
    Verdict,
    steering_loop,
    update_lambda,
)

__version__ = "0.1.0"
