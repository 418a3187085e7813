"""Speaker embedding-based identity reassignment for intermittent, moving speakers."""

__version__ = "0.1.0"

from .beamforming import beamform_ds, beamform_ideal, beamform_mvdr, steering_vector
from .embedding import (
    Embedding,
    EnrollmentPool,
    build_enrollment,
    cosine,
    embed,
    load_embeddings,
    save_embeddings,
)
from .fragments import DurationPolicy, Fragment, extraction_window, segment
from .geometry import DoA, angular_distance
from .metrics import (
    FrameMatching,
    MetricsReport,
    SceneMetrics,
    aggregate_report,
    assa,
    evaluate_scene,
    le,
    match_frames,
    swap_frag_rates,
)
from .reassignment import AssignmentResult, PipelineResult, reassign, run_pipeline
from .scene import (
    FoaSignal,
    Scene,
    SceneSpec,
    SpeakerGroundTruth,
    VoiceParams,
    encode_foa,
    generate_diffuse_noise,
    generate_scene,
    simulate,
    synthesize_voice,
)
from .tracking import (
    NoiseModel,
    ObservationFrame,
    TrackerConfig,
    Trajectory,
    observe_est,
    observe_gt,
    track,
)

__all__ = [
    "AssignmentResult",
    "DoA",
    "DurationPolicy",
    "Embedding",
    "EnrollmentPool",
    "FoaSignal",
    "FrameMatching",
    "Fragment",
    "MetricsReport",
    "NoiseModel",
    "ObservationFrame",
    "PipelineResult",
    "Scene",
    "SceneMetrics",
    "SceneSpec",
    "SpeakerGroundTruth",
    "TrackerConfig",
    "Trajectory",
    "VoiceParams",
    "aggregate_report",
    "angular_distance",
    "assa",
    "beamform_ds",
    "beamform_ideal",
    "beamform_mvdr",
    "build_enrollment",
    "cosine",
    "embed",
    "encode_foa",
    "evaluate_scene",
    "extraction_window",
    "generate_diffuse_noise",
    "generate_scene",
    "le",
    "load_embeddings",
    "match_frames",
    "observe_est",
    "observe_gt",
    "reassign",
    "run_pipeline",
    "save_embeddings",
    "segment",
    "simulate",
    "steering_vector",
    "swap_frag_rates",
    "synthesize_voice",
    "track",
]
