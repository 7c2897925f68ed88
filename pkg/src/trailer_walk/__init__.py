"""Movie-as-graph trailer proposal engine.

A movie becomes a sparse directed graph over its shots; greedy multi-criteria
walks through that graph propose trailer sequences. The package also carries
the verified loss numerics the representation models train with, bundle
ingestion and evaluation tooling, and an interactive HTTP session service.
"""

from .config import EngineConfig, ServiceConfig, default_config, load_config, load_service_config
from .engine import EngineInputs, generate_proposals, prepare, tp_sets_for_bundle
from .evalkit import (
    AnalysisReport,
    analysis_stats,
    overlap_upper_bound,
    partial_agreement,
    trailer_accuracy,
)
from .ingest import (
    AlignmentResult,
    MovieBundle,
    SceneRecord,
    TrailerShot,
    bundle_from_json,
    bundle_to_json,
    canonical_json,
    derive_shot_to_scene,
    dtw_align,
    load_bundle,
    project_scene_labels,
    save_bundle,
    silver_trailer_labels,
)
from .model_core import (
    FlowSchedule,
    MovieGraph,
    ShotRecord,
    SignedSentiment,
    SimilarityParams,
    build_movie_graph,
    build_similarity,
    flow_target,
    flow_targets,
    hops_to,
    normalize_transition,
    sentiment_intensities,
    shortest_hops,
    sparsify,
)
from .numerics import (
    ContrastiveBatch,
    LossReport,
    bidaf_fuse,
    bidaf_fuse_grad,
    cpc_walk_representation,
    info_nce,
    joint_loss,
    kl_prediction_consistency,
    kl_teacher,
    nce_representation,
)
from .service import create_app
from .traversal import (
    CriterionWeights,
    PathStep,
    SpoilerPenalty,
    StepScore,
    TPSets,
    TrailerPath,
    TraversalConfig,
    covered_tps,
    enumerate_degenerate,
    enumerate_proposals,
    rank_proposals,
    step_score,
    traverse,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentResult",
    "AnalysisReport",
    "ContrastiveBatch",
    "CriterionWeights",
    "EngineConfig",
    "EngineInputs",
    "FlowSchedule",
    "LossReport",
    "MovieBundle",
    "MovieGraph",
    "PathStep",
    "SceneRecord",
    "ServiceConfig",
    "ShotRecord",
    "SignedSentiment",
    "SimilarityParams",
    "SpoilerPenalty",
    "StepScore",
    "TPSets",
    "TrailerPath",
    "TrailerShot",
    "TraversalConfig",
    "analysis_stats",
    "bidaf_fuse",
    "bidaf_fuse_grad",
    "build_movie_graph",
    "build_similarity",
    "bundle_from_json",
    "bundle_to_json",
    "canonical_json",
    "covered_tps",
    "cpc_walk_representation",
    "create_app",
    "default_config",
    "derive_shot_to_scene",
    "dtw_align",
    "enumerate_degenerate",
    "enumerate_proposals",
    "flow_target",
    "flow_targets",
    "generate_proposals",
    "hops_to",
    "info_nce",
    "joint_loss",
    "kl_prediction_consistency",
    "kl_teacher",
    "load_bundle",
    "load_config",
    "load_service_config",
    "nce_representation",
    "normalize_transition",
    "overlap_upper_bound",
    "partial_agreement",
    "prepare",
    "project_scene_labels",
    "rank_proposals",
    "save_bundle",
    "sentiment_intensities",
    "shortest_hops",
    "silver_trailer_labels",
    "sparsify",
    "step_score",
    "tp_sets_for_bundle",
    "trailer_accuracy",
    "traverse",
]
