"""Two-step mSASSS auto-grading for vertebral-unit X-ray crops.

A bony-bridge gate routes each VU; a two-headed grader scores both
corners; fused 4-grade distributions feed an imbalance-aware metrics
engine with patient-level cross-validation.
"""

from .backends import ClassifierSpec, TrainedClassifier, fit, load_model, save_model
from .cascade import (
    CascadeModel,
    CornerPrediction,
    ScoreDistribution,
    derive_stage1_label,
    fuse_distribution,
    load_cascade,
    predict_corners,
    predict_vu,
    save_cascade,
    select_stage2_training,
    train_cascade,
)
from .errors import (
    AggregationError,
    ConfigurationError,
    ContractError,
    DecodeError,
    LabelingError,
    ReportError,
    SchemaError,
    TrainingError,
    ValidationError,
    VUGradeError,
)
from .metrics import (
    ClassMetrics,
    ConfusionMatrix,
    MetricsReport,
    aggregate_report,
    confusion_matrix,
    crossval_aggregate,
    evaluate_corners,
    f1_score,
    per_class_metrics,
    roc_auc_ovr,
)
from .preprocessing import PreprocessConfig, VUImage, preprocess_image
from .records import (
    CornerSite,
    CorpusStats,
    MSASSSScore,
    Region,
    VURecord,
    corpus_stats,
    load_manifest,
    save_manifest,
)
from .runs import RunConfig, run_crossval, run_single
from .splitting import FoldAssignment, assign_folds, materialize_split
from .synthgen import RenderStyle, SyntheticConfig, generate_corpus, render_vu

__version__ = "0.1.0"

__all__ = [
    "AggregationError",
    "CascadeModel",
    "ClassMetrics",
    "ClassifierSpec",
    "ConfigurationError",
    "ConfusionMatrix",
    "ContractError",
    "CornerPrediction",
    "CornerSite",
    "CorpusStats",
    "DecodeError",
    "FoldAssignment",
    "LabelingError",
    "MSASSSScore",
    "MetricsReport",
    "PreprocessConfig",
    "Region",
    "RenderStyle",
    "ReportError",
    "RunConfig",
    "SchemaError",
    "ScoreDistribution",
    "SyntheticConfig",
    "TrainedClassifier",
    "TrainingError",
    "VUGradeError",
    "VUImage",
    "VURecord",
    "ValidationError",
    "aggregate_report",
    "assign_folds",
    "confusion_matrix",
    "corpus_stats",
    "crossval_aggregate",
    "derive_stage1_label",
    "evaluate_corners",
    "f1_score",
    "fit",
    "fuse_distribution",
    "generate_corpus",
    "load_cascade",
    "load_manifest",
    "load_model",
    "materialize_split",
    "per_class_metrics",
    "predict_corners",
    "predict_vu",
    "preprocess_image",
    "render_vu",
    "roc_auc_ovr",
    "run_crossval",
    "run_single",
    "save_cascade",
    "save_manifest",
    "save_model",
    "select_stage2_training",
    "train_cascade",
]
