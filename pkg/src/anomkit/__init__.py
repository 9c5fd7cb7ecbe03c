"""anomkit: structured semantic-anomaly annotation, screening, and evaluation."""

from .records import (
    DEFAULT_THRESHOLDS,
    AnomalyRecord,
    Decision,
    ImageAnnotation,
    PredictionSet,
    Provenance,
    SchemaError,
    SimilarityConfig,
    SourceLabel,
    ThresholdSet,
    Verdict,
    View,
    load_annotations,
    load_predictions,
    load_verdicts,
    make_verdict,
    save_annotations,
    save_predictions,
    save_verdicts,
)
from .parsing import (
    ParseReport,
    format_structured_list,
    parse_source_answer,
    parse_structured_list,
)
from .similarity import (
    RemoteScoreBackend,
    ScoringError,
    SimilarityBackend,
    SurrogateBackend,
    ViewScore,
    surrogate_score,
    view_similarity,
)
from .matching import (
    ClassifiedReport,
    ConfidenceMode,
    EvaluationError,
    MatchResult,
    MetricsReport,
    RankedPrediction,
    ap_of_match,
    evaluate,
    evaluate_classified,
    f1_of_match,
    match_image,
    rank_predictions,
)
from .auditing import (
    DatasetStats,
    GeneratorAudit,
    ImageAudit,
    audit_generator,
    audit_image,
    dataset_stats,
)
from .review import ReviewQueue, ReviewSession, create_app, finalize

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_THRESHOLDS",
    "AnomalyRecord",
    "Decision",
    "ImageAnnotation",
    "PredictionSet",
    "Provenance",
    "SchemaError",
    "SimilarityConfig",
    "SourceLabel",
    "ThresholdSet",
    "Verdict",
    "View",
    "load_annotations",
    "load_predictions",
    "load_verdicts",
    "make_verdict",
    "save_annotations",
    "save_predictions",
    "save_verdicts",
    "ParseReport",
    "format_structured_list",
    "parse_source_answer",
    "parse_structured_list",
    "RemoteScoreBackend",
    "ScoringError",
    "SimilarityBackend",
    "SurrogateBackend",
    "ViewScore",
    "surrogate_score",
    "view_similarity",
    "ClassifiedReport",
    "ConfidenceMode",
    "EvaluationError",
    "MatchResult",
    "MetricsReport",
    "RankedPrediction",
    "ap_of_match",
    "evaluate",
    "evaluate_classified",
    "f1_of_match",
    "match_image",
    "rank_predictions",
    "DatasetStats",
    "GeneratorAudit",
    "ImageAudit",
    "audit_generator",
    "audit_image",
    "dataset_stats",
    "ReviewQueue",
    "ReviewSession",
    "create_app",
    "finalize",
    "__version__",
]
