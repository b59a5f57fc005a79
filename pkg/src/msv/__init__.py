"""Minimal sufficient views: disjoint evidence regions for black-box classifiers.

The package finds, for one input and one classifier, a set of pairwise
disjoint minimal image regions that each preserve the predicted class on
their own, and aggregates the per-image region counts into a label-free
model-quality metric.
"""

from .core import (
    Baseline,
    InputTensor,
    MsvSet,
    Prediction,
    View,
    is_sufficient,
    mask_input,
)
from .errors import (
    BackendError,
    GreedyRunError,
    InputError,
    MsvError,
    OracleLimitError,
    ParameterError,
    ShapeMismatchError,
    SiteIndexError,
)
from .greedy import (
    GreedyConfig,
    GreedyResult,
    LevelRecord,
    MsvRunTrace,
    estimate_msv,
    greedy_msvs,
    query_count,
)
from .metrics import (
    AccuracyByCountTable,
    ImageRecord,
    MetricRanking,
    MetricSummary,
    accuracy_by_count,
    bootstrap_mean_interval,
    proportion_ci_half_width,
    rank_models,
    score_image,
    spearman,
    summarize_records,
)
from .models import (
    BoxBrightnessDetector,
    Classifier,
    ConstantClassifier,
    DetectionAdapter,
    OverlapEvidenceClassifier,
    PatchEvidenceClassifier,
    SinglePixelClassifier,
    TemperatureWrapper,
    evidence_count,
)
from .oracle import (
    OracleLimit,
    OracleVerdict,
    enumerate_minimal_sufficient,
    verify_greedy_against_oracle,
)
from .split import SplitStrategy, derive_seed, split
from .validity import (
    ValidationReport,
    is_beta_split_minimal,
    is_valid_msv_set,
    validate_greedy_result,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyByCountTable",
    "BackendError",
    "Baseline",
    "BoxBrightnessDetector",
    "Classifier",
    "ConstantClassifier",
    "DetectionAdapter",
    "GreedyConfig",
    "GreedyResult",
    "GreedyRunError",
    "ImageRecord",
    "InputError",
    "InputTensor",
    "LevelRecord",
    "MetricRanking",
    "MetricSummary",
    "MsvError",
    "MsvRunTrace",
    "MsvSet",
    "OracleLimit",
    "OracleLimitError",
    "OracleVerdict",
    "OverlapEvidenceClassifier",
    "ParameterError",
    "PatchEvidenceClassifier",
    "Prediction",
    "ShapeMismatchError",
    "SinglePixelClassifier",
    "SiteIndexError",
    "SplitStrategy",
    "TemperatureWrapper",
    "ValidationReport",
    "View",
    "accuracy_by_count",
    "bootstrap_mean_interval",
    "derive_seed",
    "enumerate_minimal_sufficient",
    "estimate_msv",
    "evidence_count",
    "greedy_msvs",
    "is_beta_split_minimal",
    "is_sufficient",
    "is_valid_msv_set",
    "mask_input",
    "proportion_ci_half_width",
    "query_count",
    "rank_models",
    "score_image",
    "spearman",
    "split",
    "summarize_records",
    "validate_greedy_result",
    "verify_greedy_against_oracle",
]
