"""Segment-level reliability scoring and mask correction for semantic segmentation.

The package turns a softmax probability map into per-segment uncertainty
scores via a trained meta-classifier, and uses those scores to remove or
relabel unreliable segments in the predicted mask.
"""

from .correction import CorrectionOutcome, best_threshold, correct_mask, sweep_threshold
from .data import (
    DatasetManifest,
    FeatureTensor,
    ManifestEntry,
    ProbabilityMap,
    SegmentationMask,
    argmax_mask,
    read_manifest,
    read_mask,
    read_probability_map,
    write_manifest,
    write_mask,
    write_probability_map,
)
from .errors import (
    ConfigurationError,
    EvaluationError,
    FormatError,
    SegqcError,
    TrainingError,
    ValidationError,
)
from .evaluation import EvalReport, auroc, binned_quality, build_report, delta_miou_report, pearson, precision_recall
from .features import FeatureSetSpec, aggregate_segment_features, design_matrix, make_feature_spec
from .geometry import Segment, SegmentDecomposition, decompose, neighbor_segments, split_boundary_inner
from .models import (
    GbdtModel,
    LogisticModel,
    TrainReport,
    default_grid,
    deserialize_model,
    score,
    score_records,
    serialize_model,
    train_gbdt,
    train_logistic,
)
from .quality import ImageQuality, SegmentQuality, image_quality, matched_gt_union, segment_iou, segment_iou_adj, segment_precision, segment_quality
from .records import SegmentRecord, read_records_csv, read_records_jsonl, write_records_csv, write_records_jsonl
from .synthetic import SynthConfig, generate_corpus, generate_image
from .uncertainty import (
    UncertaintyHeatmaps,
    compute_heatmaps,
    gradient_norm,
    normalized_entropy,
    one_minus_max_prob,
    top2_margin,
)

__version__ = "0.1.0"
