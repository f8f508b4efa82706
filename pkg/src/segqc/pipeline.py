"""Per-image orchestration shared by the CLI subcommands.

Images are processed independently; `run_parallel` fans work out over a
thread pool and returns results in input order, so the thread count never
changes any output.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .correction import CorrectionOutcome, correct_mask
from .data import (
    DatasetManifest,
    FeatureTensor,
    ManifestEntry,
    ProbabilityMap,
    SegmentationMask,
    argmax_mask,
    read_feature_tensor,
    read_mask,
    read_probability_map,
)
from .errors import ValidationError
from .features import FeatureSetSpec, aggregate_segment_features, make_feature_spec
from .geometry import SegmentDecomposition, decompose
from .quality import segment_quality
from .records import SegmentRecord
from .uncertainty import UncertaintyHeatmaps, compute_heatmaps

TAU_P_DEFAULT = 0.5


@dataclass
class LoadedImage:
    entry: ManifestEntry
    probs: ProbabilityMap
    pred: SegmentationMask
    gt: SegmentationMask | None
    features: FeatureTensor | None


@dataclass
class ImageAnalysis:
    image: LoadedImage
    heatmaps: UncertaintyHeatmaps
    decomp: SegmentDecomposition
    records: list[SegmentRecord]


def load_image(manifest: DatasetManifest, entry: ManifestEntry) -> LoadedImage:
    probs = read_probability_map(manifest.resolve(entry.prob_path))
    if probs.num_classes != manifest.num_classes:
        raise ValidationError(
            f"{entry.image_id}: probability map has {probs.num_classes} classes, "
            f"manifest declares {manifest.num_classes}"
        )
    if entry.pred_mask_path is not None:
        pred = read_mask(manifest.resolve(entry.pred_mask_path), manifest.num_classes)
        if pred.labels.shape != probs.values.shape[:2]:
            raise ValidationError(
                f"{entry.image_id}: mask shape {pred.labels.shape} does not match "
                f"probability map {probs.values.shape[:2]}"
            )
    else:
        pred = argmax_mask(probs)
    gt = None
    if entry.gt_mask_path is not None:
        gt = read_mask(manifest.resolve(entry.gt_mask_path), manifest.num_classes)
        if gt.labels.shape != probs.values.shape[:2]:
            raise ValidationError(
                f"{entry.image_id}: ground-truth shape {gt.labels.shape} does not "
                f"match probability map {probs.values.shape[:2]}"
            )
    features = None
    if entry.features_path is not None:
        features = read_feature_tensor(manifest.resolve(entry.features_path))
        if (features.height, features.width) != probs.values.shape[:2]:
            raise ValidationError(f"{entry.image_id}: feature tensor shape mismatch")
    return LoadedImage(entry=entry, probs=probs, pred=pred, gt=gt, features=features)


def manifest_feature_spec(manifest: DatasetManifest, feature_set: str) -> FeatureSetSpec:
    """Feature spec for a manifest; gradient columns need features everywhere."""
    include_gradient = bool(manifest.entries) and all(
        e.features_path is not None for e in manifest.entries
    )
    return make_feature_spec(feature_set, manifest.num_classes, include_gradient)


def analyze_image(
    image: LoadedImage,
    spec: FeatureSetSpec,
    background_class: int = 0,
    tau_p: float = TAU_P_DEFAULT,
) -> ImageAnalysis:
    """Decompose, aggregate features and (with ground truth) grade segments."""
    heatmaps = compute_heatmaps(image.probs, image.features)
    decomp = decompose(image.pred, background_class)
    gt_decomp = None if image.gt is None else decompose(image.gt, background_class)
    image_pixels = image.pred.height * image.pred.width
    records = []
    for seg in decomp.segments:
        record = aggregate_segment_features(
            heatmaps, seg, image_pixels, spec, image_id=image.entry.image_id
        )
        if gt_decomp is not None:
            q = segment_quality(seg, decomp, image.pred, gt_decomp)
            record.precision_p = q.precision
            record.iou = q.iou
            record.iou_adj = q.iou_adj
            record.target_low_quality = q.precision <= tau_p
        records.append(record)
    return ImageAnalysis(image=image, heatmaps=heatmaps, decomp=decomp, records=records)


def score_map(decomp: SegmentDecomposition, scores: dict[int, float], shape: tuple[int, int]) -> np.ndarray:
    """Per-pixel map of each segment's uncertainty score (background 0)."""
    out = np.zeros(shape, dtype=np.float32)
    for seg in decomp.segments:
        out[seg.rows, seg.cols] = scores[seg.segment_id]
    return out


def apply_correction(
    analysis: ImageAnalysis,
    scores: dict[int, float],
    tau: float,
    background_class: int = 0,
) -> CorrectionOutcome:
    return correct_mask(analysis.image.pred, analysis.decomp, scores, tau, background_class)


def run_parallel(fn, items, threads: int):
    """Map `fn` over `items`, preserving order; threads <= 1 stays serial."""
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
