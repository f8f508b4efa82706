"""Segment-wise and image-wise quality metrics against ground truth.

Each predicted segment is compared with the union of same-class ground
truth segments it intersects. Three numbers summarize the match:

* ``precision``: fraction of predicted pixels covered by that union.
* ``iou``: intersection over union with it.
* ``iou_adj``: like iou, but ground-truth area already claimed by *other*
  predicted segments of the same class is dropped from the denominator,
  so a ground-truth region split between two predictions does not punish
  each of them for the other's share.

The ordering precision >= iou_adj >= iou always holds, and all three are
zero for a segment with no matching overlap.

Image quality is the class-averaged IoU over classes present in the
prediction or the ground truth; classes appearing in neither are ignored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import SegmentationMask
from .errors import ValidationError
from .geometry import Segment, SegmentDecomposition


@dataclass(frozen=True)
class SegmentQuality:
    precision: float
    iou: float
    iou_adj: float

    def __post_init__(self):
        if not (self.precision >= self.iou_adj >= self.iou):
            raise ValidationError(
                f"quality ordering violated: p={self.precision} iou_adj={self.iou_adj} "
                f"iou={self.iou}"
            )


@dataclass(frozen=True)
class ImageQuality:
    miou: float
    per_class: dict[int, tuple[int, int, int]]  # class -> (tp, fp, fn)
    num_wrong_classes: int
    num_correct_classes: int


def matched_gt_union(pred_seg: Segment, gt_decomp: SegmentDecomposition) -> np.ndarray:
    """Boolean mask of the union of same-class, intersecting GT segments."""
    id_map = gt_decomp.segment_id_map
    touched = np.unique(id_map[pred_seg.rows, pred_seg.cols])
    union = np.zeros(id_map.shape, dtype=bool)
    for gid in touched.tolist():
        if gid == 0:
            continue
        gt_seg = gt_decomp.by_id(int(gid))
        if gt_seg.class_index == pred_seg.class_index:
            union[gt_seg.rows, gt_seg.cols] = True
    return union


def segment_iou(pred_seg: Segment, gt_union: np.ndarray) -> float:
    inter = int(np.count_nonzero(gt_union[pred_seg.rows, pred_seg.cols]))
    union = pred_seg.pixel_count + int(np.count_nonzero(gt_union)) - inter
    return inter / union if union else 0.0


def segment_iou_adj(pred_seg: Segment, gt_union: np.ndarray, other_pred_cover: np.ndarray) -> float:
    """IoU with other same-class predictions' share removed from the denominator.

    `other_pred_cover` marks pixels predicted as this class by segments
    other than `pred_seg`.
    """
    inter = int(np.count_nonzero(gt_union[pred_seg.rows, pred_seg.cols]))
    kept_gt = int(np.count_nonzero(gt_union & ~other_pred_cover))
    denom = pred_seg.pixel_count + kept_gt - inter
    return inter / denom if denom else 0.0


def segment_precision(pred_seg: Segment, gt_union: np.ndarray) -> float:
    inter = int(np.count_nonzero(gt_union[pred_seg.rows, pred_seg.cols]))
    return inter / pred_seg.pixel_count


def segment_quality(
    pred_seg: Segment,
    pred_decomp: SegmentDecomposition,
    pred_mask: SegmentationMask,
    gt_decomp: SegmentDecomposition,
) -> SegmentQuality:
    """All three metrics for one predicted segment."""
    gt_union = matched_gt_union(pred_seg, gt_decomp)
    same_class = pred_mask.labels == pred_seg.class_index
    other_cover = same_class & (pred_decomp.segment_id_map != pred_seg.segment_id)
    return SegmentQuality(
        precision=segment_precision(pred_seg, gt_union),
        iou=segment_iou(pred_seg, gt_union),
        iou_adj=segment_iou_adj(pred_seg, gt_union, other_cover),
    )


def image_quality(pred: SegmentationMask, gt: SegmentationMask) -> ImageQuality:
    """Per-image mean IoU and wrong/correct class counts."""
    if pred.labels.shape != gt.labels.shape:
        raise ValidationError(
            f"mask shapes differ: pred {pred.labels.shape} vs gt {gt.labels.shape}"
        )
    n = max(pred.num_classes, gt.num_classes)
    pred_flat = pred.labels.ravel().astype(np.int64)
    gt_flat = gt.labels.ravel().astype(np.int64)
    confusion = np.bincount(pred_flat * n + gt_flat, minlength=n * n).reshape(n, n)
    tp = np.diag(confusion)
    fp = confusion.sum(axis=1) - tp
    fn = confusion.sum(axis=0) - tp
    pred_classes = set(np.unique(pred_flat).tolist())
    gt_classes = set(np.unique(gt_flat).tolist())
    present = sorted(pred_classes | gt_classes)
    per_class = {c: (int(tp[c]), int(fp[c]), int(fn[c])) for c in present}
    # sequential Python summation keeps the mean bit-identical to a naive
    # per-class tally, which the metric oracles rely on
    ious = [per_class[c][0] / sum(per_class[c]) for c in present]
    return ImageQuality(
        miou=sum(ious) / len(ious) if ious else 0.0,
        per_class=per_class,
        num_wrong_classes=len(pred_classes - gt_classes),
        num_correct_classes=len(pred_classes & gt_classes),
    )
