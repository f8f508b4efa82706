"""Mask correction driven by segment uncertainty scores.

Every segment scoring above the threshold is rewritten: if its only
neighbor in the ORIGINAL mask is exactly one other segment (no background
contact), it takes that neighbor's class; otherwise it is cleared to
background. Neighbor sets are frozen from the original decomposition, so
the outcome does not depend on the order segments are visited in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import SegmentationMask
from .errors import ValidationError
from .geometry import BACKGROUND_ID, SegmentDecomposition
from .quality import image_quality


@dataclass(frozen=True)
class CorrectionAction:
    segment_id: int
    action: str  # "removed_to_background" | "replaced_by_class"
    new_class: int | None
    score: float


@dataclass(frozen=True)
class CorrectionOutcome:
    corrected_mask: SegmentationMask
    actions: list[CorrectionAction]


def correct_mask(
    mask: SegmentationMask,
    decomp: SegmentDecomposition,
    scores: dict[int, float],
    tau: float,
    background_class: int = 0,
) -> CorrectionOutcome:
    """Apply one correction pass; returns the new mask and an action log."""
    labels = mask.labels.copy()
    actions: list[CorrectionAction] = []
    for seg in decomp.segments:
        if seg.segment_id not in scores:
            raise ValidationError(f"segment {seg.segment_id} has no uncertainty score")
        score = scores[seg.segment_id]
        if score <= tau:
            continue
        neighbors = seg.neighbor_ids
        if len(neighbors) == 1 and BACKGROUND_ID not in neighbors:
            (only,) = neighbors
            new_class = decomp.by_id(only).class_index
            labels[seg.rows, seg.cols] = new_class
            actions.append(
                CorrectionAction(
                    segment_id=seg.segment_id,
                    action="replaced_by_class",
                    new_class=new_class,
                    score=score,
                )
            )
        else:
            labels[seg.rows, seg.cols] = background_class
            actions.append(
                CorrectionAction(
                    segment_id=seg.segment_id,
                    action="removed_to_background",
                    new_class=None,
                    score=score,
                )
            )
    corrected = SegmentationMask(labels=labels, num_classes=mask.num_classes)
    return CorrectionOutcome(corrected_mask=corrected, actions=actions)


def sweep_threshold(
    items: list[tuple[SegmentationMask, SegmentDecomposition, dict[int, float], SegmentationMask]],
    taus: list[float],
    background_class: int = 0,
) -> list[dict]:
    """Mean mean-IoU change per candidate threshold over a validation set.

    `items` carries (predicted mask, its decomposition, segment scores,
    ground-truth mask) per image. The result is sorted by tau.
    """
    before = [image_quality(pred, gt).miou for pred, _, _, gt in items]
    rows = []
    for tau in sorted(taus):
        deltas = []
        for (pred, decomp, scores, gt), base in zip(items, before):
            outcome = correct_mask(pred, decomp, scores, tau, background_class)
            after = image_quality(outcome.corrected_mask, gt).miou
            deltas.append(after - base)
        rows.append(
            {
                "tau": tau,
                "mean_delta_miou": float(np.mean(deltas)) if deltas else 0.0,
                "fraction_negative": float(np.mean([d < 0 for d in deltas])) if deltas else 0.0,
            }
        )
    return rows


def best_threshold(sweep_rows: list[dict]) -> float:
    """Tau with the highest mean improvement; ties keep the smallest tau."""
    if not sweep_rows:
        raise ValidationError("threshold sweep produced no rows")
    best = sweep_rows[0]
    for row in sweep_rows[1:]:
        if row["mean_delta_miou"] > best["mean_delta_miou"]:
            best = row
    return float(best["tau"])
