"""Aggregation of pixel heatmaps into per-segment feature vectors.

Three feature sets are supported:

* ``uncertainty_only``: mean of each available uncertainty heatmap over
  the full segment.
* ``reduced``: the above plus relative segment size and the predicted
  class (one-hot encoded at matrix-assembly time).
* ``all``: means and population standard deviations of each heatmap over
  the full segment, its boundary and its inner part, plus relative size,
  an inner-emptiness indicator and the predicted class.

Segments too thin to have inner pixels reuse the full-segment statistics
for the inner region; the ``inner_empty`` indicator marks them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ValidationError
from .geometry import Segment
from .records import SegmentRecord
from .uncertainty import UncertaintyHeatmaps

MEASURES = ("umax", "uent", "umargin", "ugrad")
REGIONS = ("full", "boundary", "inner")
STATS = ("mean", "std")

FEATURE_SET_NAMES = ("all", "reduced", "uncertainty_only")


@dataclass(frozen=True)
class FeatureSetSpec:
    name: str
    columns: tuple[str, ...]
    num_classes: int


def make_feature_spec(name: str, num_classes: int, include_gradient: bool) -> FeatureSetSpec:
    """Build the ordered column list for one of the three feature sets."""
    if name not in FEATURE_SET_NAMES:
        raise ConfigurationError(f"unknown feature set {name!r}, expected one of {FEATURE_SET_NAMES}")
    measures = [m for m in MEASURES if include_gradient or m != "ugrad"]
    class_cols = [f"class_{k}" for k in range(num_classes)]
    if name == "uncertainty_only":
        cols = [f"{m}_full_mean" for m in measures]
    elif name == "reduced":
        cols = [f"{m}_full_mean" for m in measures] + ["relative_size"] + class_cols
    else:
        cols = [f"{m}_{r}_{s}" for m in measures for r in REGIONS for s in STATS]
        cols += ["relative_size", "inner_empty"] + class_cols
    return FeatureSetSpec(name=name, columns=tuple(cols), num_classes=num_classes)


def _mean_std(values: np.ndarray) -> tuple[float, float]:
    mean = float(values.mean(dtype=np.float64))
    var = float(np.square(values - mean).mean(dtype=np.float64))
    return mean, float(np.sqrt(max(var, 0.0)))


def aggregate_segment_features(
    heatmaps: UncertaintyHeatmaps,
    seg: Segment,
    image_pixels: int,
    spec: FeatureSetSpec,
    image_id: str = "",
) -> SegmentRecord:
    """Aggregate heatmaps over one segment into a SegmentRecord."""
    if seg.pixel_count == 0:
        raise ValidationError("cannot aggregate features over an empty segment")
    inner = seg.inner_flags
    rows, cols = seg.rows, seg.cols
    features: dict[str, float] = {}
    measures = [m for m in MEASURES if f"{m}_full_mean" in spec.columns]
    inner_empty = not bool(inner.any())
    for m in measures:
        heat = heatmaps.measure(m)
        full = heat[rows, cols]
        full_mean, full_std = _mean_std(full)
        if spec.name == "all":
            bnd = full[~inner]
            bnd_mean, bnd_std = _mean_std(bnd) if bnd.size else (full_mean, full_std)
            if inner_empty:
                inn_mean, inn_std = full_mean, full_std
            else:
                inn_mean, inn_std = _mean_std(full[inner])
            features[f"{m}_full_mean"] = full_mean
            features[f"{m}_full_std"] = full_std
            features[f"{m}_boundary_mean"] = bnd_mean
            features[f"{m}_boundary_std"] = bnd_std
            features[f"{m}_inner_mean"] = inn_mean
            features[f"{m}_inner_std"] = inn_std
        else:
            features[f"{m}_full_mean"] = full_mean
    if spec.name == "all":
        features["inner_empty"] = 1.0 if inner_empty else 0.0
    return SegmentRecord(
        image_id=image_id,
        segment_id=seg.segment_id,
        predicted_class=seg.class_index,
        pixel_count=seg.pixel_count,
        relative_size=seg.pixel_count / image_pixels,
        features=features,
    )


def design_matrix(records: list[SegmentRecord], spec: FeatureSetSpec) -> np.ndarray:
    """Assemble the (n_records, n_columns) float matrix for a feature set.

    One-hot class columns and relative size come from the record identity
    fields; everything else from the stored feature map.
    """
    n, m = len(records), len(spec.columns)
    X = np.zeros((n, m), dtype=np.float64)
    for j, col in enumerate(spec.columns):
        if col == "relative_size":
            X[:, j] = [r.relative_size for r in records]
        elif col.startswith("class_"):
            k = int(col.split("_", 1)[1])
            X[:, j] = [1.0 if r.predicted_class == k else 0.0 for r in records]
        else:
            try:
                X[:, j] = [r.features[col] for r in records]
            except KeyError as exc:
                raise ValidationError(
                    f"records lack feature column {col!r} required by feature set "
                    f"{spec.name!r}"
                ) from exc
    return X


def target_vector(records: list[SegmentRecord]) -> np.ndarray:
    """Binary low-quality targets as a float array (1.0 = low quality)."""
    targets = []
    for r in records:
        if r.target_low_quality is None:
            raise ValidationError(f"{r.image_id}/{r.segment_id}: record has no quality target")
        targets.append(1.0 if r.target_low_quality else 0.0)
    return np.asarray(targets, dtype=np.float64)
