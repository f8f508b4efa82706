"""Per-segment records and their CSV / JSON-lines table formats.

Column order is fixed: identity columns, then the uncertainty feature
columns (in the order produced by feature extraction), then quality and
score columns. Optional columns appear only when at least one record
carries a value. Floats are written with `repr`, which round-trips
exactly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import FormatError, ValidationError

IDENTITY_COLUMNS = ["image_id", "segment_id", "predicted_class", "pixel_count", "relative_size"]
QUALITY_COLUMNS = ["precision_p", "iou", "iou_adj", "target_low_quality", "uncertainty_score"]


@dataclass
class SegmentRecord:
    image_id: str
    segment_id: int
    predicted_class: int
    pixel_count: int
    relative_size: float
    features: dict[str, float] = field(default_factory=dict)
    precision_p: float | None = None
    iou: float | None = None
    iou_adj: float | None = None
    target_low_quality: bool | None = None
    uncertainty_score: float | None = None

    def __post_init__(self):
        if self.precision_p is not None and self.iou is not None and self.iou_adj is not None:
            if not (self.precision_p >= self.iou_adj >= self.iou):
                raise ValidationError(
                    f"{self.image_id}/{self.segment_id}: quality ordering violated "
                    f"(p={self.precision_p}, iou_adj={self.iou_adj}, iou={self.iou})"
                )


def feature_columns_of(records: list[SegmentRecord]) -> list[str]:
    """Feature keys shared by all records, in first-record insertion order."""
    if not records:
        return []
    cols = list(records[0].features.keys())
    for r in records:
        if list(r.features.keys()) != cols:
            raise ValidationError(
                f"inconsistent feature columns: {r.image_id}/{r.segment_id} has "
                f"{sorted(r.features)} vs {sorted(cols)}"
            )
    return cols


def _optional_columns(records: list[SegmentRecord]) -> list[str]:
    present = []
    for col in QUALITY_COLUMNS:
        if any(getattr(r, col) is not None for r in records):
            present.append(col)
    return present


def _row_of(record: SegmentRecord, feature_cols: list[str], optional_cols: list[str]) -> list[str]:
    row = [
        record.image_id,
        str(record.segment_id),
        str(record.predicted_class),
        str(record.pixel_count),
        repr(record.relative_size),
    ]
    row += [repr(record.features[c]) for c in feature_cols]
    for col in optional_cols:
        value = getattr(record, col)
        if value is None:
            row.append("")
        elif col == "target_low_quality":
            row.append("1" if value else "0")
        else:
            row.append(repr(value))
    return row


def write_records_csv(path: str | Path, records: list[SegmentRecord]) -> None:
    feature_cols = feature_columns_of(records)
    optional_cols = _optional_columns(records)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(IDENTITY_COLUMNS + feature_cols + optional_cols)
        for record in records:
            writer.writerow(_row_of(record, feature_cols, optional_cols))


def read_records_csv(path: str | Path) -> list[SegmentRecord]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty records table") from None
        if header[: len(IDENTITY_COLUMNS)] != IDENTITY_COLUMNS:
            raise FormatError(f"{path}: unexpected table header {header[:5]}")
        feature_cols = [c for c in header[len(IDENTITY_COLUMNS):] if c not in QUALITY_COLUMNS]
        optional_cols = [c for c in header if c in QUALITY_COLUMNS]
        records = []
        for row in reader:
            values = dict(zip(header, row))
            records.append(_record_from_values(values, feature_cols, optional_cols))
    return records


def write_records_jsonl(path: str | Path, records: list[SegmentRecord]) -> None:
    feature_cols = feature_columns_of(records)
    optional_cols = _optional_columns(records)
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            payload: dict = {
                "image_id": r.image_id,
                "segment_id": r.segment_id,
                "predicted_class": r.predicted_class,
                "pixel_count": r.pixel_count,
                "relative_size": r.relative_size,
                "features": {c: r.features[c] for c in feature_cols},
            }
            for col in optional_cols:
                payload[col] = getattr(r, col)
            fh.write(json.dumps(payload) + "\n")


def read_records_jsonl(path: str | Path) -> list[SegmentRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{line_no}: invalid JSON line: {exc}") from exc
            records.append(
                SegmentRecord(
                    image_id=obj["image_id"],
                    segment_id=int(obj["segment_id"]),
                    predicted_class=int(obj["predicted_class"]),
                    pixel_count=int(obj["pixel_count"]),
                    relative_size=float(obj["relative_size"]),
                    features={k: float(v) for k, v in obj["features"].items()},
                    precision_p=_opt_float(obj.get("precision_p")),
                    iou=_opt_float(obj.get("iou")),
                    iou_adj=_opt_float(obj.get("iou_adj")),
                    target_low_quality=None
                    if obj.get("target_low_quality") is None
                    else bool(obj["target_low_quality"]),
                    uncertainty_score=_opt_float(obj.get("uncertainty_score")),
                )
            )
    return records


def _opt_float(value) -> float | None:
    return None if value is None else float(value)


def _record_from_values(values: dict[str, str], feature_cols: list[str], optional_cols: list[str]) -> SegmentRecord:
    def opt(col: str) -> str | None:
        v = values.get(col, "")
        return None if v == "" else v

    target = opt("target_low_quality")
    return SegmentRecord(
        image_id=values["image_id"],
        segment_id=int(values["segment_id"]),
        predicted_class=int(values["predicted_class"]),
        pixel_count=int(values["pixel_count"]),
        relative_size=float(values["relative_size"]),
        features={c: float(values[c]) for c in feature_cols},
        precision_p=None if opt("precision_p") is None else float(values["precision_p"]),
        iou=None if opt("iou") is None else float(values["iou"]),
        iou_adj=None if opt("iou_adj") is None else float(values["iou_adj"]),
        target_low_quality=None if target is None else target == "1",
        uncertainty_score=None
        if opt("uncertainty_score") is None
        else float(values["uncertainty_score"]),
    )
