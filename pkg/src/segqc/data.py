"""Core value types and file I/O.

Probability maps and feature tensors live in NPY v1.0 files (little-endian
float32, C order). Masks are NPY uint16 or grayscale PNG (8 or 16 bit).
Dataset manifests are JSON. All loaded arrays are read-only, so values can
be shared freely across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError, ValidationError
from .npyio import read_npy, write_npy

PROB_SUM_TOL = 1e-4


@dataclass(frozen=True, eq=False)
class ProbabilityMap:
    """Per-pixel softmax output, shape (H, W, N)."""

    values: np.ndarray

    def __post_init__(self):
        v = self.values
        if v.ndim != 3:
            raise ValidationError(f"probability map must be 3-d, got shape {v.shape}")
        if v.shape[2] < 2:
            raise ValidationError(f"probability map needs at least 2 classes, got {v.shape[2]}")
        if v.size and (v.min() < 0.0 or v.max() > 1.0):
            outside = (v < 0.0) | (v > 1.0)
            bad = np.unravel_index(int(np.argmax(outside)), v.shape)
            raise ValidationError(f"probability outside [0, 1] at (row, col, class)={bad}")
        sums = v.sum(axis=2, dtype=np.float64)
        err = np.abs(sums - 1.0)
        if v.size and err.max() > PROB_SUM_TOL:
            r, c = np.unravel_index(int(np.argmax(err)), err.shape)
            raise ValidationError(
                f"pixel probabilities must sum to 1 within {PROB_SUM_TOL}; "
                f"worst pixel (row={r}, col={c}) sums to {sums[r, c]:.6f}"
            )
        v.flags.writeable = False

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def num_classes(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True, eq=False)
class SegmentationMask:
    """Per-pixel class indices, shape (H, W), class 0 reserved for background."""

    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        lab = self.labels
        if lab.ndim != 2:
            raise ValidationError(f"mask must be 2-d, got shape {lab.shape}")
        if lab.size:
            bad = lab >= self.num_classes
            if bad.any():
                flat = int(np.argmax(bad))
                r, c = np.unravel_index(flat, lab.shape)
                raise ValidationError(
                    f"label {int(lab[r, c])} at (row={r}, col={c}) exceeds "
                    f"num_classes={self.num_classes}"
                )
        lab.flags.writeable = False

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


@dataclass(frozen=True, eq=False)
class FeatureTensor:
    """Per-pixel feature vectors feeding the final convolution, shape (H, W, C)."""

    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 3:
            raise ValidationError(f"feature tensor must be 3-d, got shape {self.values.shape}")
        self.values.flags.writeable = False

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]


@dataclass
class ManifestEntry:
    image_id: str
    prob_path: str
    pred_mask_path: str | None = None
    gt_mask_path: str | None = None
    features_path: str | None = None
    categories: dict[str, str] = field(default_factory=dict)


@dataclass
class DatasetManifest:
    """Ordered list of images plus the dataset-wide class vocabulary."""

    entries: list[ManifestEntry]
    num_classes: int
    background_class: int = 0
    root: Path = Path(".")

    def resolve(self, rel: str) -> Path:
        return (self.root / rel).resolve()


def read_probability_map(path: str | Path) -> ProbabilityMap:
    arr = read_npy(path, expect_descr="<f4")
    if arr.ndim != 3:
        raise FormatError(f"{path}: probability map must have shape (H, W, N), got {arr.shape}")
    return ProbabilityMap(values=arr)


def write_probability_map(path: str | Path, probs: ProbabilityMap) -> None:
    write_npy(path, probs.values.astype(np.float32, copy=False))


def read_feature_tensor(path: str | Path) -> FeatureTensor:
    arr = read_npy(path, expect_descr="<f4")
    if arr.ndim != 3:
        raise FormatError(f"{path}: feature tensor must have shape (H, W, C), got {arr.shape}")
    return FeatureTensor(values=arr)


def write_feature_tensor(path: str | Path, feats: FeatureTensor) -> None:
    write_npy(path, feats.values.astype(np.float32, copy=False))


def read_mask(path: str | Path, num_classes: int) -> SegmentationMask:
    """Read a mask from NPY uint16 or grayscale PNG (8/16 bit)."""
    path = Path(path)
    if path.suffix.lower() == ".png":
        img = Image.open(path)
        if img.mode == "L":
            arr = np.asarray(img, dtype=np.uint16)
        elif img.mode in ("I;16", "I"):
            arr = np.asarray(img).astype(np.uint16)
        else:
            raise FormatError(f"{path}: PNG mode {img.mode!r} is not grayscale 8/16-bit")
    else:
        arr = np.asarray(read_npy(path, expect_descr="<u2"))
        if arr.ndim != 2:
            raise FormatError(f"{path}: mask must have shape (H, W), got {arr.shape}")
    return SegmentationMask(labels=arr, num_classes=num_classes)


def write_mask(path: str | Path, mask: SegmentationMask) -> None:
    """Write a mask as NPY uint16 or PNG, chosen by file extension."""
    path = Path(path)
    labels = mask.labels.astype(np.uint16, copy=False)
    if path.suffix.lower() == ".png":
        if mask.num_classes <= 256:
            Image.fromarray(labels.astype(np.uint8)).save(path, format="PNG")
        else:
            Image.fromarray(labels).save(path, format="PNG")
    else:
        write_npy(path, labels)


def argmax_mask(probs: ProbabilityMap) -> SegmentationMask:
    """Predicted class per pixel; ties resolved toward the smallest class index."""
    labels = np.argmax(probs.values, axis=2).astype(np.uint16)
    return SegmentationMask(labels=labels, num_classes=probs.num_classes)


def read_manifest(path: str | Path) -> DatasetManifest:
    """Load and validate a dataset manifest (JSON)."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    for key in ("num_classes", "entries"):
        if key not in raw:
            raise FormatError(f"{path}: manifest missing required key {key!r}")
    entries = []
    seen: set[str] = set()
    for i, item in enumerate(raw["entries"]):
        if "image_id" not in item or "prob_path" not in item:
            raise FormatError(f"{path}: entry {i} missing image_id or prob_path")
        if item["image_id"] in seen:
            raise ValidationError(f"{path}: duplicate image_id {item['image_id']!r}")
        seen.add(item["image_id"])
        entries.append(
            ManifestEntry(
                image_id=item["image_id"],
                prob_path=item["prob_path"],
                pred_mask_path=item.get("pred_mask_path"),
                gt_mask_path=item.get("gt_mask_path"),
                features_path=item.get("features_path"),
                categories=dict(item.get("categories") or {}),
            )
        )
    manifest = DatasetManifest(
        entries=entries,
        num_classes=int(raw["num_classes"]),
        background_class=int(raw.get("background_class", 0)),
        root=path.parent,
    )
    missing = []
    for entry in manifest.entries:
        for rel in (entry.prob_path, entry.pred_mask_path, entry.gt_mask_path, entry.features_path):
            if rel is not None and not manifest.resolve(rel).exists():
                missing.append(f"{entry.image_id}: {rel}")
    if missing:
        raise ValidationError(f"{path}: referenced files do not exist:\n  " + "\n  ".join(missing))
    return manifest


def write_manifest(path: str | Path, manifest: DatasetManifest) -> None:
    payload = {
        "num_classes": manifest.num_classes,
        "background_class": manifest.background_class,
        "entries": [
            {
                "image_id": e.image_id,
                "prob_path": e.prob_path,
                **({"pred_mask_path": e.pred_mask_path} if e.pred_mask_path else {}),
                **({"gt_mask_path": e.gt_mask_path} if e.gt_mask_path else {}),
                **({"features_path": e.features_path} if e.features_path else {}),
                **({"categories": e.categories} if e.categories else {}),
            }
            for e in manifest.entries
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
