"""Deterministic synthetic corpus generator.

Ground truth is a Voronoi partition of the image: cell centers are drawn
uniformly, each cell gets either the background class or one of a small
per-image subset of foreground classes, so most class indices stay absent
from any single image. The corrupted prediction is derived from the same
cells via three mechanisms:

* boundary jitter: cell centers are displaced before recomputing the
  partition, wiggling segment boundaries by roughly the jitter radius;
* class swaps: a cell's predicted class is replaced by a random other
  foreground class with fixed probability (confident large mistakes);
* false segments: small connected blobs are grown at random locations
  and stamped with a class absent from both the ground truth and the
  prediction under and around the blob, so each injected segment has
  zero overlap with matching ground truth.

The softmax map concentrates winner probability around a per-region
confidence level: the base is `correct_confidence` for cells and
`wrong_confidence` for injected blobs, shifted by a per-region logit
offset and per-pixel logit noise, both scaled by `noise_temp`, so regions
are statistically rather than perfectly separable. The winning class of
every pixel is forced to match the prediction, keeping the corpus
self-consistent. Everything derives from per-image seeds spawned from the
master seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit, logit

from .data import (
    DatasetManifest,
    ManifestEntry,
    ProbabilityMap,
    SegmentationMask,
    write_manifest,
    write_mask,
    write_probability_map,
)
from .errors import ConfigurationError

# minimum winner lead over the runner-up, after float32 rounding
_ARGMAX_MARGIN = 1e-4


@dataclass(frozen=True)
class SynthConfig:
    image_size: int = 128
    num_classes: int = 8
    voronoi_cells: int = 25
    false_segment_rate: float = 6.0
    false_segment_size: tuple[int, int] = (12, 80)
    boundary_jitter: float = 1.0
    class_swap_prob: float = 0.03
    correct_confidence: float = 0.88
    wrong_confidence: float = 0.60
    noise_temp: float = 0.6
    seed: int = 0

    def __post_init__(self):
        if self.voronoi_cells < 1:
            raise ConfigurationError("voronoi_cells must be at least 1")
        if self.num_classes < 2:
            raise ConfigurationError("num_classes must be at least 2")
        if not (0 < self.correct_confidence < 1 and 0 < self.wrong_confidence < 1):
            raise ConfigurationError("confidences must lie strictly inside (0, 1)")
        lo, hi = self.false_segment_size
        if lo < 1 or hi < lo:
            raise ConfigurationError(f"bad false_segment_size range ({lo}, {hi})")


@dataclass
class SynthImage:
    gt: SegmentationMask
    pred: SegmentationMask
    probs: ProbabilityMap
    injected: np.ndarray  # bool (H, W), pixels stamped by a false blob
    n_injected: int = 0  # blobs actually stamped (class search can skip one)


def _voronoi_cells_of(centers: np.ndarray, size: int) -> np.ndarray:
    """Index of the nearest center per pixel; ties go to the lowest index."""
    ys, xs = np.mgrid[0:size, 0:size]
    pts = np.stack([ys.ravel(), xs.ravel()], axis=1).astype(np.float64)
    d2 = np.square(pts[:, None, :] - centers[None, :, :]).sum(axis=2)
    return np.argmin(d2, axis=1).reshape(size, size)


def _grow_blob(rng: np.random.Generator, target: int, height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Grow a 4-connected random blob of `target` pixels."""
    start = (int(rng.integers(height)), int(rng.integers(width)))
    region = {start}
    frontier = [start]
    while len(region) < target and frontier:
        pick = int(rng.integers(len(frontier)))
        r, c = frontier[pick]
        options = [
            (r + dr, c + dc)
            for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1))
            if 0 <= r + dr < height and 0 <= c + dc < width and (r + dr, c + dc) not in region
        ]
        if not options:
            frontier.pop(pick)
            continue
        new = options[int(rng.integers(len(options)))]
        region.add(new)
        frontier.append(new)
    ordered = sorted(region)
    rows = np.asarray([p[0] for p in ordered], dtype=np.int64)
    cols = np.asarray([p[1] for p in ordered], dtype=np.int64)
    return rows, cols


def generate_image(config: SynthConfig, rng: np.random.Generator) -> SynthImage:
    size = config.image_size
    n = config.num_classes
    fg_classes = np.arange(1, n)
    # limit each image to a handful of foreground classes so that injected
    # blobs regularly introduce classes the ground truth never shows
    n_present = max(2, (n - 1) // 2)
    present = np.sort(rng.choice(fg_classes, size=min(n_present, n - 1), replace=False))
    centers = rng.uniform(0.0, size, (config.voronoi_cells, 2))
    cell_classes = np.where(
        rng.random(config.voronoi_cells) < 0.25,
        0,
        present[rng.integers(0, present.size, config.voronoi_cells)],
    )
    gt_labels = cell_classes[_voronoi_cells_of(centers, size)].astype(np.uint16)

    jitter = rng.normal(0.0, 1.0, centers.shape) * config.boundary_jitter
    pred_cell_classes = cell_classes.copy()
    swap = rng.random(config.voronoi_cells) < config.class_swap_prob
    for i in np.flatnonzero(swap).tolist():
        choices = fg_classes[fg_classes != pred_cell_classes[i]]
        pred_cell_classes[i] = choices[int(rng.integers(choices.size))]
    pred_cells = _voronoi_cells_of(centers + jitter, size)
    pred_labels = pred_cell_classes[pred_cells].astype(np.int64)

    # per-region confidence base in logit space: cells start from the
    # correct-confidence level, injected blobs from the wrong one
    region_scale = 0.5 * config.noise_temp
    cell_offsets = region_scale * rng.standard_normal(config.voronoi_cells)
    conf_logit = logit(config.correct_confidence) + cell_offsets[pred_cells]

    injected = np.zeros((size, size), dtype=bool)
    n_stamped = 0
    n_blobs = int(rng.poisson(config.false_segment_rate))
    lo, hi = config.false_segment_size
    for _ in range(n_blobs):
        target = int(rng.integers(lo, hi + 1))
        rows, cols = _grow_blob(rng, target, size, size)
        # classes present under or right next to the blob are off limits:
        # the blob must stay its own segment and must miss the ground truth
        forbidden = set(np.unique(gt_labels[rows, cols]).tolist())
        forbidden.update(np.unique(pred_labels[rows, cols]).tolist())
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            rr = np.clip(rows + dr, 0, size - 1)
            cc = np.clip(cols + dc, 0, size - 1)
            forbidden.update(np.unique(pred_labels[rr, cc]).tolist())
        candidates = [c for c in fg_classes.tolist() if c not in forbidden]
        blob_offset = region_scale * rng.standard_normal()
        if not candidates:
            continue
        blob_class = candidates[int(rng.integers(len(candidates)))]
        pred_labels[rows, cols] = blob_class
        injected[rows, cols] = True
        n_stamped += 1
        conf_logit[rows, cols] = logit(config.wrong_confidence) + blob_offset

    probs = _build_softmax(config, rng, pred_labels, conf_logit)
    return SynthImage(
        gt=SegmentationMask(labels=gt_labels, num_classes=n),
        pred=SegmentationMask(labels=pred_labels.astype(np.uint16), num_classes=n),
        probs=probs,
        injected=injected,
        n_injected=n_stamped,
    )


def _build_softmax(
    config: SynthConfig,
    rng: np.random.Generator,
    pred_labels: np.ndarray,
    conf_logit: np.ndarray,
) -> ProbabilityMap:
    size = config.image_size
    n = config.num_classes
    q = expit(conf_logit + config.noise_temp * rng.standard_normal((size, size)))
    # distribute the remaining mass over the other classes with mild noise
    other_logits = 0.5 * rng.standard_normal((size, size, n))
    winner_idx = pred_labels[:, :, None]
    np.put_along_axis(other_logits, winner_idx, -np.inf, axis=2)
    other_logits -= other_logits.max(axis=2, keepdims=True)
    shares = np.exp(other_logits)
    shares /= shares.sum(axis=2, keepdims=True)
    # force a clear winner so argmax always reproduces the prediction
    max_share = shares.max(axis=2)
    q_floor = max_share / (1.0 + max_share) + _ARGMAX_MARGIN
    q = np.maximum(q, q_floor)
    values = shares * (1.0 - q)[:, :, None]
    np.put_along_axis(values, winner_idx, q[:, :, None], axis=2)
    return ProbabilityMap(values=values.astype(np.float32))


def generate_corpus(config: SynthConfig, count: int, out_dir: str | Path) -> DatasetManifest:
    """Write `count` images plus a manifest; fully determined by the seed."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    children = np.random.SeedSequence(config.seed).spawn(count)
    entries = []
    for i in range(count):
        rng = np.random.Generator(np.random.PCG64(children[i]))
        image = generate_image(config, rng)
        image_id = f"img_{i:04d}"
        prob_path = f"{image_id}_probs.npy"
        pred_path = f"{image_id}_pred.png"
        gt_path = f"{image_id}_gt.png"
        write_probability_map(out / prob_path, image.probs)
        write_mask(out / pred_path, image.pred)
        write_mask(out / gt_path, image.gt)
        entries.append(
            ManifestEntry(
                image_id=image_id,
                prob_path=prob_path,
                pred_mask_path=pred_path,
                gt_mask_path=gt_path,
            )
        )
    manifest = DatasetManifest(
        entries=entries,
        num_classes=config.num_classes,
        background_class=0,
        root=out,
    )
    write_manifest(out / "manifest.json", manifest)
    return manifest
