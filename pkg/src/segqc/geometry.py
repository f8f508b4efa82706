"""Segment decomposition of a mask and its derived geometry.

A segment is a maximal 4-connected set of pixels sharing a class; the
background class never forms segments. Segment ids are 1-based and
assigned in raster-scan order of each segment's first pixel, which makes
the decomposition deterministic. Boundary/inner splits use the
8-neighborhood containment rule, neighbor adjacency uses 4-connectivity
(one dilation step with the cross structuring element).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .data import SegmentationMask
from .errors import ValidationError

BACKGROUND_ID = 0

_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)

_NEIGHBORS_8 = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
_NEIGHBORS_4 = [(-1, 0), (0, -1), (0, 1), (1, 0)]


@dataclass(eq=False)
class Segment:
    """One connected component of a single non-background class."""

    segment_id: int
    class_index: int
    rows: np.ndarray
    cols: np.ndarray
    inner_flags: np.ndarray = field(default=None)  # type: ignore[assignment]
    neighbor_ids: frozenset[int] = frozenset()

    @property
    def pixel_count(self) -> int:
        return int(self.rows.size)

    def pixel_set(self) -> set[tuple[int, int]]:
        return set(zip(self.rows.tolist(), self.cols.tolist()))

    def boundary_set(self) -> set[tuple[int, int]]:
        keep = ~self.inner_flags
        return set(zip(self.rows[keep].tolist(), self.cols[keep].tolist()))

    def inner_set(self) -> set[tuple[int, int]]:
        keep = self.inner_flags
        return set(zip(self.rows[keep].tolist(), self.cols[keep].tolist()))


@dataclass(eq=False)
class SegmentDecomposition:
    segments: list[Segment]
    segment_id_map: np.ndarray  # (H, W) int32, 0 = background

    def by_id(self, segment_id: int) -> Segment:
        seg = self.segments[segment_id - 1]
        if seg.segment_id != segment_id:
            raise ValidationError(f"segment id {segment_id} out of order")
        return seg


def split_boundary_inner(rows: np.ndarray, cols: np.ndarray, id_map: np.ndarray) -> np.ndarray:
    """Flags, per pixel, whether its full 8-neighborhood stays in the segment.

    Pixels on the image border are never inner. Returns a boolean array
    aligned with `rows`/`cols` (True = inner).
    """
    h, w = id_map.shape
    sid = id_map[rows[0], cols[0]]
    inner = (rows > 0) & (rows < h - 1) & (cols > 0) & (cols < w - 1)
    for dr, dc in _NEIGHBORS_8:
        # clip keeps indexing in bounds; border pixels are already excluded
        r = np.clip(rows + dr, 0, h - 1)
        c = np.clip(cols + dc, 0, w - 1)
        inner &= id_map[r, c] == sid
    return inner


def neighbor_segments(rows: np.ndarray, cols: np.ndarray, id_map: np.ndarray) -> frozenset[int]:
    """Ids of segments owning pixels 4-adjacent to this segment.

    Background adjacency appears as id 0. Pixels beyond the image border
    contribute nothing. Equivalent to one binary dilation step with the
    cross element, minus the segment itself.
    """
    h, w = id_map.shape
    sid = id_map[rows[0], cols[0]]
    found: set[int] = set()
    for dr, dc in _NEIGHBORS_4:
        r = rows + dr
        c = cols + dc
        valid = (r >= 0) & (r < h) & (c >= 0) & (c < w)
        ids = id_map[r[valid], c[valid]]
        found.update(np.unique(ids[ids != sid]).tolist())
    return frozenset(int(i) for i in found)


def decompose(mask: SegmentationMask, background_class: int = 0) -> SegmentDecomposition:
    """Split a mask into connected segments (4-connectivity, per class)."""
    labels = mask.labels
    h, w = labels.shape
    id_map = np.zeros((h, w), dtype=np.int32)
    components: list[tuple[int, int, np.ndarray, np.ndarray]] = []
    for class_index in np.unique(labels).tolist():
        if class_index == background_class:
            continue
        comp_map, n_comp = ndimage.label(labels == class_index, structure=_CROSS)
        if n_comp == 0:
            continue
        flat = comp_map.ravel()
        pix = np.flatnonzero(flat)
        order = np.argsort(flat[pix], kind="stable")  # stable keeps raster order
        pix = pix[order]
        starts = np.flatnonzero(np.diff(flat[pix], prepend=-1))
        bounds = np.append(starts, pix.size)
        for i in range(starts.size):
            chunk = pix[bounds[i]:bounds[i + 1]]
            components.append(
                (int(chunk[0]), int(class_index), (chunk // w).astype(np.int32), (chunk % w).astype(np.int32))
            )
    components.sort(key=lambda item: item[0])
    segments: list[Segment] = []
    for sid, (_, class_index, rows, cols) in enumerate(components, start=1):
        id_map[rows, cols] = sid
        segments.append(Segment(segment_id=sid, class_index=class_index, rows=rows, cols=cols))
    for seg in segments:
        seg.inner_flags = split_boundary_inner(seg.rows, seg.cols, id_map)
        seg.neighbor_ids = neighbor_segments(seg.rows, seg.cols, id_map)
    return SegmentDecomposition(segments=segments, segment_id_map=id_map)
