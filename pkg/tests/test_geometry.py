import numpy as np

from conftest import random_mask_labels
from oracles import boundary_inner_split, dilation_neighbors, flood_components
from segqc.data import SegmentationMask
from segqc.geometry import decompose, neighbor_segments, split_boundary_inner


def _mask(labels, num_classes=None):
    arr = np.asarray(labels, np.uint16)
    return SegmentationMask(labels=arr, num_classes=num_classes or int(arr.max()) + 1)


def test_all_background_gives_empty_decomposition():
    decomp = decompose(_mask(np.zeros((5, 5)), 3))
    assert decomp.segments == []
    assert np.all(decomp.segment_id_map == 0)


def test_two_separated_rectangles():
    labels = np.zeros((6, 10), np.uint16)
    labels[1:3, 1:4] = 1
    labels[3:5, 6:9] = 1
    decomp = decompose(_mask(labels, 2))
    assert len(decomp.segments) == 2
    assert {seg.class_index for seg in decomp.segments} == {1}
    assert decomp.segments[0].pixel_count == 6
    assert decomp.segments[1].pixel_count == 6


def test_diagonal_touch_is_two_segments():
    labels = np.zeros((2, 2), np.uint16)
    labels[0, 0] = 1
    labels[1, 1] = 1
    assert len(decompose(_mask(labels, 2)).segments) == 2


def test_matches_flood_fill_oracle(rng):
    for _ in range(30):
        labels = random_mask_labels(rng, 16, 16, 4)
        decomp = decompose(_mask(labels, 4))
        oracle = flood_components(labels)
        assert len(decomp.segments) == len(oracle)
        for seg, (cls, pixels) in zip(decomp.segments, oracle):
            assert seg.class_index == cls
            assert seg.pixel_set() == pixels


def test_segment_ids_follow_raster_order(rng):
    labels = random_mask_labels(rng, 12, 12, 3)
    decomp = decompose(_mask(labels, 3))
    firsts = [min(r * 12 + c for r, c in seg.pixel_set()) for seg in decomp.segments]
    assert firsts == sorted(firsts)
    assert [seg.segment_id for seg in decomp.segments] == list(range(1, len(firsts) + 1))


def test_single_pixel_segment_is_all_boundary():
    labels = np.zeros((3, 3), np.uint16)
    labels[1, 1] = 1
    seg = decompose(_mask(labels, 2)).segments[0]
    assert seg.boundary_set() == {(1, 1)}
    assert seg.inner_set() == set()


def test_solid_square_inner_core():
    labels = np.zeros((7, 7), np.uint16)
    labels[1:6, 1:6] = 2
    seg = decompose(_mask(labels, 3)).segments[0]
    assert len(seg.inner_set()) == 9
    assert len(seg.boundary_set()) == 16
    assert seg.inner_set() == {(r, c) for r in range(2, 5) for c in range(2, 5)}


def test_width_two_strip_has_no_inner():
    labels = np.zeros((6, 6), np.uint16)
    labels[2:4, 1:5] = 1
    seg = decompose(_mask(labels, 2)).segments[0]
    assert seg.inner_set() == set()


def test_segment_touching_image_border_is_never_inner():
    labels = np.ones((4, 4), np.uint16)
    seg = decompose(_mask(labels, 2)).segments[0]
    assert seg.inner_set() == {(1, 1), (1, 2), (2, 1), (2, 2)}


def test_boundary_inner_matches_oracle(rng):
    for _ in range(20):
        labels = random_mask_labels(rng, 12, 12, 3)
        decomp = decompose(_mask(labels, 3))
        for seg in decomp.segments:
            boundary, inner = boundary_inner_split(seg.pixel_set(), 12, 12)
            assert seg.inner_set() == inner
            assert seg.boundary_set() == boundary


def test_enclosed_pixel_has_single_neighbor():
    labels = np.ones((5, 5), np.uint16)
    labels[2, 2] = 2
    decomp = decompose(_mask(labels, 3))
    enclosed = next(s for s in decomp.segments if s.class_index == 2)
    ring = next(s for s in decomp.segments if s.class_index == 1)
    assert enclosed.neighbor_ids == {ring.segment_id}
    assert ring.neighbor_ids == {enclosed.segment_id}


def test_border_segment_with_background_names_background():
    labels = np.zeros((4, 4), np.uint16)
    labels[0, :] = 1  # first row touches the border and background below
    decomp = decompose(_mask(labels, 2))
    assert decomp.segments[0].neighbor_ids == {0}


def test_neighbors_match_dilation_oracle(rng):
    for _ in range(20):
        labels = random_mask_labels(rng, 10, 10, 4)
        decomp = decompose(_mask(labels, 4))
        for seg in decomp.segments:
            expected = dilation_neighbors(seg.pixel_set(), decomp.segment_id_map)
            assert set(seg.neighbor_ids) == expected
            got = neighbor_segments(seg.rows, seg.cols, decomp.segment_id_map)
            assert set(got) == expected


def test_pixel_counts_cover_all_foreground(rng):
    labels = random_mask_labels(rng, 14, 14, 5)
    decomp = decompose(_mask(labels, 5))
    total = sum(seg.pixel_count for seg in decomp.segments)
    assert total == int(np.count_nonzero(labels))
    covered = np.zeros_like(labels, bool)
    for seg in decomp.segments:
        assert not covered[seg.rows, seg.cols].any()  # no overlap
        covered[seg.rows, seg.cols] = True
    assert np.array_equal(covered, labels != 0)


def test_class_permutation_keeps_pixel_sets(rng):
    labels = random_mask_labels(rng, 10, 10, 4)
    perm = np.array([0, 3, 1, 2])  # background stays put
    permuted = perm[labels.astype(np.int64)].astype(np.uint16)
    a = decompose(_mask(labels, 4))
    b = decompose(_mask(permuted, 4))
    assert len(a.segments) == len(b.segments)
    for sa, sb in zip(a.segments, b.segments):
        assert sa.pixel_set() == sb.pixel_set()
        assert perm[sa.class_index] == sb.class_index


def test_neighbor_symmetry(rng):
    labels = random_mask_labels(rng, 12, 12, 4)
    decomp = decompose(_mask(labels, 4))
    for seg in decomp.segments:
        assert seg.segment_id not in seg.neighbor_ids
        for nid in seg.neighbor_ids:
            if nid == 0:
                continue
            assert seg.segment_id in decomp.by_id(nid).neighbor_ids


def test_inner_pixels_have_full_same_segment_neighborhood(rng):
    labels = random_mask_labels(rng, 12, 12, 3)
    decomp = decompose(_mask(labels, 3))
    id_map = decomp.segment_id_map
    for seg in decomp.segments:
        for r, c in seg.inner_set():
            block = id_map[r - 1 : r + 2, c - 1 : c + 2]
            assert np.all(block == seg.segment_id)
        assert len(seg.boundary_set()) >= 1


def test_split_boundary_inner_direct_call():
    labels = np.zeros((7, 7), np.uint16)
    labels[1:6, 1:6] = 1
    decomp = decompose(_mask(labels, 2))
    seg = decomp.segments[0]
    flags = split_boundary_inner(seg.rows, seg.cols, decomp.segment_id_map)
    assert int(flags.sum()) == 9
