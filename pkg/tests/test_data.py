import json

import numpy as np
import pytest

from conftest import random_probability_values
from segqc.data import (
    DatasetManifest,
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
from segqc.errors import ValidationError


def test_uniform_probability_map(tmp_path):
    values = np.full((2, 2, 2), 0.5, np.float32)
    path = tmp_path / "p.npy"
    write_probability_map(path, ProbabilityMap(values=values))
    probs = read_probability_map(path)
    assert probs.height == probs.width == probs.num_classes == 2
    assert np.all(probs.values == 0.5)


def test_bad_pixel_sum_names_worst_pixel():
    values = np.full((2, 3, 2), 0.5, np.float32)
    values[1, 2] = [0.5, 0.3]
    with pytest.raises(ValidationError, match=r"row=1, col=2"):
        ProbabilityMap(values=values)


def test_value_outside_unit_interval():
    values = np.zeros((1, 1, 2), np.float32)
    values[0, 0] = [1.5, -0.5]
    with pytest.raises(ValidationError, match="outside"):
        ProbabilityMap(values=values)


def test_probability_round_trip_bit_exact(tmp_path, rng):
    path = tmp_path / "p.npy"
    for _ in range(100):
        values = random_probability_values(rng, 4, 5, 3)
        write_probability_map(path, ProbabilityMap(values=values.copy()))
        back = read_probability_map(path)
        assert values.tobytes() == back.values.tobytes()


def test_mask_png_constant(tmp_path):
    mask = SegmentationMask(labels=np.full((4, 4), 3, np.uint16), num_classes=5)
    path = tmp_path / "m.png"
    write_mask(path, mask)
    back = read_mask(path, num_classes=5)
    assert np.all(back.labels == 3)


def test_mask_label_out_of_range(tmp_path):
    mask = SegmentationMask(labels=np.full((2, 2), 7, np.uint16), num_classes=8)
    path = tmp_path / "m.png"
    write_mask(path, mask)
    with pytest.raises(ValidationError, match=r"row=0, col=0"):
        read_mask(path, num_classes=5)


def test_mask_cross_format_equal(tmp_path, rng):
    labels = rng.integers(0, 6, (8, 8)).astype(np.uint16)
    mask = SegmentationMask(labels=labels, num_classes=6)
    write_mask(tmp_path / "m.npy", mask)
    write_mask(tmp_path / "m.png", mask)
    a = read_mask(tmp_path / "m.npy", 6)
    b = read_mask(tmp_path / "m.png", 6)
    assert np.array_equal(a.labels, b.labels)


def test_mask_png_16bit_when_many_classes(tmp_path):
    labels = np.array([[0, 300], [900, 2]], np.uint16)
    mask = SegmentationMask(labels=labels, num_classes=1000)
    path = tmp_path / "deep.png"
    write_mask(path, mask)
    back = read_mask(path, 1000)
    assert np.array_equal(back.labels, labels)


def test_argmax_basic():
    values = np.array([[[0.1, 0.7, 0.2]]], np.float32)
    assert argmax_mask(ProbabilityMap(values=values)).labels[0, 0] == 1


def test_argmax_tie_takes_smallest_index():
    values = np.array([[[0.5, 0.5]]], np.float32)
    assert argmax_mask(ProbabilityMap(values=values)).labels[0, 0] == 0


def test_argmax_matches_per_pixel_scan(rng):
    values = random_probability_values(rng, 8, 8, 4)
    mask = argmax_mask(ProbabilityMap(values=values))
    for r in range(8):
        for c in range(8):
            best = 0
            for k in range(1, 4):
                if values[r, c, k] > values[r, c, best]:
                    best = k
            assert mask.labels[r, c] == best


def test_argmax_invariant_under_pixel_rescale(rng):
    values = random_probability_values(rng, 6, 6, 5).astype(np.float64)
    scales = rng.uniform(0.2, 5.0, (6, 6, 1))
    rescaled = values * scales
    rescaled /= rescaled.sum(axis=2, keepdims=True)
    a = argmax_mask(ProbabilityMap(values=values.astype(np.float32)))
    b = argmax_mask(ProbabilityMap(values=rescaled.astype(np.float32)))
    assert np.array_equal(a.labels, b.labels)


def _write_minimal_corpus(tmp_path, image_ids):
    entries = []
    for image_id in image_ids:
        values = np.full((2, 2, 2), 0.5, np.float32)
        write_probability_map(tmp_path / f"{image_id}.npy", ProbabilityMap(values=values))
        entries.append(ManifestEntry(image_id=image_id, prob_path=f"{image_id}.npy"))
    return DatasetManifest(entries=entries, num_classes=2, root=tmp_path)


def test_manifest_round_trip_preserves_order(tmp_path):
    manifest = _write_minimal_corpus(tmp_path, ["b", "a", "c"])
    write_manifest(tmp_path / "manifest.json", manifest)
    back = read_manifest(tmp_path / "manifest.json")
    assert [e.image_id for e in back.entries] == ["b", "a", "c"]
    assert back.num_classes == 2


def test_manifest_rejects_duplicate_ids(tmp_path):
    manifest = _write_minimal_corpus(tmp_path, ["a"])
    payload = {
        "num_classes": 2,
        "entries": [
            {"image_id": "a", "prob_path": "a.npy"},
            {"image_id": "a", "prob_path": "a.npy"},
        ],
    }
    (tmp_path / "manifest.json").write_text(json.dumps(payload))
    with pytest.raises(ValidationError, match="duplicate"):
        read_manifest(tmp_path / "manifest.json")
    del manifest


def test_manifest_rejects_missing_files(tmp_path):
    payload = {"num_classes": 2, "entries": [{"image_id": "a", "prob_path": "gone.npy"}]}
    (tmp_path / "manifest.json").write_text(json.dumps(payload))
    with pytest.raises(ValidationError, match="gone.npy"):
        read_manifest(tmp_path / "manifest.json")
