import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))


def random_probability_values(rng, h, w, n):
    """Random valid softmax tensor (float32, rows normalized)."""
    raw = rng.random((h, w, n)) + 1e-3
    raw /= raw.sum(axis=2, keepdims=True)
    return raw.astype(np.float32)


def random_mask_labels(rng, h, w, num_classes):
    return rng.integers(0, num_classes, (h, w)).astype(np.uint16)
