import numpy as np
import pytest

from conftest import random_probability_values
from oracles import outer_product_gradient_norm
from segqc.data import FeatureTensor, ProbabilityMap
from segqc.errors import ValidationError
from segqc.uncertainty import (
    compute_heatmaps,
    gradient_norm,
    normalized_entropy,
    one_minus_max_prob,
    top2_margin,
)


def _pmap(*pixel):
    return ProbabilityMap(values=np.array([[list(pixel)]], np.float32))


def test_one_minus_max_examples():
    assert one_minus_max_prob(_pmap(1, 0, 0, 0))[0, 0] == 0.0
    assert one_minus_max_prob(_pmap(0.25, 0.25, 0.25, 0.25))[0, 0] == pytest.approx(0.75)
    assert one_minus_max_prob(_pmap(0.6, 0.3, 0.1))[0, 0] == pytest.approx(0.4)


def test_entropy_examples():
    assert normalized_entropy(_pmap(1, 0, 0, 0))[0, 0] == 0.0
    for n in (2, 3, 4, 7):
        uniform = _pmap(*([1.0 / n] * n))
        assert normalized_entropy(uniform)[0, 0] == pytest.approx(1.0, abs=1e-6)
    assert normalized_entropy(_pmap(0.5, 0.5, 0, 0))[0, 0] == pytest.approx(0.5, abs=1e-9)


def test_margin_examples():
    assert top2_margin(_pmap(1, 0, 0))[0, 0] == pytest.approx(1.0)
    assert top2_margin(_pmap(0.25, 0.25, 0.25, 0.25))[0, 0] == 0.0
    assert top2_margin(_pmap(0.6, 0.3, 0.1))[0, 0] == pytest.approx(0.3)


def test_ranges_on_random_maps(rng):
    probs = ProbabilityMap(values=random_probability_values(rng, 16, 16, 5))
    umax = one_minus_max_prob(probs)
    ent = normalized_entropy(probs)
    margin = top2_margin(probs)
    assert np.all((umax >= 0) & (umax <= 1 - 1 / 5 + 1e-6))
    assert np.all((ent >= 0) & (ent <= 1 + 1e-12))
    assert np.all((margin >= 0) & (margin <= 1))


def test_full_margin_implies_one_hot(rng):
    values = random_probability_values(rng, 4, 4, 4).astype(np.float64)
    one_hot_at = [(0, 0), (2, 3), (3, 1)]
    for r, c in one_hot_at:
        values[r, c] = 0.0
        values[r, c, int(rng.integers(4))] = 1.0
    probs = ProbabilityMap(values=values.astype(np.float32))
    margin = top2_margin(probs)
    ent = normalized_entropy(probs)
    umax = one_minus_max_prob(probs)
    hits = margin == 1.0
    assert hits.sum() == len(one_hot_at)
    assert np.all(ent[hits] == 0.0)
    assert np.all(umax[hits] == 0.0)


def test_permutation_covariance(rng):
    values = random_probability_values(rng, 5, 6, 4)
    perm = rng.permutation(4)
    a = ProbabilityMap(values=values)
    b = ProbabilityMap(values=values[:, :, perm])
    assert np.array_equal(one_minus_max_prob(a), one_minus_max_prob(b))
    assert np.allclose(normalized_entropy(a), normalized_entropy(b), atol=1e-12, rtol=0)
    assert np.array_equal(top2_margin(a), top2_margin(b))


def test_entropy_base_independence(rng):
    probs = ProbabilityMap(values=random_probability_values(rng, 8, 8, 6))
    natural = normalized_entropy(probs)
    p = probs.values.astype(np.float64)
    logs2 = np.log2(np.maximum(p, 1e-12))
    base2 = -np.where(p > 0, p * logs2, 0.0).sum(axis=2) / np.log2(6)
    assert np.abs(natural - base2).max() < 1e-12


def test_gradient_norm_one_hot_is_zero():
    probs = _pmap(0, 1, 0)
    psi = FeatureTensor(values=np.array([[[2.0, 3.0]]], np.float32))
    assert gradient_norm(probs, psi)[0, 0] == 0.0


def test_gradient_norm_worked_example():
    probs = _pmap(0.8, 0.2)
    psi = FeatureTensor(values=np.array([[[3.0, 4.0]]], np.float32))
    assert gradient_norm(probs, psi)[0, 0] == pytest.approx(1.0, rel=1e-9)


def test_gradient_norm_zero_features():
    probs = _pmap(0.6, 0.4)
    psi = FeatureTensor(values=np.zeros((1, 1, 5), np.float32))
    assert gradient_norm(probs, psi)[0, 0] == 0.0


def test_gradient_norm_matches_outer_product_oracle(rng):
    for _ in range(50):
        n = int(rng.integers(2, 9))
        c = int(rng.integers(1, 17))
        values = random_probability_values(rng, 3, 3, n)
        psi = rng.normal(0, 2, (3, 3, c)).astype(np.float32)
        got = gradient_norm(ProbabilityMap(values=values), FeatureTensor(values=psi))
        for r in range(3):
            for cc in range(3):
                expected = outer_product_gradient_norm(
                    values[r, cc].astype(np.float64).tolist(),
                    psi[r, cc].astype(np.float64).tolist(),
                )
                assert got[r, cc] == pytest.approx(expected, rel=1e-6, abs=1e-12)


def test_gradient_norm_dimension_mismatch():
    probs = _pmap(0.5, 0.5)
    psi = FeatureTensor(values=np.zeros((2, 2, 3), np.float32))
    with pytest.raises(ValidationError, match="match"):
        gradient_norm(probs, psi)


def test_compute_heatmaps_with_and_without_features(rng):
    probs = ProbabilityMap(values=random_probability_values(rng, 4, 4, 3))
    without = compute_heatmaps(probs)
    assert without.gradient is None
    assert without.available_measures() == ["umax", "uent", "umargin"]
    psi = FeatureTensor(values=rng.normal(size=(4, 4, 2)).astype(np.float32))
    with_g = compute_heatmaps(probs, psi)
    assert with_g.available_measures() == ["umax", "uent", "umargin", "ugrad"]
    assert np.array_equal(with_g.measure("umargin"), 1.0 - with_g.margin)
