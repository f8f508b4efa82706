"""Pixel-wise uncertainty heatmaps derived from softmax output.

Four measures per pixel:

* ``one_minus_max_prob``: 1 minus the winning softmax probability.
* ``normalized_entropy``: entropy of the class distribution scaled into
  [0, 1], so the uniform distribution scores 1 and a one-hot scores 0.
* ``top2_margin``: gap between the two largest probabilities (a
  *certainty*; feature extraction uses 1 minus it).
* ``gradient_norm``: magnitude of the cross-entropy gradient w.r.t. the
  last convolution, treating the predicted class as the label. For a
  pixel with class probabilities p and pre-convolution features psi the
  gradient matrix has row k equal to p_k * psi for every non-predicted
  class and a zero row for the predicted class, so its Frobenius norm
  factorizes into ||psi||_2 * sqrt(sum of squared non-predicted p_k).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import FeatureTensor, ProbabilityMap
from .errors import ValidationError

LOG_CLAMP = 1e-12


@dataclass(frozen=True, eq=False)
class UncertaintyHeatmaps:
    """The per-pixel maps for one image; `gradient` is None without features."""

    one_minus_max: np.ndarray
    entropy: np.ndarray
    margin: np.ndarray
    gradient: np.ndarray | None = None

    def available_measures(self) -> list[str]:
        names = ["umax", "uent", "umargin"]
        if self.gradient is not None:
            names.append("ugrad")
        return names

    def measure(self, name: str) -> np.ndarray:
        """Return the heatmap oriented as an uncertainty (higher = worse)."""
        if name == "umax":
            return self.one_minus_max
        if name == "uent":
            return self.entropy
        if name == "umargin":
            return 1.0 - self.margin
        if name == "ugrad":
            if self.gradient is None:
                raise ValidationError("gradient heatmap not available")
            return self.gradient
        raise ValidationError(f"unknown uncertainty measure {name!r}")


def one_minus_max_prob(probs: ProbabilityMap) -> np.ndarray:
    return 1.0 - probs.values.max(axis=2).astype(np.float64)


def normalized_entropy(probs: ProbabilityMap) -> np.ndarray:
    """Entropy scaled by 1/log(N); exact zeros contribute nothing."""
    p = probs.values.astype(np.float64)
    logs = np.log(np.maximum(p, LOG_CLAMP))
    ent = -np.where(p > 0.0, p * logs, 0.0).sum(axis=2)
    return ent / np.log(probs.num_classes)


def top2_margin(probs: ProbabilityMap) -> np.ndarray:
    """Difference between the largest and second-largest class probability."""
    p = probs.values.astype(np.float64)
    top2 = np.partition(p, p.shape[2] - 2, axis=2)[:, :, -2:]
    return top2[:, :, 1] - top2[:, :, 0]


def gradient_norm(probs: ProbabilityMap, features: FeatureTensor) -> np.ndarray:
    if (features.height, features.width) != (probs.height, probs.width):
        raise ValidationError(
            f"feature tensor {features.values.shape[:2]} does not match "
            f"probability map {probs.values.shape[:2]}"
        )
    p = probs.values.astype(np.float64)
    winner = np.argmax(p, axis=2)
    psq = np.square(p)
    # zero the predicted class before summing; avoids cancellation near one-hot
    np.put_along_axis(psq, winner[:, :, None], 0.0, axis=2)
    psi_norm = np.sqrt(np.square(features.values.astype(np.float64)).sum(axis=2))
    return psi_norm * np.sqrt(psq.sum(axis=2))


def compute_heatmaps(probs: ProbabilityMap, features: FeatureTensor | None = None) -> UncertaintyHeatmaps:
    return UncertaintyHeatmaps(
        one_minus_max=one_minus_max_prob(probs),
        entropy=normalized_entropy(probs),
        margin=top2_margin(probs),
        gradient=None if features is None else gradient_norm(probs, features),
    )
