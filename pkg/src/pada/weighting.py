"""Class weights from averaged target predictions.

The weight of a source class is the mean probability the current classifier
assigns to it over all target samples.  Classes that never show up in the
target domain collect little mass and, after dividing by the largest entry,
end up with small weights in both the classification and the adversarial
loss.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateWeightsError, DistributionError, ParameterError, WeightStateError

ROW_SUM_TOL = 1e-9


@dataclass(frozen=True)
class ClassWeights:
    gamma: np.ndarray
    normalized: bool

    def __post_init__(self):
        g = np.array(self.gamma, dtype=np.float64).reshape(-1)
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)

    def __len__(self):
        return self.gamma.shape[0]


def uniform_weights(num_classes: int) -> ClassWeights:
    """All-ones normalized weights: every source class counts fully."""
    return ClassWeights(np.ones(num_classes), normalized=True)


def estimate_class_weights(target_probs) -> ClassWeights:
    probs = np.asarray(target_probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[0] == 0:
        raise ParameterError("need at least one target prediction row")
    if np.any(probs < 0) or np.any(np.abs(probs.sum(axis=1) - 1.0) > ROW_SUM_TOL):
        raise DistributionError("target predictions must be probability rows")
    return ClassWeights(probs.mean(axis=0), normalized=False)


def normalize_weights(w: ClassWeights) -> ClassWeights:
    """Divide by the largest entry so the maximum is exactly 1."""
    top = w.gamma.max()
    if not top > 0.0:
        raise DegenerateWeightsError("cannot normalize an all-zero weight vector")
    return ClassWeights(w.gamma / top, normalized=True)


def weight_for_sample(w: ClassWeights, label: int) -> float:
    if not w.normalized:
        raise WeightStateError("class weights must be normalized before lookup")
    if not 0 <= label < len(w):
        raise IndexError(f"label {label} out of range [0, {len(w)})")
    return float(w.gamma[label])


def weights_for_labels(w: ClassWeights, labels) -> np.ndarray:
    """Vectorized :func:`weight_for_sample` over a label array."""
    if not w.normalized:
        raise WeightStateError("class weights must be normalized before lookup")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= len(w)):
        raise IndexError(f"label out of range [0, {len(w)})")
    return w.gamma[labels]


def write_weight_history(rows, path) -> None:
    """Write ``(epoch, ClassWeights)`` pairs as ``epoch,gamma_0,...`` lines."""
    rows = list(rows)
    k = len(rows[0][1]) if rows else 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch"] + [f"gamma_{i}" for i in range(k)])
        for epoch, w in rows:
            writer.writerow([epoch] + [format(v, ".17g") for v in w.gamma])
