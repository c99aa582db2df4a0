"""Training-dynamics measurements: supervision precision, curve summaries.

Label precision counts a supervision as correct when its argmax equals the
clean class (ties broken toward the lowest class index, which is what
``np.argmax`` does).  The soft-target mass on the true class is tracked as
a secondary signal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .riskmath import RiskMatrix

__all__ = [
    "EpochMetrics",
    "label_precision",
    "true_class_mass",
    "last_k_average",
    "trend_increasing",
    "estimate_diag_off",
    "equicorrelation_deviation",
]


@dataclass(frozen=True)
class EpochMetrics:
    """One epoch's measurements: accuracies, supervision quality, risks."""

    epoch: int
    test_acc: np.ndarray
    label_precision: float
    r_hat: float
    R_hat: RiskMatrix | None

    def __post_init__(self):
        if not 0.0 <= self.label_precision <= 1.0:
            raise ValueError(f"label_precision must lie in [0, 1], "
                             f"got {self.label_precision!r}")
        if self.r_hat < 0.0:
            raise ValueError(f"r_hat must be >= 0, got {self.r_hat!r}")


def label_precision(supervisions, true_labels) -> float:
    """Fraction of supervisions whose argmax hits the clean class."""
    s = np.atleast_2d(np.asarray(supervisions, dtype=np.float64))
    y = np.asarray(true_labels)
    if s.size == 0 or y.size == 0:
        raise ValueError("empty input")
    if s.shape[0] != y.size:
        raise ValueError(f"{s.shape[0]} supervisions vs {y.size} labels")
    return float(np.mean(np.argmax(s, axis=1) == y))


def true_class_mass(supervisions, true_labels) -> float:
    """Mean probability the supervisions place on the clean class."""
    s = np.atleast_2d(np.asarray(supervisions, dtype=np.float64))
    y = np.asarray(true_labels)
    return float(np.mean(s[np.arange(y.size), y]))


def last_k_average(curve, k: int) -> float:
    """Arithmetic mean of the final k entries."""
    c = np.asarray(curve, dtype=np.float64)
    if not 1 <= k <= c.size:
        raise ValueError(f"k must lie in [1, {c.size}], got {k}")
    return float(c[-k:].mean())


def trend_increasing(curve, split: float = 0.25) -> bool:
    """True when the mean of the last split-fraction of the curve exceeds
    the mean of the first split-fraction."""
    c = np.asarray(curve, dtype=np.float64)
    if not 0.0 < split <= 0.5:
        raise ValueError(f"split must lie in (0, 0.5], got {split!r}")
    k = max(1, int(round(split * c.size)))
    return bool(c[-k:].mean() > c[:k].mean())


def estimate_diag_off(R: RiskMatrix) -> tuple[float, float]:
    """Means of the diagonal and off-diagonal entries of a risk matrix."""
    e = R.entries
    diag = float(np.diagonal(e).mean())
    if R.n == 1:
        return diag, float("nan")
    off_mask = ~np.eye(R.n, dtype=bool)
    return diag, float(e[off_mask].mean())


def equicorrelation_deviation(R: RiskMatrix) -> tuple[float, float]:
    """Max absolute deviation of the diagonal and off-diagonal entries from
    their means: how far the matrix is from the equi-correlated shape the
    shortcut formula assumes."""
    diag_mean, off_mean = estimate_diag_off(R)
    diag_dev = float(np.abs(np.diagonal(R.entries) - diag_mean).max())
    if R.n == 1:
        return diag_dev, 0.0
    off_mask = ~np.eye(R.n, dtype=bool)
    return diag_dev, float(np.abs(R.entries[off_mask] - off_mean).max())
