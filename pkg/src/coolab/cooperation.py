"""Cooperation supervision and the composite per-sample training loss.

The supervision for a sample is a convex combination of all classifiers'
current predictions, treated as a constant (stop-gradient) target.  The
per-sample loss adds a noisy-label cross-entropy term and an entropy
sharpening term, both of which apply only on the classifier's own data
partition; the noisy-label weight alpha is annealed over epochs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import prediction_entropy, soft_cross_entropy
from .riskmath import PROB_TOL, check_prob_rows

__all__ = [
    "AlphaSchedule",
    "CoolLossSpec",
    "combine",
    "build_supervision",
    "cool_loss",
    "alpha_at",
    "gate_coefficients",
]

ALPHA_MODES = ("constant", "linear")
ENTROPY_SCOPES = ("partition", "all")


@dataclass(frozen=True)
class AlphaSchedule:
    """Noisy-label weight over epochs: constant, or linear decay to zero."""

    alpha0: float
    end_epoch: int = 0
    mode: str = "constant"

    def __post_init__(self):
        if self.mode not in ALPHA_MODES:
            raise ValueError(f"mode must be one of {ALPHA_MODES}, "
                             f"got {self.mode!r}")
        if not np.isfinite(self.alpha0) or self.alpha0 < 0.0:
            raise ValueError(f"alpha0 must be finite and >= 0, "
                             f"got {self.alpha0!r}")
        if self.mode == "linear" and self.end_epoch < 1:
            raise ValueError("linear decay needs end_epoch >= 1")


def alpha_at(schedule: AlphaSchedule, epoch: int) -> float:
    """Evaluate the schedule; linear mode hits 0 at end_epoch and stays."""
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    if schedule.mode == "constant":
        return schedule.alpha0
    return schedule.alpha0 * max(0.0, 1.0 - epoch / schedule.end_epoch)


@dataclass(frozen=True)
class CoolLossSpec:
    """Per-sample loss bundle: supervision target plus gated term weights.

    ``noisy_label`` is present exactly when the sample lies in the
    classifier's own partition; ``beta`` carries whatever entropy-term
    scoping the caller chose (zero for out-of-partition samples under
    partition scoping).
    """

    cooperation_target: np.ndarray
    noisy_label: int | None
    alpha: float
    beta: float
    in_own_partition: bool

    def __post_init__(self):
        target = check_prob_rows(self.cooperation_target,
                                 "cooperation_target")[0]
        target = target.copy()
        target.setflags(write=False)
        object.__setattr__(self, "cooperation_target", target)
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0.0:
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")
        if (self.noisy_label is None) == self.in_own_partition:
            raise ValueError("noisy_label must be present exactly when the "
                             "sample is in the classifier's own partition")
        if self.noisy_label is not None and not (
                0 <= self.noisy_label < target.size):
            raise ValueError(f"noisy_label {self.noisy_label} out of range")


def combine(weights, preds) -> np.ndarray:
    """Convex combination sum_i w_i p_i of stacked predictions.

    ``preds`` is (n, c) for one sample or (n, N, c) for a batch; weights
    must be non-negative (each in [0, 1]) and sum to 1 so the result is a
    distribution.
    """
    w = np.asarray(weights, dtype=np.float64)
    p = np.asarray(preds, dtype=np.float64)
    if w.ndim != 1 or p.ndim not in (2, 3) or p.shape[0] != w.size:
        raise ValueError(f"need one weight per prediction stack, got "
                         f"{w.size} weights and preds shape {p.shape}")
    if w.min() < 0.0 or w.max() > 1.0:
        raise ValueError(f"weights must lie in [0, 1], got {w}")
    if abs(w.sum() - 1.0) > PROB_TOL:
        raise ValueError(f"weights sum to {w.sum()!r}, expected 1")
    return np.tensordot(w, p, axes=1)


def build_supervision(all_preds_for_sample, weights) -> np.ndarray:
    """Combine and mark the result constant (read-only): a stop-gradient
    target for re-training the individual networks."""
    out = combine(weights, all_preds_for_sample)
    out.setflags(write=False)
    return out


def cool_loss(prediction, spec: CoolLossSpec) -> float:
    """Composite loss: CE against the cooperation target, plus
    alpha * CE against the one-hot noisy label on the classifier's own
    partition, plus beta * prediction entropy (minimized, sharpening)."""
    pred = check_prob_rows(prediction, "prediction")[0]
    if pred.size != spec.cooperation_target.size:
        raise ValueError(f"prediction width {pred.size} does not match "
                         f"target width {spec.cooperation_target.size}")
    loss = soft_cross_entropy(pred, spec.cooperation_target)
    if spec.in_own_partition and spec.alpha > 0.0:
        one_hot_noisy = np.zeros_like(pred)
        one_hot_noisy[spec.noisy_label] = 1.0
        loss += spec.alpha * soft_cross_entropy(pred, one_hot_noisy)
    loss += spec.beta * prediction_entropy(pred)
    return loss


def gate_coefficients(in_own_partition: np.ndarray, alpha: float, beta: float,
                      entropy_scope: str = "partition"):
    """Per-sample (alpha, beta) vectors for a mixed batch.

    The noisy-label term always applies only on the classifier's own
    partition.  The entropy term follows ``entropy_scope``: "partition"
    gates it the same way, "all" applies it everywhere.
    """
    if entropy_scope not in ENTROPY_SCOPES:
        raise ValueError(f"entropy_scope must be one of {ENTROPY_SCOPES}, "
                         f"got {entropy_scope!r}")
    member = np.asarray(in_own_partition, dtype=np.float64)
    alpha_vec = alpha * member
    beta_vec = beta * member if entropy_scope == "partition" \
        else np.full_like(member, beta)
    return alpha_vec, beta_vec
