"""Supervision-risk algebra for ensembles of imperfect classifiers.

A supervision (a predicted class distribution, a noisy label, or any convex
combination of predictions) is scored by its mean squared Euclidean distance
to the one-hot ground truth.  This module provides:

* empirical risk and cross-risk estimators over aligned sample sets,
* the n-by-n risk matrix ``R`` whose diagonal holds individual risks and
  whose off-diagonal entries measure how strongly two classifiers err
  together,
* closed forms for the risk-optimal convex combination weights, for the
  two-classifier case, the general invertible-``R`` case, and the
  equi-correlated symmetric case,
* independent brute-force minimizers (1-D grid, simplex grid) used by the
  test suite and the ``theorem-check`` command to verify the closed forms.

All functions are pure and operate on immutable inputs.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

__all__ = [
    "DimensionError",
    "IdenticalClassifierError",
    "SingularMatrixError",
    "DominatedClassifierWarning",
    "RiskMatrix",
    "DualSolution",
    "MultiSolution",
    "CodistillationSolution",
    "PROB_TOL",
    "one_hot",
    "check_prob_rows",
    "check_one_hot_rows",
    "cooperation_weights",
    "empirical_risk",
    "cross_risk",
    "risk_matrix",
    "cooperation_risk",
    "optimal_lambda_dual",
    "optimal_lambda_multi",
    "symmetric_min_risk",
    "codistillation_risk",
    "grid_min_dual",
    "simplex_grid_min",
    "simplex_grid_min_exhaustive",
]

PROB_TOL = 1e-9
PIVOT_TOL = 1e-10


class DimensionError(ValueError):
    """Inputs are empty, ragged, or otherwise shape-incompatible."""


class IdenticalClassifierError(ValueError):
    """Two-classifier closed form is degenerate: r1 + r2 - 2*r12 <= 0."""


class SingularMatrixError(ValueError):
    """Risk matrix is numerically singular; the message names the pivot."""


class DominatedClassifierWarning(UserWarning):
    """Optimal dual weight fell outside (0, 1): one classifier dominates."""


def one_hot(labels, c: int) -> np.ndarray:
    """Encode integer class labels as exact 0/1 rows of width ``c``."""
    labels = np.atleast_1d(np.asarray(labels))
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise ValueError(f"labels must lie in [0, {c}), got range "
                         f"[{labels.min()}, {labels.max()}]")
    out = np.zeros((labels.size, c), dtype=np.float64)
    out[np.arange(labels.size), labels] = 1.0
    return out


def check_prob_rows(arr, name: str = "predictions") -> np.ndarray:
    """Validate a stack of probability rows; returns a float64 (N, c) array.

    Each row must be entrywise >= 0 (up to PROB_TOL) and sum to 1 within
    PROB_TOL.  A single vector is promoted to a one-row stack.
    """
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2 or a.size == 0:
        raise DimensionError(f"{name}: expected a non-empty (N, c) stack, "
                             f"got shape {np.shape(arr)}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name}: non-finite entries")
    if a.min() < -PROB_TOL:
        raise ValueError(f"{name}: negative entry {a.min()}")
    sums = a.sum(axis=1)
    worst = np.abs(sums - 1.0).max()
    if worst > PROB_TOL:
        raise ValueError(f"{name}: row sums deviate from 1 by {worst:.3e}")
    return a


def check_one_hot_rows(arr, name: str = "truths") -> np.ndarray:
    """Validate a stack of exact one-hot rows."""
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2 or a.size == 0:
        raise DimensionError(f"{name}: expected a non-empty (N, c) stack")
    if not np.all((a == 0.0) | (a == 1.0)) or not np.all(a.sum(axis=1) == 1.0):
        raise ValueError(f"{name}: rows must be exact one-hot vectors")
    return a


def cooperation_weights(values, n: int | None = None) -> np.ndarray:
    """Validate a cooperation-weight vector: finite entries summing to 1."""
    w = np.asarray(values, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise DimensionError("weights must be a non-empty 1-D vector")
    if n is not None and w.size != n:
        raise DimensionError(f"expected {n} weights, got {w.size}")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    if abs(w.sum() - 1.0) > PROB_TOL:
        raise ValueError(f"weights sum to {w.sum()!r}, expected 1 within "
                         f"{PROB_TOL:g}")
    return w


@dataclass(frozen=True)
class RiskMatrix:
    """Symmetric matrix of pairwise cross-risks; diagonal = individual risks."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.float64)
        if e.ndim != 2 or e.shape[0] != e.shape[1] or e.shape[0] == 0:
            raise DimensionError(f"risk matrix must be square, got {e.shape}")
        if not np.all(np.isfinite(e)):
            raise ValueError("risk matrix entries must be finite")
        if not np.array_equal(e, e.T):
            raise ValueError("risk matrix must be exactly symmetric")
        if np.diagonal(e).min() < 0.0:
            raise ValueError("diagonal risks must be non-negative")
        e = e.copy()
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def n(self) -> int:
        return self.entries.shape[0]


class DualSolution(NamedTuple):
    lambda_star: float
    min_risk: float


class MultiSolution(NamedTuple):
    weights: np.ndarray
    min_risk: float


class CodistillationSolution(NamedTuple):
    lambda_star: float
    min_risk: float


def cross_risk(preds_i, preds_j, truths) -> float:
    """Mean inner product of the two classifiers' prediction errors.

    For aligned samples with predictions p_i, p_j and one-hot truth y*,
    returns mean (p_i - y*)^T (p_j - y*).  With preds_i == preds_j this is
    the empirical risk of that classifier.
    """
    pi = check_prob_rows(preds_i, "preds_i")
    pj = check_prob_rows(preds_j, "preds_j")
    y = check_one_hot_rows(truths)
    if not (pi.shape == pj.shape == y.shape):
        raise DimensionError(
            f"aligned shapes required, got {pi.shape}, {pj.shape}, {y.shape}")
    return float(np.mean(np.sum((pi - y) * (pj - y), axis=1)))


def empirical_risk(preds, truths) -> float:
    """Mean squared Euclidean distance between predictions and one-hot truth.

    Defined as cross_risk(preds, preds, truths), so the two agree exactly.
    Bounded by 2 (a one-hot prediction on the wrong class).
    """
    return cross_risk(preds, preds, truths)


def risk_matrix(all_preds: Sequence, truths, *,
                check_nonnegative: bool = True) -> RiskMatrix:
    """Build the n-by-n risk matrix from n aligned prediction stacks.

    Entry (i, j) is cross_risk(all_preds[i], all_preds[j], truths); the
    matrix is mirrored from a single upper-triangle pass so symmetry is
    exact.  Every entry is asserted non-negative (predictions combined
    against a one-hot truth err toward each other on constructed data);
    pass check_nonnegative=False to skip that assertion on adversarial
    inputs.
    """
    if len(all_preds) == 0:
        raise DimensionError("need at least one prediction stack")
    y = check_one_hot_rows(truths)
    errs = []
    for k, preds in enumerate(all_preds):
        p = check_prob_rows(preds, f"all_preds[{k}]")
        if p.shape != y.shape:
            raise DimensionError(
                f"all_preds[{k}] has shape {p.shape}, truths {y.shape}")
        errs.append(p - y)
    n = len(errs)
    entries = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            r = float(np.mean(np.sum(errs[i] * errs[j], axis=1)))
            entries[i, j] = r
            entries[j, i] = r
    if check_nonnegative and entries.min() < 0.0:
        i, j = np.unravel_index(np.argmin(entries), entries.shape)
        raise ValueError(
            f"negative cross-risk r[{i}][{j}] = {entries[i, j]!r}; pass "
            "check_nonnegative=False for adversarial inputs")
    return RiskMatrix(entries)


def cooperation_risk(weights, R: RiskMatrix) -> float:
    """Risk of the weighted combination: the quadratic form w R w^T."""
    w = cooperation_weights(weights, n=R.n)
    return float(w @ R.entries @ w)


def optimal_lambda_dual(r1: float, r2: float, r12: float) -> DualSolution:
    """Risk-minimizing weight for combining two classifiers.

    The combined risk q(l) = l^2 r1 + 2 l (1-l) r12 + (1-l)^2 r2 is minimized
    at l* = (r2 - r12) / (r1 + r2 - 2 r12) with value
    r1 - (r1 - r12)^2 / (r1 + r2 - 2 r12).  Requires a positive denominator
    (non-identical classifiers).  Whenever 0 <= r12 < min(r1, r2) the optimum
    lies strictly inside (0, 1) and beats both individual risks; inputs
    violating that precondition return a weight outside (0, 1) and raise
    DominatedClassifierWarning rather than clamping.
    """
    den = r1 + r2 - 2.0 * r12
    if den <= 0.0:
        raise IdenticalClassifierError(
            f"r1 + r2 - 2*r12 = {den!r} <= 0: identical (or anti-diverse) "
            "classifiers admit no interior optimum")
    lam = (r2 - r12) / den
    min_risk = r1 - (r1 - r12) ** 2 / den
    if not 0.0 < lam < 1.0:
        warnings.warn(
            f"lambda* = {lam!r} outside (0, 1): one classifier dominates",
            DominatedClassifierWarning, stacklevel=2)
    return DualSolution(lam, min_risk)


def _solve_partial_pivot(a: np.ndarray, b: np.ndarray,
                         pivot_tol: float = PIVOT_TOL) -> np.ndarray:
    """Solve a x = b by Gaussian elimination with partial pivoting.

    Raises SingularMatrixError naming the failing pivot column when the
    best available pivot magnitude drops below ``pivot_tol``.
    """
    a = np.array(a, dtype=np.float64)
    x = np.array(b, dtype=np.float64)
    n = x.size
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        if abs(a[p, k]) < pivot_tol:
            raise SingularMatrixError(
                f"singular matrix: pivot {k} has magnitude "
                f"{abs(a[p, k]):.3e} < {pivot_tol:g}")
        if p != k:
            a[[k, p]] = a[[p, k]]
            x[[k, p]] = x[[p, k]]
        for i in range(k + 1, n):
            m = a[i, k] / a[k, k]
            a[i, k:] -= m * a[k, k:]
            x[i] -= m * x[k]
    out = np.zeros(n)
    for k in range(n - 1, -1, -1):
        out[k] = (x[k] - a[k, k + 1:] @ out[k + 1:]) / a[k, k]
    return out


def optimal_lambda_multi(R: RiskMatrix) -> MultiSolution:
    """Risk-minimizing weights over all vectors summing to 1.

    With ones = (1, ..., 1), the Lagrange stationary point of w R w^T
    subject to ones @ w = 1 is w0 = R^-1 ones / (ones R^-1 ones), attaining
    1 / sum_ij [R^-1]_ij.  R must be invertible; the linear solve uses
    partial-pivot Gaussian elimination with pivot threshold 1e-10.
    """
    x = _solve_partial_pivot(R.entries, np.ones(R.n))
    total = float(x.sum())
    if total <= 0.0:
        raise ValueError(
            f"sum of R^-1 entries is {total!r} <= 0; the quadratic form is "
            "not bounded-below-positive on the constraint plane")
    return MultiSolution(x / total, 1.0 / total)


def symmetric_min_risk(n: int, r_diag: float, r_off: float) -> float:
    """Minimum cooperation risk for n equi-correlated classifiers.

    When every individual risk equals r_diag and every pairwise cross-risk
    equals r_off, the optimum is uniform weights with value
    (r_diag - r_off)/n + r_off: strictly decreasing in n and approaching
    r_off from above.  Requires r_diag > r_off >= 0.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if r_off < 0.0:
        raise ValueError(f"r_off must be >= 0, got {r_off!r}")
    if r_off >= r_diag:
        raise ValueError(
            f"requires r_off < r_diag, got r_off={r_off!r} >= "
            f"r_diag={r_diag!r}")
    return (r_diag - r_off) / n + r_off


def codistillation_risk(r_y: float, r_p2: float) -> CodistillationSolution:
    """Optimal mix of the noisy labels with a peer prediction.

    Treating the noisy label as a fixed 'classifier' with risk r_y and the
    peer with risk r_p2 (their errors uncorrelated), the best mixing weight
    on the label is r_p2 / (r_y + r_p2) with risk r_y r_p2 / (r_y + r_p2),
    below both inputs.
    """
    if r_y <= 0.0 or r_p2 <= 0.0:
        raise ValueError(f"risks must be positive, got r_y={r_y!r}, "
                         f"r_p2={r_p2!r}")
    total = r_y + r_p2
    return CodistillationSolution(r_p2 / total, r_y * r_p2 / total)


# ---------------------------------------------------------------------------
# Brute-force minimizers.  Independent of the closed forms above: they only
# evaluate the quadratic risk on grid points.
# ---------------------------------------------------------------------------

def grid_min_dual(r1: float, r2: float, r12: float,
                  step: float = 1e-5) -> DualSolution:
    """Exhaustive 1-D grid minimization of the two-classifier combined risk."""
    lams = np.linspace(0.0, 1.0, round(1.0 / step) + 1)
    risks = lams ** 2 * r1 + 2 * lams * (1 - lams) * r12 + (1 - lams) ** 2 * r2
    k = int(np.argmin(risks))
    return DualSolution(float(lams[k]), float(risks[k]))


def _quad(entries: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    return np.einsum("ki,ij,kj->k", candidates, entries, candidates)


def simplex_grid_min_exhaustive(entries: np.ndarray,
                                resolution: float) -> MultiSolution:
    """Enumerate every simplex grid point (n <= 3 only) and take the best."""
    entries = np.asarray(entries, dtype=np.float64)
    n = entries.shape[0]
    m = round(1.0 / resolution)
    if n == 1:
        return MultiSolution(np.ones(1), float(entries[0, 0]))
    if n == 2:
        i = np.arange(m + 1)
        cands = np.column_stack([i, m - i]) / m
    elif n == 3:
        rows = []
        for i in range(m + 1):
            j = np.arange(m - i + 1)
            rows.append(np.column_stack([np.full(j.size, i), j, m - i - j]))
        cands = np.concatenate(rows) / m
    else:
        raise ValueError("exhaustive enumeration supported for n <= 3 only")
    risks = _quad(entries, cands)
    k = int(np.argmin(risks))
    return MultiSolution(cands[k], float(risks[k]))


def _descend_on_grid(entries: np.ndarray, x: np.ndarray, m: int,
                     max_sweeps: int = 500) -> tuple[np.ndarray, float]:
    """Cyclic exact line search over coordinate pairs on the simplex grid.

    ``x`` holds integer grid coordinates summing to ``m``.  For each pair
    (i, j) the total x[i] + x[j] is redistributed to the grid point with the
    lowest quadratic risk (ties to the smallest x[i]).  The risk is convex,
    so sweeps terminate at a grid point no pairwise move can improve.
    """
    n = x.size
    best = float(_quad(entries, x[None, :] / m)[0])
    for _ in range(max_sweeps):
        improved = False
        for i, j in itertools.combinations(range(n), 2):
            s = int(x[i] + x[j])
            if s == 0:
                continue
            t = np.arange(s + 1)
            cands = np.repeat(x[None, :], s + 1, axis=0)
            cands[:, i] = t
            cands[:, j] = s - t
            risks = _quad(entries, cands / m)
            k = int(np.argmin(risks))
            if risks[k] < best:
                best = float(risks[k])
                x = cands[k]
                improved = True
        if not improved:
            break
    return x, best


def simplex_grid_min(entries: np.ndarray, resolution: float = 1e-3,
                     enumerate_limit: int = 600_000) -> MultiSolution:
    """Grid search for the minimum quadratic risk over the simplex.

    Every candidate lies on the simplex grid of the given resolution.  When
    the full grid is small enough it is enumerated outright; otherwise a
    cyclic exact line search over coordinate pairs runs from the uniform
    point and from every corner, which for a convex quadratic lands within
    grid resolution of the constrained optimum.
    """
    entries = np.asarray(entries, dtype=np.float64)
    n = entries.shape[0]
    m = round(1.0 / resolution)
    if n <= 3 and math.comb(m + n - 1, n - 1) <= enumerate_limit:
        return simplex_grid_min_exhaustive(entries, resolution)
    uniform = np.full(n, m // n, dtype=np.int64)
    uniform[: m - int(uniform.sum())] += 1
    starts = [uniform] + [m * np.eye(n, dtype=np.int64)[k] for k in range(n)]
    best_x, best_risk = None, np.inf
    for x0 in starts:
        x, risk = _descend_on_grid(entries, x0.copy(), m)
        if risk < best_risk:
            best_x, best_risk = x, risk
    return MultiSolution(best_x / m, best_risk)
