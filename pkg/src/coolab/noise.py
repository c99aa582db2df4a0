"""Synthetic datasets, label-noise injection, partitioning, and ingestion.

Datasets keep two label views: the noisy labels that training code may see
and the clean labels reserved for evaluation oracles.  The clean view lives
behind the ``GroundTruth`` guard type; trainers receive a ``TrainerView``
that simply has no ground-truth field.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

__all__ = [
    "TransitionMatrix",
    "GroundTruth",
    "LabeledInstance",
    "TrainerView",
    "NoisyDataset",
    "IdxMagicError",
    "IdxTruncatedError",
    "IdxCountMismatchError",
    "pairwise_transition",
    "symmetric_transition",
    "asymmetric_transition",
    "inject_noise",
    "corrupt_dataset",
    "make_blobs",
    "make_two_moons",
    "partition",
    "load_idx",
    "save_dataset_csv",
    "load_dataset_csv",
]

ROW_TOL = 1e-9


class IdxMagicError(ValueError):
    """IDX file does not start with the expected magic number."""


class IdxTruncatedError(ValueError):
    """IDX file is shorter or longer than its header promises."""


class IdxCountMismatchError(ValueError):
    """Image and label IDX files disagree on the instance count."""


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic c-by-c matrix: rows[i][j] = P(noisy=j | true=i)."""

    rows: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rows, dtype=np.float64)
        if r.ndim != 2 or r.shape[0] != r.shape[1] or r.shape[0] < 2:
            raise ValueError(f"transition matrix must be square with c >= 2, "
                             f"got shape {r.shape}")
        if r.min() < 0.0:
            raise ValueError(f"negative transition probability {r.min()!r}")
        worst = np.abs(r.sum(axis=1) - 1.0).max()
        if worst > ROW_TOL:
            raise ValueError(f"row sums deviate from 1 by {worst:.3e}")
        r = r.copy()
        r.setflags(write=False)
        object.__setattr__(self, "rows", r)

    @property
    def c(self) -> int:
        return self.rows.shape[0]


def _check_ratio(r: float):
    if not 0.0 <= r < 1.0:
        raise ValueError(f"noise ratio must lie in [0, 1), got {r!r}")


def pairwise_transition(c: int, r: float) -> TransitionMatrix:
    """Circulant pairwise noise: class i flips to (i+1) mod c with mass r."""
    if c < 2:
        raise ValueError(f"need c >= 2 classes, got {c}")
    _check_ratio(r)
    rows = np.eye(c) * (1.0 - r)
    rows[np.arange(c), (np.arange(c) + 1) % c] += r
    return TransitionMatrix(rows)


def symmetric_transition(c: int, r: float) -> TransitionMatrix:
    """Mass r spread uniformly over the c-1 wrong classes."""
    if c < 2:
        raise ValueError(f"need c >= 2 classes, got {c}")
    _check_ratio(r)
    rows = np.full((c, c), r / (c - 1))
    rows[np.diag_indices(c)] = 1.0 - r
    return TransitionMatrix(rows)


def asymmetric_transition(c: int, r: float, flip_pairs) -> TransitionMatrix:
    """Class-dependent flips along explicit (source, target) pairs.

    Listed source rows put mass r on their target; unlisted rows stay
    identity.  Sources must be distinct and targets differ from sources.
    """
    if c < 2:
        raise ValueError(f"need c >= 2 classes, got {c}")
    _check_ratio(r)
    rows = np.eye(c)
    seen = set()
    for s, t in flip_pairs:
        if not (0 <= s < c and 0 <= t < c):
            raise ValueError(f"flip pair ({s}, {t}) out of range for c={c}")
        if s == t:
            raise ValueError(f"flip pair ({s}, {t}) maps a class to itself")
        if s in seen:
            raise ValueError(f"duplicate source class {s}")
        seen.add(s)
        rows[s, s] = 1.0 - r
        rows[s, t] = r
    return TransitionMatrix(rows)


def inject_noise(clean_labels, T: TransitionMatrix, seed) -> np.ndarray:
    """Corrupt labels by sampling each from its transition row.

    Deterministic for a fixed seed; every output is drawn independently
    from the categorical distribution T.rows[true_label].
    """
    labels = np.asarray(clean_labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= T.c):
        raise ValueError(f"labels out of range [0, {T.c})")
    rng = np.random.default_rng(seed)
    u = rng.random(labels.size)
    cum = np.cumsum(T.rows, axis=1)
    cum[:, -1] = 1.0  # guard the upper edge against 1e-9 row-sum slack
    return np.argmax(u[:, None] < cum[labels], axis=1).astype(np.int64)


@dataclass(frozen=True)
class GroundTruth:
    """Oracle-visible clean labels.  Training code must never unwrap this."""

    labels: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.labels, dtype=np.int64).copy()
        a.setflags(write=False)
        object.__setattr__(self, "labels", a)


class LabeledInstance(NamedTuple):
    features: np.ndarray
    noisy_label: int
    true_label: int


@dataclass(frozen=True)
class TrainerView:
    """What training code is allowed to see: features and noisy labels."""

    features: np.ndarray
    noisy_labels: np.ndarray
    ids: np.ndarray
    c: int

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class NoisyDataset:
    """Feature matrix plus noisy labels, with guarded clean labels.

    ``provenance`` records the generator, its seed, and any noise spec so a
    dataset can be regenerated; it travels through partitioning and CSV
    round trips.
    """

    features: np.ndarray
    noisy_labels: np.ndarray
    truth: GroundTruth
    c: int
    ids: np.ndarray = field(default=None)  # type: ignore[assignment]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.noisy_labels, dtype=np.int64)
        if x.ndim != 2 or x.shape[0] == 0:
            raise ValueError(f"features must be a non-empty (N, d) matrix, "
                             f"got {x.shape}")
        n = x.shape[0]
        if y.shape != (n,) or self.truth.labels.shape != (n,):
            raise ValueError("label arrays must align with features")
        for name, arr in (("noisy", y), ("true", self.truth.labels)):
            if arr.min() < 0 or arr.max() >= self.c:
                raise ValueError(f"{name} labels out of range [0, {self.c})")
        ids = (np.arange(n, dtype=np.int64) if self.ids is None
               else np.asarray(self.ids, dtype=np.int64))
        if ids.shape != (n,) or np.unique(ids).size != n:
            raise ValueError("ids must be unique and align with features")
        x = x.copy()
        y = y.copy()
        ids = ids.copy()
        for arr in (x, y, ids):
            arr.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "noisy_labels", y)
        object.__setattr__(self, "ids", ids)

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.features.shape[0]

    def instance(self, i: int) -> LabeledInstance:
        return LabeledInstance(self.features[i], int(self.noisy_labels[i]),
                               int(self.truth.labels[i]))

    def trainer_view(self) -> TrainerView:
        return TrainerView(self.features, self.noisy_labels, self.ids, self.c)

    def observed_noise_rate(self) -> float:
        """Oracle-only: fraction of instances whose noisy label is wrong."""
        return float(np.mean(self.noisy_labels != self.truth.labels))

    def subset(self, index, provenance_note: str | None = None) -> "NoisyDataset":
        prov = dict(self.provenance)
        if provenance_note:
            prov["subset"] = provenance_note
        return NoisyDataset(self.features[index], self.noisy_labels[index],
                            GroundTruth(self.truth.labels[index]), self.c,
                            ids=self.ids[index], provenance=prov)


def corrupt_dataset(dataset: NoisyDataset, T: TransitionMatrix,
                    seed) -> NoisyDataset:
    """Inject static label noise once, re-checking the realized flip rate.

    The realized fraction of flipped labels must sit within 3 binomial
    standard deviations of the rate the transition matrix implies for this
    label distribution.
    """
    if T.c != dataset.c:
        raise ValueError(f"transition matrix has c={T.c}, dataset c={dataset.c}")
    clean = dataset.truth.labels
    noisy = inject_noise(clean, T, seed)
    counts = np.bincount(clean, minlength=dataset.c)
    flip_p = 1.0 - np.diagonal(T.rows)
    n = len(dataset)
    expected = float(counts @ flip_p) / n
    sigma = float(np.sqrt(counts @ (flip_p * (1.0 - flip_p)))) / n
    observed = float(np.mean(noisy != clean))
    if abs(observed - expected) > 3.0 * sigma + 1e-12:
        raise RuntimeError(
            f"realized noise rate {observed:.4f} outside 3-sigma band of "
            f"expected {expected:.4f} (sigma {sigma:.4g})")
    prov = dict(dataset.provenance)
    prov["noise"] = {"rows_diag": [float(v) for v in np.diagonal(T.rows)],
                     "seed": seed}
    return NoisyDataset(dataset.features, noisy, dataset.truth, dataset.c,
                        ids=dataset.ids, provenance=prov)


def make_blobs(c: int, d: int, per_class: int, spread: float,
               seed) -> NoisyDataset:
    """Isotropic Gaussian blobs with class means spaced on the unit sphere.

    Means sit on the unit circle in the first two coordinates at angular
    spacing 2*pi/c (zeros elsewhere), so adjacent classes are geometric
    neighbours.  Labels start clean (noisy == true).
    """
    if c < 2 or d < 2:
        raise ValueError(f"need c >= 2 and d >= 2, got c={c}, d={d}")
    if per_class < 1:
        raise ValueError(f"per_class must be >= 1, got {per_class}")
    if spread < 0.0:
        raise ValueError(f"spread must be >= 0, got {spread!r}")
    rng = np.random.default_rng(seed)
    angles = 2.0 * np.pi * np.arange(c) / c
    means = np.zeros((c, d))
    means[:, 0] = np.cos(angles)
    means[:, 1] = np.sin(angles)
    labels = np.repeat(np.arange(c), per_class)
    x = means[labels] + spread * rng.standard_normal((labels.size, d))
    perm = rng.permutation(labels.size)
    return NoisyDataset(x[perm], labels[perm], GroundTruth(labels[perm]), c,
                        provenance={"generator": "blobs", "c": c, "d": d,
                                    "per_class": per_class, "spread": spread,
                                    "seed": seed})


def make_two_moons(per_class: int, noise_std: float, seed) -> NoisyDataset:
    """Two interleaved half-moons in the plane; c=2, d=2, labels clean."""
    if per_class < 1:
        raise ValueError(f"per_class must be >= 1, got {per_class}")
    if noise_std < 0.0:
        raise ValueError(f"noise_std must be >= 0, got {noise_std!r}")
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, np.pi, per_class)
    outer = np.column_stack([np.cos(t), np.sin(t)])
    inner = np.column_stack([1.0 - np.cos(t), 0.5 - np.sin(t)])
    x = np.concatenate([outer, inner])
    x += noise_std * rng.standard_normal(x.shape)
    labels = np.repeat(np.arange(2), per_class)
    perm = rng.permutation(labels.size)
    return NoisyDataset(x[perm], labels[perm], GroundTruth(labels[perm]), 2,
                        provenance={"generator": "two_moons",
                                    "per_class": per_class,
                                    "noise_std": noise_std, "seed": seed})


def partition(dataset: NoisyDataset, n: int, seed) -> list[NoisyDataset]:
    """Split into n disjoint exhaustive parts with sizes differing by <= 1."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if n > len(dataset):
        raise ValueError(f"cannot split {len(dataset)} instances into {n} parts")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(dataset))
    return [dataset.subset(np.sort(chunk), provenance_note=f"part {k + 1}/{n}")
            for k, chunk in enumerate(np.array_split(perm, n))]


_IDX_IMAGE_MAGIC = 0x00000803
_IDX_LABEL_MAGIC = 0x00000801


def _read_idx_header(path, raw: bytes, magic: int, n_dims: int) -> tuple:
    head = 4 + 4 * n_dims
    if len(raw) < head:
        raise IdxTruncatedError(f"{path}: file shorter than its {head}-byte header")
    got = struct.unpack(">I", raw[:4])[0]
    if got != magic:
        raise IdxMagicError(f"{path}: bad magic 0x{got:08x}, "
                            f"expected 0x{magic:08x}")
    return struct.unpack(f">{n_dims}I", raw[4:head])


def load_idx(images_path, labels_path) -> NoisyDataset:
    """Read a big-endian IDX image/label pair into a clean dataset.

    Pixels are scaled by 1/255 into [0, 1] float64 features; the two files
    must agree on the instance count.
    """
    with open(images_path, "rb") as f:
        img_raw = f.read()
    with open(labels_path, "rb") as f:
        lab_raw = f.read()
    n_img, rows, cols = _read_idx_header(images_path, img_raw,
                                         _IDX_IMAGE_MAGIC, 3)
    (n_lab,) = _read_idx_header(labels_path, lab_raw, _IDX_LABEL_MAGIC, 1)
    img_body = len(img_raw) - 16
    if img_body != n_img * rows * cols:
        raise IdxTruncatedError(
            f"{images_path}: header promises {n_img * rows * cols} pixel "
            f"bytes, file has {img_body}")
    lab_body = len(lab_raw) - 8
    if lab_body != n_lab:
        raise IdxTruncatedError(
            f"{labels_path}: header promises {n_lab} label bytes, "
            f"file has {lab_body}")
    if n_img != n_lab:
        raise IdxCountMismatchError(
            f"{images_path} holds {n_img} images but {labels_path} holds "
            f"{n_lab} labels")
    pixels = np.frombuffer(img_raw, dtype=np.uint8, offset=16)
    x = pixels.reshape(n_img, rows * cols).astype(np.float64) / 255.0
    labels = np.frombuffer(lab_raw, dtype=np.uint8, offset=8).astype(np.int64)
    c = int(labels.max()) + 1 if labels.size else 0
    c = max(c, 2)
    return NoisyDataset(x, labels, GroundTruth(labels), c,
                        provenance={"generator": "idx",
                                    "images": str(images_path),
                                    "labels": str(labels_path)})


def save_dataset_csv(dataset: NoisyDataset, path) -> None:
    """Write columns id, true_label, noisy_label, f0..f{d-1}.

    Floats are written with ``repr`` so a reload is bit-identical.
    """
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["id", "true_label", "noisy_label"]
                        + [f"f{j}" for j in range(dataset.d)])
        for i in range(len(dataset)):
            writer.writerow([int(dataset.ids[i]),
                             int(dataset.truth.labels[i]),
                             int(dataset.noisy_labels[i])]
                            + [repr(float(v)) for v in dataset.features[i]])


def load_dataset_csv(path) -> NoisyDataset:
    """Inverse of save_dataset_csv; class count inferred from the labels."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if (header is None or header[:3] != ["id", "true_label", "noisy_label"]
                or len(header) < 4):
            raise ValueError(f"{path}: not a dataset CSV (bad header)")
        d = len(header) - 3
        ids, true_labels, noisy_labels, feats = [], [], [], []
        for row in reader:
            if len(row) != d + 3:
                raise ValueError(f"{path}: row width {len(row)} != {d + 3}")
            ids.append(int(row[0]))
            true_labels.append(int(row[1]))
            noisy_labels.append(int(row[2]))
            feats.append([float(v) for v in row[3:]])
    if not ids:
        raise ValueError(f"{path}: no instances")
    labels = np.array(true_labels, dtype=np.int64)
    noisy = np.array(noisy_labels, dtype=np.int64)
    c = int(max(labels.max(), noisy.max())) + 1
    return NoisyDataset(np.array(feats), noisy, GroundTruth(labels), max(c, 2),
                        ids=np.array(ids, dtype=np.int64),
                        provenance={"generator": "csv", "path": str(path)})
