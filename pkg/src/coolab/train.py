"""Training arms: cooperative re-training plus the comparison baselines.

Every arm is a pure function of (dataset, test_set, config): all randomness
flows from ``config.seed`` through numpy SeedSequence with fixed purpose
tags, so a rerun is bit-identical.  Per-epoch measurements (test accuracy,
supervision precision, supervision risk, risk-matrix snapshots) land in a
RunRecord that serializes to CSV plus a JSON summary.

The cooperative arm follows the partition/pre-train/re-train recipe: the
dataset is split into n disjoint parts, each classifier warms up with plain
cross-entropy on its own part, and from ``start_epoch`` on, every
mini-batch (drawn from the full set) is labeled with the frozen convex
combination of all classifiers' predictions, with the noisy-label and
entropy terms gated to each classifier's own part.  Parameter updates wait
until every classifier's gradient for the batch is computed.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from types import SimpleNamespace

import numpy as np

from .cooperation import (
    ALPHA_MODES,
    ENTROPY_SCOPES,
    AlphaSchedule,
    alpha_at,
    combine,
    gate_coefficients,
)
from .metrics import (
    estimate_diag_off,
    label_precision,
    last_k_average,
    true_class_mass,
)
from .nn import (
    LOG_CLAMP,
    MlpParams,
    backward_batch,
    forward,
    fresh_momentum,
    init_params,
    sgd_step,
)
from .noise import NoisyDataset, partition
from .riskmath import (
    SingularMatrixError,
    cooperation_weights,
    empirical_risk,
    one_hot,
    optimal_lambda_multi,
    risk_matrix,
    symmetric_min_risk,
)

__all__ = [
    "METHODS",
    "TrainConfig",
    "RunRecord",
    "pretrain",
    "train_cool",
    "train_standard",
    "train_bootstrap",
    "train_codistillation",
    "train_coteaching",
    "train_bagging",
    "evaluate",
    "run_method",
]

METHODS = ("cool", "standard", "bootstrap", "codistill", "coteaching",
           "bagging")
_DUAL_METHODS = ("codistill", "coteaching")
_SINGLE_METHODS = ("standard", "bootstrap")

SCHEMA_VERSION = 1

# RNG purpose tags (mixed with the root seed via SeedSequence).
_TAG_INIT = 101
_TAG_PARTITION = 102
_TAG_SHUFFLE = 103
_TAG_SHARED_SHUFFLE = 104
_TAG_SUBSAMPLE = 105


def _rng(seed: int, *tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed,) + tag))


def _classifier_substream(k: int) -> int:
    # Per-classifier RNG lane; tests may collapse lanes to force twins.
    return k


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for one training arm.

    ``lam`` is the cooperation weight vector for the cooperative arm
    (None = uniform) and the scalar mixing weight on the noisy label for
    the bootstrap/codistill arms (None = 0.5).
    """

    method: str = "cool"
    n_classifiers: int = 2
    epochs: int = 60
    start_epoch: int = 10
    batch_size: int = 32
    learning_rate: float = 0.2
    momentum: float = 0.9
    hidden_width: int = 128
    lam: object = None
    alpha0: float = 0.05
    alpha_mode: str = "linear"
    alpha_end_epoch: int | None = None
    beta: float = 0.05
    entropy_scope: str = "partition"
    exclude_self: bool = False
    eval_subsample: int = 2000
    last_k: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}, "
                             f"expected one of {METHODS}")
        if not self.epochs > self.start_epoch >= 0:
            raise ValueError(f"need epochs > start_epoch >= 0, got "
                             f"epochs={self.epochs}, start={self.start_epoch}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.n_classifiers < 1:
            raise ValueError(f"n_classifiers must be >= 1, "
                             f"got {self.n_classifiers}")
        if self.method in _DUAL_METHODS and self.n_classifiers != 2:
            raise ValueError(f"{self.method} requires exactly 2 classifiers, "
                             f"got {self.n_classifiers}")
        if self.method in _SINGLE_METHODS and self.n_classifiers != 1:
            raise ValueError(f"{self.method} trains a single classifier, "
                             f"got n_classifiers={self.n_classifiers}")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be > 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.alpha_mode not in ALPHA_MODES:
            raise ValueError(f"alpha_mode must be one of {ALPHA_MODES}")
        if self.entropy_scope not in ENTROPY_SCOPES:
            raise ValueError(f"entropy_scope must be one of {ENTROPY_SCOPES}")
        if not 1 <= self.last_k <= self.epochs:
            raise ValueError("last_k must lie in [1, epochs]")

    def alpha_schedule(self) -> AlphaSchedule:
        end = self.epochs if self.alpha_end_epoch is None else self.alpha_end_epoch
        return AlphaSchedule(self.alpha0, end_epoch=end, mode=self.alpha_mode)

    def cool_weights(self) -> np.ndarray:
        n = self.n_classifiers
        if self.lam is None:
            return np.full(n, 1.0 / n)
        return cooperation_weights(self.lam, n=n)

    def mix_weight(self) -> float:
        lam = 0.5 if self.lam is None else float(self.lam)
        if not 0.0 <= lam <= 1.0:
            raise ValueError(f"mixing weight must lie in [0, 1], got {lam!r}")
        return lam


# Per-epoch CSV columns, in order, after the per-classifier blocks.
_SCALAR_COLUMNS = ("label_precision", "true_class_mass", "sup_risk",
                   "risk_eq5", "risk_eq7", "r_diag_mean", "r_off_mean",
                   "r_diag_min", "r_off_max", "eq2_holds")


@dataclass
class RunRecord:
    """Per-epoch measurement rows for one training arm."""

    method: str
    n_classifiers: int
    seed: int
    config: dict
    rows: list = field(default_factory=list)

    def append(self, row: dict) -> None:
        if self.rows and row["epoch"] != self.rows[-1]["epoch"] + 1:
            raise ValueError("epoch indices must be consecutive")
        self.rows.append(row)

    def columns(self) -> list[str]:
        n = self.n_classifiers
        cols = ["epoch"]
        cols += [f"acc_c{k}" for k in range(n)]
        cols += ["acc_ensemble"]
        cols += [f"train_loss_c{k}" for k in range(n)]
        cols += list(_SCALAR_COLUMNS)
        return cols

    def curve(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.rows], dtype=np.float64)

    def mean_acc_curve(self) -> np.ndarray:
        accs = np.array([[row[f"acc_c{k}"] for k in range(self.n_classifiers)]
                         for row in self.rows])
        return accs.mean(axis=1)

    def write_csv(self, path) -> None:
        cols = self.columns()
        with open(path, "w") as f:
            f.write(",".join(cols) + "\n")
            for row in self.rows:
                cells = []
                for c in cols:
                    v = row[c]
                    cells.append(str(int(v)) if c == "epoch"
                                 else repr(float(v)))
                f.write(",".join(cells) + "\n")

    def summary(self) -> dict:
        lk = min(self.config.get("last_k", 10), len(self.rows))
        per_cls = [last_k_average(self.curve(f"acc_c{k}"), lk)
                   for k in range(self.n_classifiers)]
        ens = last_k_average(self.curve("acc_ensemble"), lk)
        mean_lastk = float(np.mean(per_cls))
        mean_curve = self.mean_acc_curve()
        final_prec = float(self.rows[-1]["label_precision"])
        final_risk = float(self.rows[-1]["sup_risk"])
        return {
            "schema_version": SCHEMA_VERSION,
            "method": self.method,
            "seed": self.seed,
            "n_classifiers": self.n_classifiers,
            "epochs": len(self.rows),
            "last_k": lk,
            "acc_last_k_per_classifier": per_cls,
            "acc_last_k_mean": mean_lastk,
            "acc_last_k_ensemble": ens,
            "primary_last_k_acc": ens if self.method == "bagging"
            else mean_lastk,
            "peak_mean_acc": float(mean_curve.max()),
            "final_mean_acc": float(mean_curve[-1]),
            "final_label_precision": _jsonable(final_prec),
            "final_sup_risk": _jsonable(final_risk),
            "config": self.config,
        }


def _jsonable(v):
    if isinstance(v, float) and math.isnan(v):
        return None
    return v


def _config_echo(config: TrainConfig, extra: dict | None = None) -> dict:
    echo = asdict(config)
    if isinstance(echo.get("lam"), np.ndarray):
        echo["lam"] = [float(v) for v in echo["lam"]]
    if extra:
        echo.update(extra)
    return echo


def evaluate(classifiers, test_set: NoisyDataset):
    """Argmax accuracy per classifier plus the soft-vote ensemble accuracy
    on a clean held-out set."""
    x = test_set.features
    y = test_set.truth.labels
    probs = [forward(net, x) for net in classifiers]
    accs = [float(np.mean(np.argmax(p, axis=1) == y)) for p in probs]
    vote = np.mean(probs, axis=0)
    ensemble = float(np.mean(np.argmax(vote, axis=1) == y))
    return accs, ensemble


def _epoch_batches(rng: np.random.Generator, n_items: int, batch_size: int):
    perm = rng.permutation(n_items)
    for start in range(0, n_items, batch_size):
        yield perm[start:start + batch_size]


def _ce_rows(probs: np.ndarray, targets: np.ndarray) -> np.ndarray:
    return -(targets * np.log(np.maximum(probs, LOG_CLAMP))).sum(axis=1)


def _plain_ce_epoch(net, state, x, y1h, rng, config, epoch):
    """One epoch of plain cross-entropy on noisy labels; returns mean loss."""
    total, seen = 0.0, 0
    for b, idx in enumerate(_epoch_batches(rng, x.shape[0],
                                           config.batch_size)):
        try:
            loss, grads = backward_batch(net, x[idx], y1h[idx], None, 0.0, 0.0)
            net, state = sgd_step(net, grads, config.learning_rate, state)
        except (FloatingPointError, ValueError) as exc:
            raise RuntimeError(f"epoch {epoch} batch {b}: {exc}") from exc
        total += loss * idx.size
        seen += idx.size
    return net, state, total / seen


def _init_ensemble(view, config: TrainConfig, n: int):
    dims = [view.d, config.hidden_width, view.c]
    nets = [init_params(dims, seed=_rng(config.seed, _TAG_INIT,
                                        _classifier_substream(k)))
            for k in range(n)]
    states = [fresh_momentum(net, config.momentum) for net in nets]
    return nets, states


def _partition_views(dataset: NoisyDataset, config: TrainConfig, n_parts: int):
    """Partition and map each part back to positions in the parent arrays."""
    parts = partition(dataset, n_parts, seed=_rng(config.seed, _TAG_PARTITION))
    pos_of_id = {int(i): p for p, i in enumerate(dataset.ids)}
    positions = [np.array([pos_of_id[int(i)] for i in part.ids], dtype=np.int64)
                 for part in parts]
    member = np.zeros((len(parts), len(dataset)), dtype=bool)
    for k, pos in enumerate(positions):
        member[k, pos] = True
    return positions, member


def _subsample(dataset: NoisyDataset, config: TrainConfig) -> SimpleNamespace:
    n = len(dataset)
    take = min(config.eval_subsample, n)
    idx = np.sort(_rng(config.seed, _TAG_SUBSAMPLE).choice(n, size=take,
                                                           replace=False))
    return SimpleNamespace(
        x=dataset.features[idx],
        true_labels=dataset.truth.labels[idx],
        true_one_hot=one_hot(dataset.truth.labels[idx], dataset.c),
        noisy_labels=dataset.noisy_labels[idx],
        noisy_one_hot=one_hot(dataset.noisy_labels[idx], dataset.c),
    )


def _risk_snapshot(preds, sub) -> dict:
    """Risk-matrix columns from prediction stacks on the eval subsample."""
    n = len(preds)
    R = risk_matrix(preds, sub.true_one_hot)
    diag = np.diagonal(R.entries)
    r_diag_mean, r_off_mean = estimate_diag_off(R)
    out = {
        "r_diag_mean": r_diag_mean,
        "r_off_mean": r_off_mean,
        "r_diag_min": float(diag.min()),
    }
    if n == 1:
        out.update({"r_off_max": float("nan"), "eq2_holds": float("nan"),
                    "risk_eq5": float(diag[0]), "risk_eq7": float("nan")})
        return out
    off = R.entries[~np.eye(n, dtype=bool)]
    out["r_off_max"] = float(off.max())
    out["eq2_holds"] = float(off.min() >= 0.0 and off.max() < diag.min())
    try:
        out["risk_eq5"] = optimal_lambda_multi(R).min_risk
    except (SingularMatrixError, ValueError):
        out["risk_eq5"] = float("nan")
    try:
        out["risk_eq7"] = symmetric_min_risk(n, r_diag_mean, r_off_mean)
    except ValueError:
        out["risk_eq7"] = float("nan")
    return out


def _supervision_stats(sup_rows, sub) -> dict:
    return {
        "label_precision": label_precision(sup_rows, sub.true_labels),
        "true_class_mass": true_class_mass(sup_rows, sub.true_labels),
        "sup_risk": empirical_risk(sup_rows, sub.true_one_hot),
    }


def _record_epoch(record: RunRecord, epoch, nets, train_losses, test_set,
                  sub, sup_rows) -> None:
    accs, ensemble = evaluate(nets, test_set)
    row = {"epoch": epoch, "acc_ensemble": ensemble}
    for k, acc in enumerate(accs):
        row[f"acc_c{k}"] = acc
    for k in range(len(nets)):
        row[f"train_loss_c{k}"] = float(train_losses[k])
    preds = [forward(net, sub.x) for net in nets]
    row.update(_risk_snapshot(preds, sub))
    if sup_rows is None:
        row.update({"label_precision": float("nan"),
                    "true_class_mass": float("nan"),
                    "sup_risk": float("nan")})
    elif isinstance(sup_rows, dict):
        row.update(sup_rows)
    else:
        row.update(_supervision_stats(sup_rows, sub))
    record.append(row)


def pretrain(dataset: NoisyDataset, config: TrainConfig) -> list[MlpParams]:
    """Warm-up stage alone: partition the data and train each classifier
    with plain cross-entropy on its own part for start_epoch epochs.

    Distinct parts and init seeds leave the classifiers diverse, which is
    what makes their combination worth more than either member.
    """
    view = dataset.trainer_view()
    n = config.n_classifiers
    positions, _ = _partition_views(dataset, config, n)
    if any(p.size == 0 for p in positions):
        raise ValueError("empty partition")
    nets, states = _init_ensemble(view, config, n)
    y1h = one_hot(view.noisy_labels, view.c)
    shuffles = [_rng(config.seed, _TAG_SHUFFLE, _classifier_substream(k))
                for k in range(n)]
    for epoch in range(config.start_epoch):
        for k in range(n):
            nets[k], states[k], _ = _plain_ce_epoch(
                nets[k], states[k], view.features[positions[k]],
                y1h[positions[k]], shuffles[k], config, epoch)
    return nets


def _cool_supervision(nets, xb, weights, exclude_self: bool):
    """Frozen per-sample targets for every classifier from one snapshot.

    All predictions are collected before any update; with exclude_self each
    classifier's target drops its own prediction and renormalizes the
    remaining weights.
    """
    preds = np.stack([forward(net, xb) for net in nets])
    if not exclude_self or len(nets) == 1:
        shared = combine(weights, preds)
        return preds, [shared] * len(nets)
    targets = []
    for k in range(len(nets)):
        w = weights.copy()
        w[k] = 0.0
        targets.append(combine(w / w.sum(), preds))
    return preds, targets


def train_cool(dataset: NoisyDataset, config: TrainConfig,
               test_set: NoisyDataset):
    """Cooperative arm: partition pre-training, then shared-supervision
    re-training of all n classifiers."""
    if config.method != "cool":
        raise ValueError(f"config.method is {config.method!r}, expected 'cool'")
    view = dataset.trainer_view()
    n = config.n_classifiers
    positions, member = _partition_views(dataset, config, n)
    if any(p.size == 0 for p in positions):
        raise ValueError("empty partition")
    nets, states = _init_ensemble(view, config, n)
    y1h = one_hot(view.noisy_labels, view.c)
    weights = config.cool_weights()
    schedule = config.alpha_schedule()
    sub = _subsample(dataset, config)
    record = RunRecord(config.method, n, config.seed,
                       _config_echo(config, {
                           "train_sizes": [int(p.size) for p in positions]}))
    shuffles = [_rng(config.seed, _TAG_SHUFFLE, _classifier_substream(k))
                for k in range(n)]
    shared_shuffle = _rng(config.seed, _TAG_SHARED_SHUFFLE)
    for epoch in range(config.epochs):
        losses = np.zeros(n)
        if epoch < config.start_epoch:
            for k in range(n):
                nets[k], states[k], losses[k] = _plain_ce_epoch(
                    nets[k], states[k], view.features[positions[k]],
                    y1h[positions[k]], shuffles[k], config, epoch)
        else:
            alpha_e = alpha_at(schedule, epoch)
            seen = 0
            for b, idx in enumerate(_epoch_batches(shared_shuffle, len(view),
                                                   config.batch_size)):
                xb = view.features[idx]
                try:
                    _, targets = _cool_supervision(nets, xb, weights,
                                                   config.exclude_self)
                    grads_list = []
                    for k in range(n):
                        a_vec, b_vec = gate_coefficients(
                            member[k][idx], alpha_e, config.beta,
                            config.entropy_scope)
                        loss, grads = backward_batch(
                            nets[k], xb, targets[k], y1h[idx], a_vec, b_vec)
                        losses[k] += loss * idx.size
                        grads_list.append(grads)
                    # Barrier: no classifier moves until all grads exist.
                    for k in range(n):
                        nets[k], states[k] = sgd_step(
                            nets[k], grads_list[k], config.learning_rate,
                            states[k])
                except (FloatingPointError, ValueError) as exc:
                    raise RuntimeError(
                        f"epoch {epoch} batch {b}: {exc}") from exc
                seen += idx.size
            losses /= seen
        sub_preds = np.stack([forward(net, sub.x) for net in nets])
        sup_rows = combine(weights, sub_preds)
        _record_epoch(record, epoch, nets, losses, test_set, sub, sup_rows)
    return nets, record


def train_standard(dataset: NoisyDataset, config: TrainConfig,
                   test_set: NoisyDataset):
    """Vanilla baseline: one classifier, plain cross-entropy on the noisy
    labels for the whole budget.  Under enough noise its test accuracy
    rises while clean structure is learned, then falls as the noisy labels
    are memorized."""
    if config.method != "standard":
        raise ValueError(f"config.method is {config.method!r}, "
                         "expected 'standard'")
    view = dataset.trainer_view()
    nets, states = _init_ensemble(view, config, 1)
    y1h = one_hot(view.noisy_labels, view.c)
    sub = _subsample(dataset, config)
    record = RunRecord(config.method, 1, config.seed,
                       _config_echo(config, {"train_sizes": [len(view)]}))
    shuffle = _rng(config.seed, _TAG_SHUFFLE, _classifier_substream(0))
    for epoch in range(config.epochs):
        nets[0], states[0], loss = _plain_ce_epoch(
            nets[0], states[0], view.features, y1h, shuffle, config, epoch)
        _record_epoch(record, epoch, nets, [loss], test_set, sub,
                      sub.noisy_one_hot)
    return nets[0], record


def train_bootstrap(dataset: NoisyDataset, config: TrainConfig,
                    test_set: NoisyDataset):
    """Single-network target mixing: after warm-up, each batch is labeled
    with lam * one_hot(noisy) + (1 - lam) * own frozen prediction."""
    if config.method != "bootstrap":
        raise ValueError(f"config.method is {config.method!r}, "
                         "expected 'bootstrap'")
    view = dataset.trainer_view()
    lam = config.mix_weight()
    nets, states = _init_ensemble(view, config, 1)
    y1h = one_hot(view.noisy_labels, view.c)
    sub = _subsample(dataset, config)
    record = RunRecord(config.method, 1, config.seed,
                       _config_echo(config, {"train_sizes": [len(view)]}))
    shuffle = _rng(config.seed, _TAG_SHUFFLE, _classifier_substream(0))
    for epoch in range(config.epochs):
        if epoch < config.start_epoch:
            nets[0], states[0], loss = _plain_ce_epoch(
                nets[0], states[0], view.features, y1h, shuffle, config, epoch)
        else:
            total, seen = 0.0, 0
            for b, idx in enumerate(_epoch_batches(shuffle, len(view),
                                                   config.batch_size)):
                try:
                    own = forward(nets[0], view.features[idx])
                    target = lam * y1h[idx] + (1.0 - lam) * own
                    step_loss, grads = backward_batch(
                        nets[0], view.features[idx], target, None, 0.0, 0.0)
                    nets[0], states[0] = sgd_step(
                        nets[0], grads, config.learning_rate, states[0])
                except (FloatingPointError, ValueError) as exc:
                    raise RuntimeError(
                        f"epoch {epoch} batch {b}: {exc}") from exc
                total += step_loss * idx.size
                seen += idx.size
            loss = total / seen
        own_sub = forward(nets[0], sub.x)
        sup_rows = lam * sub.noisy_one_hot + (1.0 - lam) * own_sub
        _record_epoch(record, epoch, nets, [loss], test_set, sub, sup_rows)
    return nets[0], record


def train_codistillation(dataset: NoisyDataset, config: TrainConfig,
                         test_set: NoisyDataset):
    """Dual target mixing: each network's batch target is
    lam * one_hot(noisy) + (1 - lam) * the peer's frozen prediction."""
    if config.method != "codistill":
        raise ValueError(f"config.method is {config.method!r}, "
                         "expected 'codistill'")
    view = dataset.trainer_view()
    lam = config.mix_weight()
    nets, states = _init_ensemble(view, config, 2)
    y1h = one_hot(view.noisy_labels, view.c)
    sub = _subsample(dataset, config)
    record = RunRecord(config.method, 2, config.seed,
                       _config_echo(config, {"train_sizes": [len(view)] * 2}))
    shuffles = [_rng(config.seed, _TAG_SHUFFLE, _classifier_substream(k))
                for k in range(2)]
    shared_shuffle = _rng(config.seed, _TAG_SHARED_SHUFFLE)
    for epoch in range(config.epochs):
        losses = np.zeros(2)
        if epoch < config.start_epoch:
            for k in range(2):
                nets[k], states[k], losses[k] = _plain_ce_epoch(
                    nets[k], states[k], view.features, y1h, shuffles[k],
                    config, epoch)
        else:
            seen = 0
            for b, idx in enumerate(_epoch_batches(shared_shuffle, len(view),
                                                   config.batch_size)):
                xb = view.features[idx]
                try:
                    preds = [forward(net, xb) for net in nets]
                    grads_list = []
                    for k in range(2):
                        target = lam * y1h[idx] + (1.0 - lam) * preds[1 - k]
                        loss, grads = backward_batch(nets[k], xb, target,
                                                     None, 0.0, 0.0)
                        losses[k] += loss * idx.size
                        grads_list.append(grads)
                    for k in range(2):
                        nets[k], states[k] = sgd_step(
                            nets[k], grads_list[k], config.learning_rate,
                            states[k])
                except (FloatingPointError, ValueError) as exc:
                    raise RuntimeError(
                        f"epoch {epoch} batch {b}: {exc}") from exc
                seen += idx.size
            losses /= seen
        sub_preds = [forward(net, sub.x) for net in nets]
        sup_rows = np.concatenate([
            lam * sub.noisy_one_hot + (1.0 - lam) * sub_preds[1],
            lam * sub.noisy_one_hot + (1.0 - lam) * sub_preds[0]])
        sup = _supervision_stats(sup_rows, SimpleNamespace(
            true_labels=np.concatenate([sub.true_labels] * 2),
            true_one_hot=np.concatenate([sub.true_one_hot] * 2)))
        _record_epoch(record, epoch, nets, losses, test_set, sub, sup)
    return nets, record


def small_loss_selection(per_sample_losses, keep_fraction: float) -> np.ndarray:
    """Indices of the ceil(keep_fraction * len) smallest losses, in loss
    order with stable ties."""
    losses = np.asarray(per_sample_losses, dtype=np.float64)
    keep = math.ceil(keep_fraction * losses.size)
    return np.argsort(losses, kind="stable")[:keep]


def train_coteaching(dataset: NoisyDataset, config: TrainConfig,
                     test_set: NoisyDataset, r: float):
    """Cross small-loss selection: each network ranks the batch by its own
    loss, keeps the cleanest (1 - r) fraction, and its peer updates on that
    selection.  The injected noise ratio r is supplied as side information."""
    if config.method != "coteaching":
        raise ValueError(f"config.method is {config.method!r}, "
                         "expected 'coteaching'")
    if not 0.0 <= r < 1.0:
        raise ValueError(f"noise ratio must lie in [0, 1), got {r!r}")
    view = dataset.trainer_view()
    nets, states = _init_ensemble(view, config, 2)
    y1h = one_hot(view.noisy_labels, view.c)
    sub = _subsample(dataset, config)
    record = RunRecord(config.method, 2, config.seed,
                       _config_echo(config, {"train_sizes": [len(view)] * 2,
                                             "noise_ratio": r}))
    shuffles = [_rng(config.seed, _TAG_SHUFFLE, _classifier_substream(k))
                for k in range(2)]
    shared_shuffle = _rng(config.seed, _TAG_SHARED_SHUFFLE)
    keep_fraction = 1.0 - r
    for epoch in range(config.epochs):
        losses = np.zeros(2)
        if epoch < config.start_epoch:
            for k in range(2):
                nets[k], states[k], losses[k] = _plain_ce_epoch(
                    nets[k], states[k], view.features, y1h, shuffles[k],
                    config, epoch)
        else:
            seen = 0
            for b, idx in enumerate(_epoch_batches(shared_shuffle, len(view),
                                                   config.batch_size)):
                xb = view.features[idx]
                yb = y1h[idx]
                try:
                    selections = [
                        small_loss_selection(_ce_rows(forward(net, xb), yb),
                                             keep_fraction)
                        for net in nets]
                    grads_list = []
                    for k in range(2):
                        peer_sel = selections[1 - k]
                        loss, grads = backward_batch(
                            nets[k], xb[peer_sel], yb[peer_sel], None,
                            0.0, 0.0)
                        losses[k] += loss * peer_sel.size
                        grads_list.append(grads)
                    for k in range(2):
                        nets[k], states[k] = sgd_step(
                            nets[k], grads_list[k], config.learning_rate,
                            states[k])
                except (FloatingPointError, ValueError) as exc:
                    raise RuntimeError(
                        f"epoch {epoch} batch {b}: {exc}") from exc
                seen += selections[0].size
            losses /= seen
        # Supervision quality: how clean each net's selected labels are,
        # measured over the eval subsample (selection-subset precision).
        precisions = []
        for net in nets:
            sel = small_loss_selection(
                _ce_rows(forward(net, sub.x), sub.noisy_one_hot),
                keep_fraction)
            precisions.append(float(np.mean(
                sub.noisy_labels[sel] == sub.true_labels[sel])))
        prec = float(np.mean(precisions))
        sup = {"label_precision": prec, "true_class_mass": prec,
               "sup_risk": 2.0 * (1.0 - prec)}
        _record_epoch(record, epoch, nets, losses, test_set, sub, sup)
    return nets, record


def train_bagging(dataset: NoisyDataset, config: TrainConfig,
                  test_set: NoisyDataset):
    """Partition pre-training only, extended over the full budget, with a
    soft vote at evaluation time.  The data is always split into at least
    two parts, so a single-member ensemble is a standard run on half the
    data."""
    if config.method != "bagging":
        raise ValueError(f"config.method is {config.method!r}, "
                         "expected 'bagging'")
    view = dataset.trainer_view()
    n = config.n_classifiers
    positions, _ = _partition_views(dataset, config, max(2, n))
    positions = positions[:n]
    nets, states = _init_ensemble(view, config, n)
    y1h = one_hot(view.noisy_labels, view.c)
    weights = np.full(n, 1.0 / n)
    sub = _subsample(dataset, config)
    record = RunRecord(config.method, n, config.seed,
                       _config_echo(config, {
                           "train_sizes": [int(p.size) for p in positions]}))
    shuffles = [_rng(config.seed, _TAG_SHUFFLE, _classifier_substream(k))
                for k in range(n)]
    for epoch in range(config.epochs):
        losses = np.zeros(n)
        for k in range(n):
            nets[k], states[k], losses[k] = _plain_ce_epoch(
                nets[k], states[k], view.features[positions[k]],
                y1h[positions[k]], shuffles[k], config, epoch)
        sub_preds = np.stack([forward(net, sub.x) for net in nets])
        sup_rows = combine(weights, sub_preds)
        _record_epoch(record, epoch, nets, losses, test_set, sub, sup_rows)
    return nets, record


def run_method(dataset: NoisyDataset, config: TrainConfig,
               test_set: NoisyDataset, noise_ratio: float | None = None):
    """Dispatch one arm by its method tag; returns (classifiers, record)."""
    if config.method == "cool":
        return train_cool(dataset, config, test_set)
    if config.method == "standard":
        net, record = train_standard(dataset, config, test_set)
        return [net], record
    if config.method == "bootstrap":
        net, record = train_bootstrap(dataset, config, test_set)
        return [net], record
    if config.method == "codistill":
        return train_codistillation(dataset, config, test_set)
    if config.method == "coteaching":
        if noise_ratio is None:
            raise ValueError("coteaching needs the injected noise ratio as "
                             "side information")
        return train_coteaching(dataset, config, test_set, noise_ratio)
    if config.method == "bagging":
        return train_bagging(dataset, config, test_set)
    raise ValueError(f"unknown method {config.method!r}")
