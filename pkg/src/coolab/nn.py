"""Minimal softmax MLP with hand-derived gradients and momentum SGD.

One hidden-layer-stack architecture: affine layers with ReLU between them
and a softmax head.  The composite per-sample loss is

    CE(p, target) + alpha * CE(p, one_hot(noisy_label)) + beta * H(p)

where H is the prediction entropy (added with +beta and minimized, which
sharpens predictions).  Targets are constants during backprop; no gradient
flows into their construction.  Everything is float64: the analytic
gradients are validated against central finite differences, which is not
meaningful at 32-bit precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MlpParams",
    "Gradients",
    "MomentumState",
    "init_params",
    "forward",
    "softmax",
    "soft_cross_entropy",
    "prediction_entropy",
    "backward",
    "backward_batch",
    "sgd_step",
    "fresh_momentum",
    "save_params",
    "load_params",
]

LOG_CLAMP = 1e-12


def _freeze(arrays):
    out = []
    for a in arrays:
        a = np.asarray(a, dtype=np.float64).copy()
        a.setflags(write=False)
        out.append(a)
    return tuple(out)


@dataclass(frozen=True)
class MlpParams:
    """Weights (out, in) and biases per layer; hidden activation is ReLU."""

    weights: tuple
    biases: tuple

    def __post_init__(self):
        w = _freeze(self.weights)
        b = _freeze(self.biases)
        if len(w) == 0 or len(w) != len(b):
            raise ValueError("need matching, non-empty weight/bias lists")
        for k, (wk, bk) in enumerate(zip(w, b)):
            if wk.ndim != 2 or bk.shape != (wk.shape[0],):
                raise ValueError(f"layer {k}: weight {wk.shape} and bias "
                                 f"{bk.shape} are incompatible")
            if k > 0 and wk.shape[1] != w[k - 1].shape[0]:
                raise ValueError(f"layer {k} input width {wk.shape[1]} does "
                                 f"not chain from {w[k - 1].shape[0]}")
            if not (np.all(np.isfinite(wk)) and np.all(np.isfinite(bk))):
                raise ValueError(f"layer {k}: non-finite parameters")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)

    @property
    def layer_dims(self) -> tuple:
        return (self.weights[0].shape[1],) + tuple(w.shape[0]
                                                   for w in self.weights)


@dataclass(frozen=True)
class Gradients:
    """Same shapes as the parameter set they differentiate."""

    weights: tuple
    biases: tuple


@dataclass(frozen=True)
class MomentumState:
    """Velocity buffers for classical momentum."""

    momentum: float
    weights: tuple
    biases: tuple


def init_params(layer_dims, seed) -> MlpParams:
    """Uniform init with bound sqrt(6 / (fan_in + fan_out)); biases zero."""
    dims = list(layer_dims)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ValueError(f"need at least input and output dims >= 1, got {dims}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(tuple(weights), tuple(biases))


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - np.max(z, axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _forward_cached(params: MlpParams, x: np.ndarray):
    """Returns (probs, activations) with activations[0] = input batch."""
    acts = [x]
    h = x
    last = len(params.weights) - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w.T + b
        h = z if k == last else np.maximum(z, 0.0)
        acts.append(h)
    return softmax(h), acts


def forward(params: MlpParams, features) -> np.ndarray:
    """Softmax class distribution for one feature vector or an (N, d) batch."""
    x = np.asarray(features, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.weights[0].shape[1]:
        raise ValueError(f"features have width {x.shape[-1]}, network "
                         f"expects {params.weights[0].shape[1]}")
    probs, _ = _forward_cached(params, x)
    if not np.all(np.isfinite(probs)):
        raise FloatingPointError("non-finite values in forward pass")
    return probs[0] if single else probs


def soft_cross_entropy(pred, target) -> float:
    """-sum(target * log pred) with pred clamped below at 1e-12."""
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: pred {p.shape}, target {t.shape}")
    return float(-(t * np.log(np.maximum(p, LOG_CLAMP))).sum())


def prediction_entropy(pred) -> float:
    """Shannon entropy -sum(p log p), in [0, log c]."""
    p = np.asarray(pred, dtype=np.float64)
    return float(-(p * np.log(np.maximum(p, LOG_CLAMP))).sum())


def _entropy_rows(p: np.ndarray) -> np.ndarray:
    return -(p * np.log(np.maximum(p, LOG_CLAMP))).sum(axis=1)


def backward_batch(params: MlpParams, x: np.ndarray, targets: np.ndarray,
                   noisy_one_hot: np.ndarray | None,
                   alpha: np.ndarray | float,
                   beta: np.ndarray | float):
    """Mean composite loss over a batch and its exact parameter gradients.

    ``alpha`` and ``beta`` may be scalars or per-sample vectors, which is
    how partition gating reaches mixed batches.  ``noisy_one_hot`` may be
    None when alpha is identically zero.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    n = x.shape[0]
    alpha = np.broadcast_to(np.asarray(alpha, dtype=np.float64), (n,))
    beta = np.broadcast_to(np.asarray(beta, dtype=np.float64), (n,))
    probs, acts = _forward_cached(params, x)
    logp = np.log(np.maximum(probs, LOG_CLAMP))
    ent = -(probs * logp).sum(axis=1)
    loss_rows = -(targets * logp).sum(axis=1) + beta * ent
    # dLoss/dlogits for softmax + CE is (p - target); the entropy term adds
    # -p * (log p + H).
    dz = (probs - targets) + beta[:, None] * (-probs * (logp + ent[:, None]))
    if noisy_one_hot is not None:
        noisy_one_hot = np.atleast_2d(noisy_one_hot)
        loss_rows = loss_rows - alpha * (noisy_one_hot * logp).sum(axis=1)
        dz = dz + alpha[:, None] * (probs - noisy_one_hot)
    elif np.any(alpha != 0.0):
        raise ValueError("alpha > 0 requires noisy labels")
    loss = float(loss_rows.mean())
    if not np.isfinite(loss):
        raise FloatingPointError("non-finite training loss")
    dz = dz / n
    grads_w = [None] * len(params.weights)
    grads_b = [None] * len(params.weights)
    for k in range(len(params.weights) - 1, -1, -1):
        grads_w[k] = dz.T @ acts[k]
        grads_b[k] = dz.sum(axis=0)
        if k > 0:
            dz = (dz @ params.weights[k]) * (acts[k] > 0.0)
    return loss, Gradients(tuple(grads_w), tuple(grads_b))


def backward(params: MlpParams, features, loss_spec):
    """Single-sample composite loss and gradients.

    ``loss_spec`` must expose cooperation_target, noisy_label, alpha, beta,
    and in_own_partition (a CoolLossSpec works).  The alpha term applies
    only on the classifier's own partition.
    """
    target = np.asarray(loss_spec.cooperation_target, dtype=np.float64)
    if loss_spec.in_own_partition:
        noisy = np.zeros_like(target)
        noisy[loss_spec.noisy_label] = 1.0
        return backward_batch(params, features, target, noisy,
                              loss_spec.alpha, loss_spec.beta)
    return backward_batch(params, features, target, None, 0.0, loss_spec.beta)


def fresh_momentum(params: MlpParams, momentum: float) -> MomentumState:
    return MomentumState(momentum,
                         tuple(np.zeros_like(w) for w in params.weights),
                         tuple(np.zeros_like(b) for b in params.biases))


def sgd_step(params: MlpParams, grads: Gradients, learning_rate: float,
             state: MomentumState):
    """Classical momentum: v <- mu v + g;  p <- p - lr v.

    With momentum 0 this reduces to plain gradient descent.  Returns the
    updated (params, state); nothing is mutated.
    """
    if learning_rate <= 0.0:
        raise ValueError(f"learning_rate must be > 0, got {learning_rate!r}")
    if (len(grads.weights) != len(params.weights)
            or any(g.shape != w.shape
                   for g, w in zip(grads.weights, params.weights))
            or any(g.shape != b.shape
                   for g, b in zip(grads.biases, params.biases))):
        raise ValueError("gradient shapes do not match parameters")
    mu = state.momentum
    vel_w = tuple(mu * v + g for v, g in zip(state.weights, grads.weights))
    vel_b = tuple(mu * v + g for v, g in zip(state.biases, grads.biases))
    new_w = tuple(w - learning_rate * v for w, v in zip(params.weights, vel_w))
    new_b = tuple(b - learning_rate * v for b, v in zip(params.biases, vel_b))
    return MlpParams(new_w, new_b), MomentumState(mu, vel_w, vel_b)


def save_params(params: MlpParams, path) -> None:
    """Checkpoint: first line is the comma-separated layer dims, then one
    parameter per line in layer-major order (W0 row-major, b0, W1, b1, ...),
    written with repr for exact reload."""
    with open(path, "w") as f:
        f.write(",".join(str(d) for d in params.layer_dims) + "\n")
        for w, b in zip(params.weights, params.biases):
            for v in w.ravel():
                f.write(repr(float(v)) + "\n")
            for v in b:
                f.write(repr(float(v)) + "\n")


def load_params(path) -> MlpParams:
    with open(path) as f:
        dims = [int(v) for v in f.readline().strip().split(",")]
        values = [float(line) for line in f if line.strip()]
    expected = sum(i * o + o for i, o in zip(dims[:-1], dims[1:]))
    if len(values) != expected:
        raise ValueError(f"{path}: expected {expected} parameters for dims "
                         f"{dims}, found {len(values)}")
    flat = np.array(values)
    weights, biases, pos = [], [], 0
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(flat[pos:pos + fan_in * fan_out].reshape(fan_out, fan_in))
        pos += fan_in * fan_out
        biases.append(flat[pos:pos + fan_out])
        pos += fan_out
    return MlpParams(tuple(weights), tuple(biases))
