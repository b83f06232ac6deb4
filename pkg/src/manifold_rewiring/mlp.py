"""Small fully-connected link scorer trained with binary cross-entropy.

Forward and backward passes are written out by hand in numpy; the optimizer
is Adam over mini-batches.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

CHECKPOINT_FORMAT = "manifold-rewiring-mlp"
CHECKPOINT_VERSION = 1


class TrainingError(RuntimeError):
    pass


@dataclass
class Layer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str = "relu"


@dataclass
class MlpParams:
    layers: list[Layer]

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if a.weight.shape[0] != b.weight.shape[1]:
                raise ValueError("consecutive layer dimensions do not match")
        if self.layers and self.layers[-1].weight.shape[0] != 1:
            raise ValueError("output layer must have width 1")
        for layer in self.layers:
            if layer.activation not in ("relu", "identity"):
                raise ValueError(f"unknown activation {layer.activation!r}")

    @property
    def input_width(self) -> int:
        return self.layers[0].weight.shape[1]

    def copy(self) -> "MlpParams":
        return MlpParams([Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers])

    def flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([l.weight.ravel(), l.bias]) for l in self.layers])

    def set_flat(self, vec: np.ndarray) -> None:
        k = 0
        for l in self.layers:
            nw = l.weight.size
            l.weight[...] = vec[k:k + nw].reshape(l.weight.shape)
            k += nw
            l.bias[...] = vec[k:k + l.bias.size]
            k += l.bias.size


def init_params(input_width: int, hidden=(32, 32), rng_seed=0) -> MlpParams:
    """Fan-in scaled uniform initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
    rng = np.random.default_rng(rng_seed)
    dims = [input_width, *hidden, 1]
    layers = []
    for k, (i, o) in enumerate(zip(dims, dims[1:])):
        bound = 1.0 / np.sqrt(i)
        act = "identity" if k == len(dims) - 2 else "relu"
        layers.append(Layer(rng.uniform(-bound, bound, (o, i)), rng.uniform(-bound, bound, o), act))
    return MlpParams(layers)


def zero_params(input_width: int, hidden=(32, 32)) -> MlpParams:
    dims = [input_width, *hidden, 1]
    return MlpParams([
        Layer(np.zeros((o, i)), np.zeros(o), "identity" if k == len(dims) - 2 else "relu")
        for k, (i, o) in enumerate(zip(dims, dims[1:]))
    ])


def _as_batch(params, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != params.input_width:
        raise ValueError(f"feature width {x.shape[1]} does not match input layer {params.input_width}")
    return x


def logits(params: MlpParams, x) -> np.ndarray:
    a = _as_batch(params, x)
    for layer in params.layers:
        a = a @ layer.weight.T + layer.bias
        if layer.activation == "relu":
            a = np.maximum(a, 0.0)
    return a[:, 0]


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward(params: MlpParams, x) -> np.ndarray:
    """Scores in (0, 1) for a batch (or a single row) of scaled features."""
    return sigmoid(logits(params, x))


def bce_with_logits(z, y) -> np.ndarray:
    # log(1 + exp(z)) - y z, computed without overflow
    z = np.asarray(z, dtype=np.float64)
    return np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))


def loss_and_grad(params: MlpParams, x, y) -> tuple[float, list[tuple[np.ndarray, np.ndarray]]]:
    """Mean BCE over the batch and its gradient per layer ``(dW, db)``."""
    x = _as_batch(params, x)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    acts = [x]
    pre = []
    a = x
    for layer in params.layers:
        z = a @ layer.weight.T + layer.bias
        pre.append(z)
        a = np.maximum(z, 0.0) if layer.activation == "relu" else z
        acts.append(a)
    zout = a[:, 0]
    n = len(y)
    loss = float(np.mean(bce_with_logits(zout, y)))
    delta = ((sigmoid(zout) - y) / n)[:, None]
    grads = []
    for k in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[k]
        if layer.activation == "relu":
            delta = delta * (pre[k] > 0)
        grads.append((delta.T @ acts[k], delta.sum(axis=0)))
        delta = delta @ layer.weight
    grads.reverse()
    return loss, grads


def mean_loss(params: MlpParams, x, y) -> float:
    return float(np.mean(bce_with_logits(logits(params, x), np.asarray(y, dtype=np.float64))))


def gradient_check(params: MlpParams, x, y, epsilon: float = 1e-5, floor: float = 1e-10) -> float:
    """Worst relative gap between backprop and central differences.

    Components where both gradients are below ``floor`` in magnitude count
    as agreeing.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    analytic, numeric = gradient_pair(params, x, y, epsilon)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    gap = np.abs(analytic - numeric)
    rel = np.where(scale < floor, 0.0, gap / np.where(scale < floor, 1.0, scale))
    return float(rel.max()) if len(rel) else 0.0


def gradient_pair(params: MlpParams, x, y, epsilon: float = 1e-5) -> tuple[np.ndarray, np.ndarray]:
    """Flat analytic and finite-difference gradients of the mean BCE."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    _, grads = loss_and_grad(params, x, y)
    analytic = np.concatenate([np.concatenate([dw.ravel(), db]) for dw, db in grads])
    work = params.copy()
    base = work.flat()
    numeric = np.empty_like(base)
    for k in range(len(base)):
        v = base.copy()
        v[k] = base[k] + epsilon
        work.set_flat(v)
        up = mean_loss(work, x, y)
        v[k] = base[k] - epsilon
        work.set_flat(v)
        down = mean_loss(work, x, y)
        numeric[k] = (up - down) / (2 * epsilon)
    return analytic, numeric


def auc(scores, labels) -> float:
    """Area under the ROC curve via the rank-sum statistic (ties averaged)."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    pos = labels == 1
    n1 = int(pos.sum())
    n0 = len(labels) - n1
    if n1 == 0 or n0 == 0:
        raise ValueError("AUC needs both positive and negative labels")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n1 * (n1 + 1) / 2) / (n1 * n0))


# --------------------------------------------------------------------------
# training

@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 1e-3
    rng_seed: int = 0
    validation_fraction: float = 0.0
    hidden: tuple[int, ...] = (32, 32)

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 <= self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie in [0, 1)")


@dataclass
class TrainResult:
    params: MlpParams
    loss_trace: list[float] = field(default_factory=list)
    val_loss_trace: list[float] = field(default_factory=list)
    val_auc: float | None = None
    n_train: int = 0
    n_val: int = 0


class _Adam:
    def __init__(self, params: MlpParams, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = [(np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in params.layers]
        self.v = [(np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in params.layers]

    def step(self, params: MlpParams, grads):
        self.t += 1
        c1 = 1 - self.b1**self.t
        c2 = 1 - self.b2**self.t
        for layer, g, m, v in zip(params.layers, grads, self.m, self.v):
            for p, gp, mp, vp in zip((layer.weight, layer.bias), g, m, v):
                mp *= self.b1
                mp += (1 - self.b1) * gp
                vp *= self.b2
                vp += (1 - self.b2) * gp * gp
                p -= self.lr * (mp / c1) / (np.sqrt(vp / c2) + self.eps)


def _split(y, fraction, rng):
    """Stratified split so both parts keep both labels when possible."""
    train, val = [], []
    for lab in (0, 1):
        idx = np.flatnonzero(y == lab)
        idx = idx[rng.permutation(len(idx))]
        nv = int(round(fraction * len(idx)))
        val.append(idx[:nv])
        train.append(idx[nv:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(val))


def train(X, y, config: TrainConfig | None = None, init: MlpParams | None = None) -> TrainResult:
    """Fit the scorer on scaled features ``X`` with labels ``y`` in {0, 1}."""
    config = config or TrainConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if len(y) == 0:
        raise ValueError("empty dataset")
    if len(np.unique(y)) < 2:
        raise ValueError("dataset must contain both labels")
    rng = np.random.default_rng(config.rng_seed)
    params = init.copy() if init is not None else init_params(X.shape[1], config.hidden, rng.integers(2**63))
    tr, va = (np.arange(len(y)), np.zeros(0, dtype=int))
    if config.validation_fraction > 0:
        tr, va = _split(y, config.validation_fraction, rng)
    opt = _Adam(params, config.learning_rate)
    result = TrainResult(params, n_train=len(tr), n_val=len(va))
    for epoch in range(config.epochs):
        order = tr[rng.permutation(len(tr))]
        total = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            loss, grads = loss_and_grad(params, X[batch], y[batch])
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch starting {start}")
            opt.step(params, grads)
            total += loss * len(batch)
        result.loss_trace.append(total / len(tr))
        if len(va):
            result.val_loss_trace.append(mean_loss(params, X[va], y[va]))
    if len(va) and len(np.unique(y[va])) == 2:
        result.val_auc = auc(forward(params, X[va]), y[va])
    return result


# --------------------------------------------------------------------------
# checkpoints

def params_to_dict(params: MlpParams, **meta) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        **meta,
        "layers": [
            {
                "shape": list(l.weight.shape),
                "activation": l.activation,
                "weight": l.weight.ravel().tolist(),
                "bias": l.bias.tolist(),
            }
            for l in params.layers
        ],
    }


def params_from_dict(d: dict) -> MlpParams:
    if d.get("format") != CHECKPOINT_FORMAT:
        raise ValueError("not a link-scorer checkpoint")
    if d.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {d.get('version')}")
    layers = []
    for ld in d["layers"]:
        out, inp = ld["shape"]
        layers.append(Layer(
            np.array(ld["weight"], dtype=np.float64).reshape(out, inp),
            np.array(ld["bias"], dtype=np.float64),
            ld["activation"],
        ))
    return MlpParams(layers)


def save_params(params: MlpParams, path, **meta) -> None:
    # json writes floats with repr, which round-trips float64 exactly
    Path(path).write_text(json.dumps(params_to_dict(params, **meta), indent=1) + "\n", encoding="utf-8")


def load_params(path) -> tuple[MlpParams, dict]:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    meta = {k: v for k, v in d.items() if k not in ("layers",)}
    return params_from_dict(d), meta
