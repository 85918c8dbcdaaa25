"""Dense layers, loss, optimizer, model builders and the training loop.

Three architectures share the same trunk-and-head layout:

* ``nd``    -- pairwise normalized-difference first layer, then dense
* ``attnd`` -- same, with input-dependent sigmoid gates on the pair outputs
* ``mlp``   -- plain dense first layer, width-matched to the pair count

Depth counts every layer including input and output: depth 2 is
input -> first transform -> 1-logit head, each extra depth inserts one
ReLU dense hidden layer of the pair-count width.

All training state is explicit: parameters are a flat list of numpy
arrays in a documented order, Adam keeps per-array moments, and the
training loop is deterministic given TrainConfig.seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .ndlayer import (
    DEFAULT_EPS,
    NdParams,
    PairIndexer,
    attention_gate,
    attention_gate_backward,
    nd_backward,
    nd_backward_signed,
    nd_forward,
    nd_forward_signed,
    pair_count,
)
from .ndmath import sigmoid, softplus

ARCHITECTURES = ("nd", "mlp", "attnd")
DEPTHS = (2, 3, 4)

__all__ = [
    "ARCHITECTURES",
    "DEPTHS",
    "DenseLayer",
    "Model",
    "TrainConfig",
    "AdamState",
    "TrainHistory",
    "dense_forward",
    "dense_backward",
    "bce_with_logits",
    "init_adam",
    "adam_step",
    "build_model",
    "count_params",
    "model_forward",
    "model_backward",
    "predict_labels",
    "accuracy_from_logits",
    "train",
    "save_checkpoint",
    "load_checkpoint",
    "checkpoint_to_json",
    "model_from_checkpoint_dict",
]


# ---------------------------------------------------------------------------
# dense layer


@dataclass
class DenseLayer:
    weights: np.ndarray  # (n_out, n_in)
    bias: np.ndarray  # (n_out,)
    activation: str  # "relu" | "identity"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ValueError(
                f"weights {self.weights.shape} and bias {self.bias.shape} "
                "are inconsistent"
            )
        if self.activation not in ("relu", "identity"):
            raise ValueError(f"unknown activation {self.activation!r}")

    def copy(self) -> "DenseLayer":
        return DenseLayer(self.weights.copy(), self.bias.copy(), self.activation)


@dataclass
class DenseCache:
    inputs: np.ndarray  # (batch, n_in)
    pre: np.ndarray  # (batch, n_out), pre-activation
    single: bool


def dense_forward(layer: DenseLayer, x):
    """Affine map plus activation; returns (output, cache)."""
    batch, single = _as_batch(x)
    if batch.shape[1] != layer.weights.shape[1]:
        raise ValueError(
            f"input width {batch.shape[1]} does not match layer fan-in "
            f"{layer.weights.shape[1]}"
        )
    pre = batch @ layer.weights.T + layer.bias
    out = np.maximum(pre, 0.0) if layer.activation == "relu" else pre
    cache = DenseCache(batch, pre, single)
    return (out[0] if single else out), cache


def dense_backward(layer: DenseLayer, cache: DenseCache, upstream):
    """Returns (d_weights, d_bias, d_input). ReLU derivative at 0 is 0."""
    delta = np.asarray(upstream, dtype=np.float64)
    if cache.single:
        delta = delta[None, :]
    if delta.shape != cache.pre.shape:
        raise ValueError(
            f"upstream shape {delta.shape} does not match forward shape "
            f"{cache.pre.shape}"
        )
    if layer.activation == "relu":
        delta = delta * (cache.pre > 0)
    d_weights = delta.T @ cache.inputs
    d_bias = delta.sum(axis=0)
    d_input = delta @ layer.weights
    if cache.single:
        d_input = d_input[0]
    return d_weights, d_bias, d_input


def _as_batch(x):
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        return a[None, :], True
    if a.ndim == 2:
        return a, False
    raise ValueError(f"expected 1-d or 2-d input, got shape {a.shape}")


# ---------------------------------------------------------------------------
# loss


def bce_with_logits(logit, label):
    """Binary cross-entropy on a raw logit, in the overflow-safe form.

    loss = softplus(logit) - label*logit, dloss/dlogit = sigmoid(logit) - label.
    Elementwise over arrays; labels are 0/1.
    """
    logit = np.asarray(logit, dtype=np.float64)
    label = np.asarray(label, dtype=np.float64)
    loss = softplus(logit) - label * logit
    grad = sigmoid(logit) - label
    return loss, grad


def predict_labels(logits):
    """Hard 0/1 predictions; the tie sigmoid(logit) == 0.5 maps to class 0."""
    return (np.asarray(logits) > 0).astype(np.int64)


def accuracy_from_logits(logits, labels) -> float:
    return float(np.mean(predict_labels(logits) == np.asarray(labels)))


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    weight_decay: float = 1e-4
    batch_size: int = 32
    max_epochs: int = 150
    patience: int = 25
    seed: int = 0
    eps: float = DEFAULT_EPS
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    decoupled_weight_decay: bool = False  # False: L2 folded into the gradient

    def __post_init__(self):
        if min(self.learning_rate, self.batch_size, self.max_epochs,
               self.patience, self.eps, self.adam_eps) <= 0:
            raise ValueError("TrainConfig fields must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be nonnegative")
        if self.patience > self.max_epochs:
            raise ValueError("patience must not exceed max_epochs")


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0


def init_adam(params) -> AdamState:
    return AdamState(m=[np.zeros_like(p) for p in params],
                     v=[np.zeros_like(p) for p in params])


def adam_step(params, grads, state: AdamState, config: TrainConfig):
    """One Adam update, in place on ``params``.

    With ``decoupled_weight_decay=False`` the decay enters the gradient
    (grad + wd*param) before the moment updates; with True it is applied
    as a separate -lr*wd*param term outside the adaptive scaling.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params/grads/state lengths disagree")
    state.t += 1
    b1, b2 = config.adam_beta1, config.adam_beta2
    bias1 = 1.0 - b1 ** state.t
    bias2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"param shape {p.shape} vs grad shape {g.shape}")
        if config.weight_decay and not config.decoupled_weight_decay:
            g = g + config.weight_decay * p
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        update = (m / bias1) / (np.sqrt(v / bias2) + config.adam_eps)
        if config.weight_decay and config.decoupled_weight_decay:
            update = update + config.weight_decay * p
        p -= config.learning_rate * update
    return params, state


# ---------------------------------------------------------------------------
# model


@dataclass
class Model:
    arch: str
    depth: int
    n_bands: int
    band_names: list
    eps: float
    nd_params: NdParams | None
    attn_weights: np.ndarray | None
    attn_bias: np.ndarray | None
    layers: list  # DenseLayer hidden stack, ending with the 1-logit head
    indexer: PairIndexer = field(init=False, repr=False)

    def __post_init__(self):
        if self.arch not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.arch!r}")
        if len(self.band_names) != self.n_bands:
            raise ValueError("band_names length must equal n_bands")
        self.indexer = PairIndexer(self.n_bands)

    def parameters(self) -> list:
        """Learnable arrays in declared order (checkpoint order).

        nd:    alpha, beta, then per dense layer weights, bias
        attnd: alpha, beta, attention weights, attention bias, then dense
        mlp:   per dense layer weights, bias
        """
        out = []
        if self.nd_params is not None:
            out.extend([self.nd_params.alpha, self.nd_params.beta])
        if self.attn_weights is not None:
            out.extend([self.attn_weights, self.attn_bias])
        for layer in self.layers:
            out.extend([layer.weights, layer.bias])
        return out

    def parameter_names(self) -> list:
        names = []
        if self.nd_params is not None:
            names.extend(["nd.alpha", "nd.beta"])
        if self.attn_weights is not None:
            names.extend(["attn.weights", "attn.bias"])
        for k, _ in enumerate(self.layers):
            names.extend([f"dense{k}.weights", f"dense{k}.bias"])
        return names

    def copy(self) -> "Model":
        return Model(
            arch=self.arch,
            depth=self.depth,
            n_bands=self.n_bands,
            band_names=list(self.band_names),
            eps=self.eps,
            nd_params=self.nd_params.copy() if self.nd_params else None,
            attn_weights=None if self.attn_weights is None else self.attn_weights.copy(),
            attn_bias=None if self.attn_bias is None else self.attn_bias.copy(),
            layers=[layer.copy() for layer in self.layers],
        )

    def set_parameters(self, values):
        """Copy ``values`` (a parameters()-ordered list) into this model."""
        own = self.parameters()
        if len(own) != len(values):
            raise ValueError("parameter list length mismatch")
        for dst, src in zip(own, values):
            if dst.shape != src.shape:
                raise ValueError("parameter shape mismatch")
            dst[...] = src


def default_band_names(n_bands: int) -> list:
    """Sentinel-2-style labels for 10 bands, generic otherwise."""
    if n_bands == 10:
        return ["B2", "B3", "B4", "B5", "B6", "B7", "B8", "B8A", "B11", "B12"]
    return [f"band_{k}" for k in range(n_bands)]


def build_model(arch: str, depth: int, n_bands: int, seed: int = 0,
                eps: float = DEFAULT_EPS, band_names=None) -> Model:
    """Construct one of the three architectures at the given depth.

    Widths follow the pair count (45 for 10 bands). Dense weights draw
    uniform from [-1/sqrt(fan_in), +1/sqrt(fan_in)] in forward layer
    order; biases start at zero. Coupling coefficients start at zero
    (the classical symmetric index); attention gates start near the
    uniform 0.5 gate (weights uniform in [-0.1, 0.1], bias zero).
    """
    if arch not in ARCHITECTURES:
        raise ValueError(f"unknown architecture {arch!r}; expected {ARCHITECTURES}")
    if depth not in DEPTHS:
        raise ValueError(f"unsupported depth {depth}; expected one of {DEPTHS}")
    if n_bands < 2:
        raise ValueError("need at least 2 bands")
    if band_names is None:
        band_names = default_band_names(n_bands)

    width = pair_count(n_bands)
    rng = np.random.default_rng(seed)

    nd_params = None
    attn_w = attn_c = None
    layers = []
    if arch in ("nd", "attnd"):
        nd_params = NdParams.zeros(width)
        if arch == "attnd":
            attn_w = rng.uniform(-0.1, 0.1, size=(width, n_bands))
            attn_c = np.zeros(width)
        first_width = width
    else:
        layers.append(_init_dense(rng, width, n_bands, "relu"))
        first_width = width

    for _ in range(depth - 2):
        layers.append(_init_dense(rng, width, first_width, "relu"))
        first_width = width
    layers.append(_init_dense(rng, 1, first_width, "identity"))

    return Model(arch=arch, depth=depth, n_bands=n_bands,
                 band_names=list(band_names), eps=float(eps),
                 nd_params=nd_params, attn_weights=attn_w, attn_bias=attn_c,
                 layers=layers)


def _init_dense(rng, n_out: int, n_in: int, activation: str) -> DenseLayer:
    bound = 1.0 / np.sqrt(n_in)
    weights = rng.uniform(-bound, bound, size=(n_out, n_in))
    return DenseLayer(weights, np.zeros(n_out), activation)


def count_params(model: Model) -> int:
    """Exact number of learnable scalars."""
    return int(sum(p.size for p in model.parameters()))


@dataclass
class ModelCache:
    first: object  # NdCache/NdSignedCache for nd archs, else None
    gate: object  # AttentionCache for attnd, else None
    dense: list  # DenseCache per dense layer
    signed: bool
    single: bool


def model_forward(model: Model, bands, signed: bool = False):
    """End-to-end logit. Returns (logit, cache).

    ``signed=True`` routes an nd/attnd first layer through the
    smooth-absolute-value forward so inputs may be negative (used when
    evaluating noise-perturbed data); the plain forward rejects negatives.
    """
    batch, single = _as_batch(bands)
    if batch.shape[1] != model.n_bands:
        raise ValueError(
            f"model expects {model.n_bands} bands, got {batch.shape[1]}"
        )
    first_cache = gate_cache = None
    if model.arch in ("nd", "attnd"):
        fwd = nd_forward_signed if signed else nd_forward
        x, first_cache = fwd(batch, model.nd_params, model.eps, model.indexer)
        if model.arch == "attnd":
            x, gate_cache = attention_gate(batch, model.attn_weights,
                                           model.attn_bias, x)
    else:
        x = batch
    dense_caches = []
    for layer in model.layers:
        x, cache = dense_forward(layer, x)
        dense_caches.append(cache)
    logit = x[:, 0]
    cache = ModelCache(first_cache, gate_cache, dense_caches, signed, single)
    return (float(logit[0]) if single else logit), cache


def model_backward(model: Model, cache: ModelCache, d_logit):
    """Gradients for every learnable array plus the input bands.

    Returns (grads, d_bands) with ``grads`` ordered like
    ``model.parameters()``.
    """
    delta = np.asarray(d_logit, dtype=np.float64)
    if cache.single:
        delta = np.atleast_1d(delta)
    delta = delta[:, None]

    dense_grads = []
    for layer, layer_cache in zip(reversed(model.layers), reversed(cache.dense)):
        d_w, d_b, delta = dense_backward(layer, layer_cache, delta)
        dense_grads.append((d_w, d_b))
    dense_grads.reverse()

    grads = []
    d_bands = None
    if model.arch in ("nd", "attnd"):
        if model.arch == "attnd":
            attn = attention_gate_backward(cache.gate, delta)
            delta = attn.d_nd_outputs
        bwd = nd_backward_signed if cache.signed else nd_backward
        nd_grads = bwd(cache.first, delta, model.nd_params, model.eps)
        d_bands = nd_grads.d_input
        if model.arch == "attnd":
            d_bands = d_bands + attn.d_bands
        grads.extend([nd_grads.d_alpha, nd_grads.d_beta])
        if model.arch == "attnd":
            grads.extend([attn.d_weights, attn.d_bias])
    else:
        d_bands = delta
    for d_w, d_b in dense_grads:
        grads.extend([d_w, d_b])
    if cache.single and d_bands.ndim == 2:
        d_bands = d_bands[0]
    return grads, d_bands


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_accuracy: list = field(default_factory=list)
    best_epoch: int = 0  # 1-based; 0 means no epoch ran
    stopped_epoch: int = 0


def _dataset_arrays(dataset):
    """Accept a data.Dataset or an (X, y) tuple."""
    if hasattr(dataset, "X") and hasattr(dataset, "y"):
        return np.asarray(dataset.X, dtype=np.float64), np.asarray(dataset.y)
    X, y = dataset
    return np.asarray(X, dtype=np.float64), np.asarray(y)


def train(model: Model, train_set, val_set, config: TrainConfig):
    """Mini-batch Adam with early stopping on validation accuracy.

    Shuffles the training set each epoch from a generator seeded with
    config.seed, trains on every batch including a final partial one,
    and tracks the best validation accuracy (strict improvement; ties
    keep the earlier epoch). Stops after ``patience`` epochs without
    improvement or at ``max_epochs``, then restores the best-epoch
    parameters. Returns (model, TrainHistory).
    """
    X_train, y_train = _dataset_arrays(train_set)
    X_val, y_val = _dataset_arrays(val_set)
    if len(X_train) == 0 or len(X_val) == 0:
        raise ValueError("train and validation sets must be non-empty")

    rng = np.random.default_rng(config.seed)
    params = model.parameters()
    state = init_adam(params)
    history = TrainHistory()

    best_params = [p.copy() for p in params]
    best_acc = -np.inf
    epochs_since_improvement = 0

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(X_train))
        loss_sum = 0.0
        for start in range(0, len(order), config.batch_size):
            chunk = order[start:start + config.batch_size]
            xb, yb = X_train[chunk], y_train[chunk]
            logits, cache = model_forward(model, xb)
            losses, d_logits = bce_with_logits(logits, yb)
            loss_sum += float(losses.sum())
            grads, _ = model_backward(model, cache, d_logits / len(chunk))
            adam_step(params, grads, state, config)

        val_logits, _ = model_forward(model, X_val)
        val_losses, _ = bce_with_logits(val_logits, y_val)
        val_acc = accuracy_from_logits(val_logits, y_val)

        history.train_loss.append(loss_sum / len(X_train))
        history.val_loss.append(float(val_losses.mean()))
        history.val_accuracy.append(val_acc)

        if val_acc > best_acc:
            best_acc = val_acc
            best_params = [p.copy() for p in params]
            history.best_epoch = epoch
            epochs_since_improvement = 0
        else:
            epochs_since_improvement += 1
        history.stopped_epoch = epoch
        if epochs_since_improvement >= config.patience:
            break

    model.set_parameters(best_params)
    return model, history


# ---------------------------------------------------------------------------
# checkpoints

CHECKPOINT_FORMAT = "ndnet-checkpoint"
CHECKPOINT_VERSION = 1


def checkpoint_to_json(model: Model, meta: dict | None = None) -> str:
    """Serialize a model to a self-describing JSON document.

    Floats are written in Python's shortest round-trip decimal form, so a
    load reproduces every f64 bit-exactly.
    """
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "arch": model.arch,
        "depth": model.depth,
        "band_names": list(model.band_names),
        "eps": model.eps,
        "params": {
            name: np.asarray(value, dtype=np.float64).tolist()
            for name, value in zip(model.parameter_names(), model.parameters())
        },
        "activations": [layer.activation for layer in model.layers],
    }
    if meta is not None:
        doc["meta"] = meta
    return json.dumps(doc, indent=2)


def save_checkpoint(model: Model, path, meta: dict | None = None):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(checkpoint_to_json(model, meta))
        fh.write("\n")


def model_from_checkpoint_dict(doc: dict) -> Model:
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError("not an ndnet checkpoint document")
    band_names = list(doc["band_names"])
    model = build_model(doc["arch"], int(doc["depth"]), len(band_names),
                        seed=0, eps=float(doc["eps"]), band_names=band_names)
    params = doc["params"]
    values = [np.asarray(params[name], dtype=np.float64)
              for name in model.parameter_names()]
    model.set_parameters(values)
    return model


def load_checkpoint(path) -> Model:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return model_from_checkpoint_dict(doc)


def load_checkpoint_meta(path) -> dict:
    """The optional metadata block a checkpoint was saved with ({} if none)."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return doc.get("meta", {})
