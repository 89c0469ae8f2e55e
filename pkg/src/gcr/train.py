"""Joint training: MLP backbone + classifier head, softmax cross-entropy.

Euclidean parameters (backbone, linear/cosine heads) use SGD with momentum
and weight decay; the Grassmann head uses :func:`gcr.grassmann.rsgd_step`
without weight decay.
"""
import dataclasses
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFeature, DimensionError, GcrError, InvalidSpec
from .grassmann import ProductGrassmannParam, RsgdState, orthonormality_error, rsgd_step
from .heads import CosineHead, GcrHead, LinearHead


@dataclass
class Dataset:
    """Input matrix ``x`` (N, d) with integer labels ``y`` in [0, num_classes)."""

    x: np.ndarray
    y: np.ndarray
    num_classes: int = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y).astype(np.int64)
        if self.x.ndim != 2 or self.y.shape != (len(self.x),):
            raise DimensionError("dataset needs x of shape (N, d) and y of shape (N,)")
        if len(self.y) == 0:
            raise InvalidSpec("dataset is empty")
        if self.num_classes is None:
            self.num_classes = int(self.y.max()) + 1
        if self.y.min() < 0 or self.y.max() >= self.num_classes:
            raise InvalidSpec(f"labels must lie in [0, {self.num_classes})")

    def __len__(self):
        return len(self.y)

    def class_counts(self):
        return np.bincount(self.y, minlength=self.num_classes)


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 64
    lr: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 5e-4
    tau: float = 0.05
    tau_momentum: float = 0.9
    reorth_period: int = 5
    gamma: float = 25.0
    k: int = 8
    head: str = "gcr"
    retraction: str = "geodesic"
    head_optimizer: str = "rsgd"
    normalize: bool = True
    cosine_scale: float = 25.0
    hidden: int = 128
    feature_dim: int = 64
    backbone: bool = True
    schedule: str = "constant"
    seed: int = 0

    def __post_init__(self):
        for name in ("lr", "tau", "gamma", "cosine_scale"):
            if not getattr(self, name) > 0:
                raise InvalidSpec(f"{name} must be positive")
        for name in ("epochs", "batch_size", "k", "hidden", "feature_dim"):
            if int(getattr(self, name)) < 1:
                raise InvalidSpec(f"{name} must be a positive integer")
        if not (0 <= self.momentum < 1 and 0 <= self.tau_momentum < 1):
            raise InvalidSpec("momentum coefficients must lie in [0, 1)")
        if self.weight_decay < 0 or self.reorth_period < 0:
            raise InvalidSpec("weight_decay and reorth_period must be nonnegative")
        choices = {"head": ("gcr", "linear", "cosine"), "retraction": ("geodesic", "qr"),
                   "head_optimizer": ("rsgd", "sgd"), "schedule": ("constant", "cosine")}
        for name, allowed in choices.items():
            if getattr(self, name) not in allowed:
                raise InvalidSpec(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidSpec(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


class MlpBackbone:
    """Dense layers with ReLU between them and a linear output layer."""

    def __init__(self, weights, biases):
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        for a, b in zip(self.weights, self.weights[1:]):
            if a.shape[1] != b.shape[0]:
                raise DimensionError("consecutive layer dimensions do not match")

    @classmethod
    def random(cls, sizes, seed=None):
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes, sizes[1:]):
            weights.append(rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases)

    @property
    def sizes(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def out_dim(self):
        return self.weights[-1].shape[1]

    def forward(self, x):
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.maximum(h, 0.0)
            acts.append(h)
        return h, acts

    def backward(self, acts, grad):
        grads = [None] * len(self.weights)
        last = len(self.weights) - 1
        for i in range(last, -1, -1):
            if i < last:
                grad = grad * (acts[i + 1] > 0)
            grads[i] = (acts[i].T @ grad, grad.sum(axis=0))
            grad = grad @ self.weights[i].T
        return grads, grad

    def params(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out


@dataclass
class Model:
    backbone: MlpBackbone
    head: object

    def features(self, x):
        x = np.asarray(x, dtype=np.float64)
        return x if self.backbone is None else self.backbone.forward(x)[0]

    def logits(self, x):
        return self.head.forward(self.features(x))


def log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def cross_entropy(logits, labels):
    """Mean softmax cross-entropy and its gradient with respect to the logits."""
    logp = log_softmax(logits)
    n = len(labels)
    loss = -logp[np.arange(n), labels].mean()
    dlogits = np.exp(logp)
    dlogits[np.arange(n), labels] -= 1.0
    return float(loss), dlogits / n


def forward_loss(net, head, batch):
    """Mean cross-entropy over ``batch = (x, y)``; ``net`` may be None."""
    x, y = batch
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    if len(x) == 0:
        raise InvalidSpec("empty batch")
    if net is None:
        feats, acts = x, None
    else:
        feats, acts = net.forward(x)
    logits = head.forward(feats)
    loss, dlogits = cross_entropy(logits, y)
    cache = {"net": net, "head": head, "acts": acts, "features": feats,
             "logits": logits, "dlogits": dlogits}
    return loss, cache


def backward(cache):
    """Gradients of the mean loss: ``{"head": ..., "backbone": [(dW, db), ...]}``."""
    d_head, d_feat = cache["head"].backward(cache["features"], cache["dlogits"])
    grads = {"head": d_head, "backbone": None}
    if cache["net"] is not None:
        grads["backbone"], _ = cache["net"].backward(cache["acts"], d_feat)
    return grads


class SgdMomentum:
    """Heavy-ball SGD with L2 weight decay: buf = mu buf + (g + wd p); p -= lr buf."""

    def __init__(self, params, momentum=0.9, weight_decay=0.0):
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.buffers = [np.zeros_like(p) for p in params]

    def step(self, params, grads, lr):
        out = []
        for i, (p, g) in enumerate(zip(params, grads)):
            if self.weight_decay:
                g = g + self.weight_decay * p
            self.buffers[i] = self.momentum * self.buffers[i] + g
            out.append(p - lr * self.buffers[i])
        return out


def build_model(config, in_dim, num_classes, seed_seq=None):
    seeds = (seed_seq or np.random.SeedSequence(config.seed)).spawn(2)
    if config.backbone:
        net = MlpBackbone.random([in_dim, config.hidden, config.feature_dim],
                                 np.random.default_rng(seeds[0]))
        n = config.feature_dim
    else:
        net, n = None, in_dim
    rng = np.random.default_rng(seeds[1])
    if config.head == "gcr":
        head = GcrHead.random(n, num_classes, config.k, config.gamma, config.normalize, rng)
    elif config.head == "linear":
        head = LinearHead.random(n, num_classes, rng)
    else:
        head = CosineHead.random(n, num_classes, config.cosine_scale, rng)
    return Model(net, head)


def _head_ortho_error(head):
    return orthonormality_error(head.param) if isinstance(head, GcrHead) else 0.0


def _euclid_params(model):
    """Flat list of Euclidean parameter arrays (backbone first, then head)."""
    params = model.backbone.params() if model.backbone is not None else []
    if isinstance(model.head, LinearHead):
        params += [model.head.weight, model.head.bias]
    elif isinstance(model.head, CosineHead):
        params.append(model.head.weight)
    return params


def _euclid_grads(model, grads):
    flat = []
    for dw, db in grads["backbone"] or []:
        flat += [dw, db]
    if isinstance(model.head, LinearHead):
        flat += list(grads["head"])
    elif isinstance(model.head, CosineHead):
        flat.append(grads["head"])
    return flat


def _set_euclid_params(model, values):
    net, head = model.backbone, model.head
    nb = 0
    if net is not None:
        nb = 2 * len(net.weights)
        net.weights = list(values[0:nb:2])
        net.biases = list(values[1:nb:2])
    if isinstance(head, LinearHead):
        head.weight, head.bias = values[nb], values[nb + 1]
    elif isinstance(head, CosineHead):
        head.weight = values[nb]
        head.renormalize()


@dataclass
class TrainResult:
    model: Model
    log: list
    step_log: list = field(default_factory=list)
    rsgd: RsgdState = None
    head_buffer: np.ndarray = None
    steps: int = 0


def train(config, dataset, log_every=0, max_steps=None):
    """Train a model on ``dataset``.

    Returns a :class:`TrainResult`. ``log`` has one row per epoch with keys
    epoch, step, loss (mean batch loss over the epoch), top1 (train-set
    accuracy after the epoch), ortho_error and wall_ms. When ``log_every``
    is positive, ``step_log`` additionally records (step, loss, ortho_error)
    every ``log_every`` steps. ``max_steps`` stops early.
    """
    init_seq, shuffle_seq = np.random.SeedSequence(config.seed).spawn(2)
    model = build_model(config, dataset.x.shape[1], dataset.num_classes, init_seq)
    head = model.head
    shuffle_rng = np.random.default_rng(shuffle_seq)

    sgd = SgdMomentum(_euclid_params(model), config.momentum, config.weight_decay)
    rsgd = head_sgd = None
    if isinstance(head, GcrHead):
        if config.head_optimizer == "rsgd":
            rsgd = RsgdState(head.param, config.tau, config.tau_momentum,
                             config.reorth_period, config.retraction)
        else:
            # ablation: plain Euclidean updates, the basis is never re-orthonormalized
            head_sgd = SgdMomentum([head.weight], config.tau_momentum)

    n = len(dataset)
    total = math.ceil(n / config.batch_size) * config.epochs
    log, step_log = [], []
    step = 0
    t0 = time.perf_counter()
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(n)
        losses = []
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            scale = 1.0
            if config.schedule == "cosine":
                scale = 0.5 * (1 + math.cos(math.pi * step / total))
            try:
                loss, cache = forward_loss(model.backbone, head, (dataset.x[idx], dataset.y[idx]))
                grads = backward(cache)
                params = _euclid_params(model)
                if params:
                    _set_euclid_params(model, sgd.step(params, _euclid_grads(model, grads),
                                                       config.lr * scale))
                if rsgd is not None:
                    rsgd_step(rsgd, grads["head"], config.tau * scale)
                elif head_sgd is not None:
                    head.weight = head_sgd.step([head.weight], [grads["head"]],
                                                config.tau * scale)[0]
            except GcrError as exc:
                raise exc.add_context(f"epoch {epoch} step {step + 1}")
            step += 1
            losses.append(loss)
            if log_every and step % log_every == 0:
                step_log.append({"step": step, "loss": loss,
                                 "ortho_error": _head_ortho_error(head)})
            if max_steps is not None and step >= max_steps:
                break
        top1, _ = evaluate(model, dataset)
        log.append({"epoch": epoch, "step": step, "loss": float(np.mean(losses)),
                    "top1": top1, "ortho_error": _head_ortho_error(head),
                    "wall_ms": (time.perf_counter() - t0) * 1e3})
        if max_steps is not None and step >= max_steps:
            break
    if head_sgd is not None:
        head_buffer = head_sgd.buffers[0]
    elif isinstance(head, LinearHead):
        head_buffer = sgd.buffers[-2]
    elif isinstance(head, CosineHead):
        head_buffer = sgd.buffers[-1]
    else:
        head_buffer = rsgd.buffer
    return TrainResult(model, log, step_log, rsgd, head_buffer, step)


def evaluate(model, dataset):
    """Top-1 accuracy and per-class accuracy (NaN for classes with no samples)."""
    pred = np.argmax(model.logits(dataset.x), axis=1)
    correct = pred == dataset.y
    counts = dataset.class_counts()
    hits = np.bincount(dataset.y, weights=correct, minlength=dataset.num_classes)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_class = np.where(counts > 0, hits / np.maximum(counts, 1), np.nan)
    return float(correct.mean()), per_class


def fit_projection_toy(x0, s0, lr=0.5, momentum=0.0, steps=500, retraction="geodesic",
                       reorth_period=5):
    """Maximize ||proj_S x0|| over S in G(k, n) starting from basis ``s0``.

    Returns ``(basis, history)`` where ``history[t]`` is the objective after
    ``t`` steps (``history[0]`` is the starting value).
    """
    x0 = np.asarray(x0, dtype=np.float64)
    s0 = np.asarray(s0, dtype=np.float64)
    param = ProductGrassmannParam(s0.copy(), [s0.shape[1]])
    state = RsgdState(param, lr, momentum, reorth_period, retraction)
    history = [float(np.linalg.norm(s0.T @ x0))]
    for _ in range(steps):
        s = param.matrix
        proj = s.T @ x0
        value = np.linalg.norm(proj)
        if value < 1e-300:
            raise DegenerateFeature("start is orthogonal to x0; the gradient vanishes")
        # loss = -||S^T x0||
        rsgd_step(state, -np.outer(x0, proj) / value)
        history.append(float(np.linalg.norm(param.matrix.T @ x0)))
    return param.matrix, history
