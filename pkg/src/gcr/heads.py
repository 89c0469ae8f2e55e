"""Classifier heads mapping features to logits, with exact backward passes.

All forward functions accept a single feature vector (n,) or a batch (B, n)
and return logits of shape (C,) or (B, C) accordingly. Backward functions
take the same ``x`` and the upstream ``dlogits`` and return
``(d_param, d_x)``; ``d_param`` is summed over the batch, so a caller that
wants a mean-loss gradient scales ``dlogits`` by 1/B beforehand.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFeature, DimensionError, InvalidSpec
from .grassmann import ProductGrassmannParam

FEATURE_EPS = 1e-12
LOGIT_EPS = 1e-12

HEAD_TAGS = {"linear": 0, "cosine": 1, "gcr": 2}


def _batch(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return x[None, :], True
    if x.ndim != 2:
        raise DimensionError(f"features must be 1-D or 2-D, got shape {x.shape}")
    return x, False


def _unbatch(y, single):
    return y[0] if single else y


def _norms(x):
    r = np.linalg.norm(x, axis=1)
    bad = np.flatnonzero(r <= FEATURE_EPS)
    if bad.size:
        raise DegenerateFeature(f"feature {bad[0]} has norm {r[bad[0]]:.3e}")
    return r


def normalize_feature(x, gamma):
    """Rescale ``x`` (or each row of a batch) to length ``gamma``."""
    xb, single = _batch(x)
    r = _norms(xb)
    return _unbatch(gamma * xb / r[:, None], single)


def _normalization_vjp(x, r, gamma, grad):
    """Pull ``grad`` back through x -> gamma x/|x| (row-wise)."""
    xhat = x / r[:, None]
    radial = np.sum(grad * xhat, axis=1, keepdims=True)
    return gamma * (grad - radial * xhat) / r[:, None]


@dataclass
class GcrHead:
    """Grassmann class representation: logit_i = ||S_i^T x~||, x~ = gamma x/|x|."""

    param: ProductGrassmannParam
    gamma: float = 25.0
    normalize: bool = True

    def __post_init__(self):
        if not self.gamma > 0:
            raise InvalidSpec("gamma must be positive")

    kind = "gcr"

    @classmethod
    def random(cls, n, num_classes, k=8, gamma=25.0, normalize=True, seed=None, dims=None):
        dims = list(dims) if dims is not None else [k] * num_classes
        return cls(ProductGrassmannParam.random(n, dims, seed), gamma, normalize)

    @property
    def num_classes(self):
        return self.param.num_classes

    @property
    def weight(self):
        return self.param.matrix

    @weight.setter
    def weight(self, value):
        self.param.matrix = value

    def _coords(self, xb):
        if xb.shape[1] != self.param.n:
            raise DimensionError(f"feature dim {xb.shape[1]} != head dim {self.param.n}")
        if self.normalize:
            r = _norms(xb)
            xt = self.gamma * xb / r[:, None]
        else:
            r = None
            xt = xb
        t = xt @ self.param.matrix
        k = self.param.uniform_k
        if k is not None:
            logits = np.linalg.norm(t.reshape(len(xb), -1, k), axis=2)
        else:
            logits = np.stack([np.linalg.norm(t[:, self.param.block_slice(i)], axis=1)
                               for i in range(self.num_classes)], axis=1)
        return xt, r, t, logits

    def forward(self, x):
        xb, single = _batch(x)
        return _unbatch(self._coords(xb)[3], single)

    def backward(self, x, dlogits):
        xb, single = _batch(x)
        dl = np.asarray(dlogits, dtype=np.float64).reshape(len(xb), -1)
        xt, r, t, logits = self._coords(xb)
        # zero subgradient where the projection vanishes
        safe = np.where(logits < LOGIT_EPS, np.inf, logits)
        w = dl / safe
        dims = self.param.dims
        dt = t * np.repeat(w, dims, axis=1)
        d_param = xt.T @ dt
        d_xt = dt @ self.param.matrix.T
        if self.normalize:
            d_x = _normalization_vjp(xb, r, self.gamma, d_xt)
        else:
            d_x = d_xt
        return d_param, _unbatch(d_x, single)


def gcr_forward(head, x):
    return head.forward(x)


def gcr_backward(head, x, dlogits):
    return head.backward(x, dlogits)


@dataclass
class LinearHead:
    """Vector class representation: logits = W^T x + b."""

    weight: np.ndarray
    bias: np.ndarray

    kind = "linear"

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.bias.shape != (self.weight.shape[1],):
            raise DimensionError("bias length must equal the number of classes")

    @classmethod
    def random(cls, n, num_classes, seed=None):
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        bound = 1.0 / np.sqrt(n)
        return cls(rng.uniform(-bound, bound, (n, num_classes)), np.zeros(num_classes))

    @property
    def num_classes(self):
        return self.weight.shape[1]

    def forward(self, x):
        xb, single = _batch(x)
        return _unbatch(xb @ self.weight + self.bias, single)

    def backward(self, x, dlogits):
        xb, single = _batch(x)
        dl = np.asarray(dlogits, dtype=np.float64).reshape(len(xb), -1)
        return (xb.T @ dl, dl.sum(axis=0)), _unbatch(dl @ self.weight.T, single)


@dataclass
class CosineHead:
    """Scaled cosine similarity: logit_i = scale * <w_i, x> / (|w_i| |x|).

    Columns are kept at unit length by :meth:`renormalize`, which the
    training loop calls after every optimizer step.
    """

    weight: np.ndarray
    scale: float = 25.0

    kind = "cosine"

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        if not self.scale > 0:
            raise InvalidSpec("scale must be positive")

    @classmethod
    def random(cls, n, num_classes, scale=25.0, seed=None):
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        head = cls(rng.standard_normal((n, num_classes)), scale)
        head.renormalize()
        return head

    @property
    def num_classes(self):
        return self.weight.shape[1]

    def renormalize(self):
        self.weight = self.weight / np.linalg.norm(self.weight, axis=0, keepdims=True)

    def forward(self, x):
        xb, single = _batch(x)
        xhat = xb / _norms(xb)[:, None]
        wn = np.linalg.norm(self.weight, axis=0)
        return _unbatch(self.scale * (xhat @ self.weight) / wn, single)

    def backward(self, x, dlogits):
        xb, single = _batch(x)
        dl = np.asarray(dlogits, dtype=np.float64).reshape(len(xb), -1)
        r = _norms(xb)
        xhat = xb / r[:, None]
        wn = np.linalg.norm(self.weight, axis=0)
        what = self.weight / wn
        cos = xhat @ what
        g = self.scale * dl
        # d/dw of <w, xhat>/|w| = (xhat - cos * what)/|w|
        d_w = (xhat.T @ g - what * np.sum(g * cos, axis=0)) / wn
        d_xhat = g @ what.T
        d_x = _normalization_vjp(xb, r, 1.0, d_xhat)
        return d_w, _unbatch(d_x, single)


def linear_forward(head, x):
    return head.forward(x)


def linear_backward(head, x, dlogits):
    return head.backward(x, dlogits)


def cosine_forward(head, x):
    return head.forward(x)


def cosine_backward(head, x, dlogits):
    return head.backward(x, dlogits)
