"""Grassmann manifold geometry and Riemannian SGD with momentum.

A point of G(k, n) is stored as an n x k float64 array with orthonormal
columns. A product of Grassmannians is stored as the column-concatenation
of per-class blocks (``ProductGrassmannParam``); the full matrix is not
orthonormal, only each block is.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import BlockError, DimensionError, GcrError, InvalidSpec, TangencyError
from .linalg import qf, thin_svd

BASIS_ATOL = 1e-8
TANGENCY_ATOL = 1e-8
ZERO_TANGENT = 1e-15


def _check_pair(s, d):
    s = np.asarray(s, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    if s.ndim != 2 or s.shape != d.shape:
        raise DimensionError(f"shape mismatch: basis {s.shape} vs matrix {d.shape}")
    return s, d


def basis_error(s):
    """Max-abs deviation of ``s.T @ s`` from the identity."""
    s = np.asarray(s, dtype=np.float64)
    return float(np.max(np.abs(s.T @ s - np.eye(s.shape[1]))))


def check_basis(s, atol=BASIS_ATOL):
    """Validate that ``s`` is an n x k orthonormal basis; returns it as float64."""
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or not 1 <= s.shape[1] <= s.shape[0]:
        raise DimensionError(f"a subspace basis must be n x k with 1 <= k <= n, got {s.shape}")
    err = basis_error(s)
    if err > atol:
        raise DimensionError(f"basis is not orthonormal (error {err:.3e})")
    return s


def random_subspace(n, k, seed=None):
    """Orthonormal basis ``qf(G)`` of an n x k standard Gaussian draw."""
    if not 1 <= k <= n:
        raise DimensionError(f"need 1 <= k <= n, got k={k}, n={n}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return qf(rng.standard_normal((n, k)))


def riemannian_grad(s, d):
    """Project a Euclidean gradient onto the tangent space at ``s``: d - s (s^T d)."""
    s, d = _check_pair(s, d)
    return d - s @ (s.T @ d)


def transport_momentum(s, m_prev):
    """Approximate parallel transport of a momentum buffer by projection onto T_s."""
    return riemannian_grad(s, m_prev)


def geodesic_retract(s, g, t, check=True):
    """Endpoint of the geodesic from ``s`` in tangent direction ``g`` after time ``t``.

    With ``g = U diag(sigma) V^T`` (thin SVD) the result is
    ``(s V cos(t sigma) + U sin(t sigma)) V^T``. The SVD gauge is not undone,
    so the returned basis is one instantiation of the target subspace.
    """
    s, g = _check_pair(s, g)
    if not np.isfinite(t):
        raise DimensionError("step must be finite")
    if check:
        off = float(np.max(np.abs(s.T @ g)))
        if off > TANGENCY_ATOL:
            raise TangencyError(f"direction is not tangent at the basis (|s^T g| = {off:.3e})")
    if t == 0 or np.max(np.abs(g)) < ZERO_TANGENT:
        return s.copy()
    u, sigma, v = thin_svd(g)
    ts = t * sigma
    return (s @ v * np.cos(ts) + u * np.sin(ts)) @ v.T


def qr_retract(s, g, t):
    """Retraction by orthonormalizing the Euclidean step: qf(s + t g)."""
    s, g = _check_pair(s, g)
    return qf(s + t * g)


def orthonormality_error(param):
    """max_i ||S_i^T S_i - I||_inf over the class blocks of ``param``."""
    return max(basis_error(b) for b in param.blocks())


@dataclass
class ProductGrassmannParam:
    """Concatenated class bases ``[S_1 S_2 ... S_C]`` with per-class dimensions."""

    matrix: np.ndarray
    dims: tuple

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        self.dims = tuple(int(k) for k in self.dims)
        if self.matrix.ndim != 2:
            raise DimensionError("parameter matrix must be 2-D")
        if not self.dims or min(self.dims) < 1:
            raise DimensionError("dims must be a nonempty list of positive integers")
        if sum(self.dims) != self.matrix.shape[1]:
            raise DimensionError(f"dims sum to {sum(self.dims)} but matrix has "
                                 f"{self.matrix.shape[1]} columns")
        if max(self.dims) > self.matrix.shape[0]:
            raise DimensionError("a class dimension exceeds the ambient dimension")
        self.offsets = np.concatenate([[0], np.cumsum(self.dims)])

    @classmethod
    def random(cls, n, dims, seed=None):
        """Gaussian fill followed by ``qf`` on every block, drawn in class order."""
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        blocks = [random_subspace(n, k, rng) for k in dims]
        return cls(np.hstack(blocks), dims)

    @classmethod
    def from_blocks(cls, blocks):
        blocks = [np.asarray(b, dtype=np.float64) for b in blocks]
        return cls(np.hstack(blocks), [b.shape[1] for b in blocks])

    @property
    def n(self):
        return self.matrix.shape[0]

    @property
    def num_classes(self):
        return len(self.dims)

    @property
    def uniform_k(self):
        return self.dims[0] if len(set(self.dims)) == 1 else None

    def block_slice(self, i):
        return slice(self.offsets[i], self.offsets[i + 1])

    def block(self, i):
        return self.matrix[:, self.block_slice(i)]

    def blocks(self):
        return [self.block(i) for i in range(self.num_classes)]

    def copy(self):
        return ProductGrassmannParam(self.matrix.copy(), self.dims)


@dataclass
class RsgdState:
    """Geometric parameter plus everything the RSGD iteration carries over.

    ``reorth_period = 0`` disables the periodic ``qf`` re-orthogonalization.
    ``retraction`` is ``"geodesic"`` or ``"qr"``.
    """

    param: ProductGrassmannParam
    lr: float
    momentum: float = 0.0
    reorth_period: int = 5
    retraction: str = "geodesic"
    iter: int = 0
    buffer: np.ndarray = field(default=None)

    def __post_init__(self):
        if not self.lr > 0:
            raise InvalidSpec(f"learning rate must be positive, got {self.lr}")
        if not 0 <= self.momentum < 1:
            raise InvalidSpec(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.reorth_period < 0:
            raise InvalidSpec("reorth_period must be >= 0")
        if self.retraction not in ("geodesic", "qr"):
            raise InvalidSpec(f"unknown retraction {self.retraction!r}")
        if self.buffer is None:
            self.buffer = np.zeros_like(self.param.matrix)
        elif self.buffer.shape != self.param.matrix.shape:
            raise DimensionError("momentum buffer shape differs from the parameter")


def rsgd_step(state, euclid_grad, lr=None):
    """One RSGD-with-momentum iteration applied independently to every class block.

    Descent convention: the point moves along ``-M`` where ``M`` is the
    transported-and-accumulated Riemannian gradient. ``lr`` overrides
    ``state.lr`` for this step (used by learning-rate schedules).
    Mutates and returns ``state``.
    """
    euclid_grad = np.asarray(euclid_grad, dtype=np.float64)
    param = state.param
    if euclid_grad.shape != param.matrix.shape:
        raise DimensionError(f"gradient shape {euclid_grad.shape} differs from parameter "
                             f"{param.matrix.shape}")
    tau = state.lr if lr is None else lr
    it = state.iter + 1
    reorth = state.reorth_period > 0 and it % state.reorth_period == 0
    new_s = np.empty_like(param.matrix)
    new_m = np.empty_like(state.buffer)
    for i in range(param.num_classes):
        sl = param.block_slice(i)
        s = param.matrix[:, sl]
        try:
            g = riemannian_grad(s, euclid_grad[:, sl])
            m = state.momentum * transport_momentum(s, state.buffer[:, sl]) + g
            if state.retraction == "geodesic":
                s_next = geodesic_retract(s, m, -tau, check=False)
                if reorth:
                    s_next = qf(s_next)
            else:
                s_next = qr_retract(s, m, -tau)
        except GcrError as exc:
            raise BlockError(i, exc) from exc
        new_s[:, sl] = s_next
        new_m[:, sl] = m
    param.matrix = new_s
    state.buffer = new_m
    state.iter = it
    return state
