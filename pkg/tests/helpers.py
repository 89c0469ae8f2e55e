"""Independent oracles used by the test suite.

Nothing here calls into the code path it checks: finite differences only
use forward evaluations, and the metric oracles are plain loops.
"""
import math

import numpy as np
from scipy.optimize import minimize


def central_diff(f, x, h=1e-5):
    """Central finite-difference gradient of scalar ``f`` at array ``x``."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f(x)
        x[i] = old - h
        fm = f(x)
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def rel_err(analytic, numeric):
    """Max componentwise error, relative to the largest gradient component."""
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    scale = max(np.max(np.abs(numeric)), 1e-12)
    return float(np.max(np.abs(analytic - numeric)) / scale)


def principal_angles_recursive(a, b, grid=181):
    """Principal angles (degrees) for k <= 2 by direct maximization.

    Unit vectors of each subspace are parametrized by an angle; the first
    pair maximizes s^T r by grid search plus local refinement, the second
    pair is the unit vector in each subspace orthogonal to the first one.
    """
    k = a.shape[1]
    assert k == b.shape[1] and k <= 2

    def unit(basis, phi):
        if basis.shape[1] == 1:
            return basis[:, 0] * (1.0 if math.cos(phi) >= 0 else -1.0)
        return basis @ np.array([math.cos(phi), math.sin(phi)])

    def neg(p):
        return -float(unit(a, p[0]) @ unit(b, p[1]))

    phis = np.linspace(0, 2 * np.pi, grid)
    best = min(((neg((p, q)), p, q) for p in phis for q in phis))
    res = minimize(neg, x0=[best[1], best[2]], method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 5000})
    s1, r1 = unit(a, res.x[0]), unit(b, res.x[1])
    cos1 = min(1.0, -res.fun)
    out = [math.degrees(math.acos(cos1))]
    if k == 2:
        s2 = a @ np.array([-(a.T @ s1)[1], (a.T @ s1)[0]])
        r2 = b @ np.array([-(b.T @ r1)[1], (b.T @ r1)[0]])
        out.append(math.degrees(math.acos(min(1.0, abs(float(s2 @ r2))))))
    return sorted(out)


def variability_loops(features, labels):
    """Literal double-sum intra-class variability on globally centered features."""
    x = np.asarray(features, dtype=np.float64)
    x = x - x.mean(axis=0)
    classes = sorted(set(int(v) for v in labels))
    total = 0.0
    for c in classes:
        f = [x[i] for i in range(len(x)) if labels[i] == c]
        acc = 0.0
        for xj in f:
            for xk in f:
                u, v = xj / np.linalg.norm(xj), xk / np.linalg.norm(xk)
                # Kahan's form stays accurate for nearly parallel vectors
                acc += math.degrees(2 * math.atan2(np.linalg.norm(u - v), np.linalg.norm(u + v)))
        total += acc / len(f) ** 2
    return total / len(classes)


def r2_loops(features, labels):
    """Class separation R^2 from explicit pair loops (all ordered pairs)."""
    x = np.asarray(features, dtype=np.float64)
    u = x / np.linalg.norm(x, axis=1, keepdims=True)
    classes = sorted(set(int(v) for v in labels))
    intra = []
    for c in classes:
        idx = [i for i in range(len(u)) if labels[i] == c]
        d = [1.0 - float(u[i] @ u[j]) for i in idx for j in idx]
        intra.append(sum(d) / len(d))
    overall = [1.0 - float(u[i] @ u[j]) for i in range(len(u)) for j in range(len(u))]
    return 1.0 - (sum(intra) / len(intra)) / (sum(overall) / len(overall))


def mlp_loss_scalar(weights, biases, head_fn, x, y):
    """Straight-line mean cross-entropy: per-sample loops, math.exp/log only."""
    total = 0.0
    for xi, yi in zip(x, y):
        h = [float(v) for v in xi]
        for li, (w, b) in enumerate(zip(weights, biases)):
            nxt = []
            for j in range(w.shape[1]):
                s = float(b[j]) + sum(h[i] * float(w[i, j]) for i in range(len(h)))
                nxt.append(max(s, 0.0) if li < len(weights) - 1 else s)
            h = nxt
        logits = head_fn(np.array(h))
        m = max(logits)
        lse = m + math.log(sum(math.exp(v - m) for v in logits))
        total += lse - logits[int(yi)]
    return total / len(x)


def planted_pair(n, angles_deg, seed):
    """Orthonormal a and b = rotation of a by the given angles in disjoint planes."""
    rng = np.random.default_rng(seed)
    k = len(angles_deg)
    q, _ = np.linalg.qr(rng.standard_normal((n, 2 * k)))
    a = q[:, :k]
    th = np.radians(angles_deg)
    b = a * np.cos(th) + q[:, k:] * np.sin(th)
    return a, b
