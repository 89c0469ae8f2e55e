"""Wall-clock micro-benchmark of the two retraction kernels (thin SVD, QR).

Timings depend on the machine and BLAS build; only their relative size
is meaningful.
"""
import time

import numpy as np

from .linalg import qf, thin_svd


def parse_shapes(text):
    """Parse ``"1000x2048x1,10x64x8"`` into ``[(1000, 2048, 1), (10, 64, 8)]``."""
    shapes = []
    for item in text.split(","):
        parts = item.strip().lower().split("x")
        if len(parts) != 3:
            raise ValueError(f"shape {item!r} is not of the form CxNxK")
        c, n, k = (int(p) for p in parts)
        if min(c, n, k) < 1 or k > n:
            raise ValueError(f"shape {item!r} needs positive sizes with k <= n")
        shapes.append((c, n, k))
    return shapes


def _median_ms(fn, mats, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        for m in mats:
            fn(m)
        times.append((time.perf_counter() - t0) * 1e3)
    return float(np.median(times))


def run_benchmark(shapes, repeats=5, seed=0):
    """Median-of-``repeats`` time (ms) for ``C`` thin SVDs and ``C`` QRs per shape."""
    rng = np.random.default_rng(seed)
    rows = []
    for c, n, k in shapes:
        mats = rng.standard_normal((c, n, k))
        rows.append({"C": c, "n": n, "k": k,
                     "svd_ms": _median_ms(thin_svd, mats, repeats),
                     "qr_ms": _median_ms(qf, mats, repeats)})
    return rows
