"""Dense float64 primitives: gauge-fixed QR Q-factor and thin SVD.

Both functions are pure and return fresh arrays. Gauge conventions:

* ``qf`` returns the Q whose matching R has a nonnegative diagonal.
* ``thin_svd`` makes the first nonzero entry of every column of ``u``
  positive and flips the matching column of ``v``.
"""
import numpy as np
import scipy.linalg

from .errors import ConvergenceError, DimensionError, RankDeficient

RANK_RTOL = 1e-12
SIGMA_CLAMP = 1e-14


def _as_matrix(a):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {a.shape}")
    return a


def qf(a):
    """Q factor of the reduced QR decomposition of ``a`` (n x k, n >= k).

    Raises
    ------
    DimensionError
        If ``a`` is not tall (n < k) or empty.
    RankDeficient
        If the smallest singular value is at most ``1e-12`` times the largest.
    """
    a = _as_matrix(a)
    n, k = a.shape
    if k < 1 or n < k:
        raise DimensionError(f"qf needs n >= k >= 1, got {n}x{k}")
    if not np.all(np.isfinite(a)):
        raise RankDeficient("matrix has non-finite entries")
    q, r = np.linalg.qr(a, mode="reduced")
    # singular values of R equal those of A
    s = np.linalg.svd(r, compute_uv=False)
    if s[0] == 0.0 or s[-1] <= RANK_RTOL * s[0]:
        raise RankDeficient(f"matrix is numerically rank deficient (sigma_min/sigma_max = "
                            f"{s[-1] / s[0] if s[0] else 0.0:.3e})")
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def thin_svd(a):
    """Thin SVD ``a = u @ diag(sigma) @ v.T`` with a fixed sign gauge.

    Returns ``(u, sigma, v)`` with shapes (n, k), (k,), (k, k); ``sigma`` is
    sorted in descending order. Note that ``v`` is returned, not ``v.T``.
    """
    a = _as_matrix(a)
    n, k = a.shape
    if k < 1 or n < k:
        raise DimensionError(f"thin_svd needs n >= k >= 1, got {n}x{k}")
    if not np.all(np.isfinite(a)):
        raise ConvergenceError("matrix has non-finite entries")
    try:
        u, sigma, vt = scipy.linalg.svd(a, full_matrices=False, lapack_driver="gesdd",
                                        check_finite=False)
    except np.linalg.LinAlgError:
        try:
            u, sigma, vt = scipy.linalg.svd(a, full_matrices=False, lapack_driver="gesvd",
                                            check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"SVD did not converge: {exc}") from exc
    v = vt.T
    for j in range(k):
        col = u[:, j]
        nz = np.flatnonzero(col)
        if nz.size and col[nz[0]] < 0:
            u[:, j] = -col
            v[:, j] = -v[:, j]
    return u, sigma, v


def numerical_rank(sigma):
    """Rank after clamping singular values below ``1e-14 * sigma_max`` to zero."""
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.size == 0 or sigma[0] == 0.0:
        return 0
    return int(np.count_nonzero(sigma > SIGMA_CLAMP * sigma[0]))
