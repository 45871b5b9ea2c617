"""Dense real-matrix kernels.

Matrices are plain 2-D ``numpy.ndarray`` objects. Every kernel copies or
reads its input; caller data is never modified in place.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import lapack

from .errors import DimensionError, SingularityError

# Pivots below this multiple of the largest pivot are treated as zero.
_SINGULAR_RTOL = 1e3 * np.finfo(float).eps


def as_matrix(m, *, square: bool = False) -> np.ndarray:
    """Validate ``m`` as a finite 2-D float matrix and return a float copy."""
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise DimensionError(f"expected a non-empty 2-D matrix, got shape {a.shape}")
    if square and a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def _factor(a: np.ndarray):
    lu, piv, info = lapack.dgetrf(a)
    if info < 0:
        raise ValueError("invalid argument to LU factorization")
    diag = np.diag(lu)
    absdiag = np.abs(diag)
    scale = max(absdiag.max(), np.finfo(float).tiny)
    if info > 0 or absdiag.min() <= _SINGULAR_RTOL * scale * a.shape[0]:
        raise SingularityError("matrix is numerically singular")
    # each row interchange flips the sign
    swaps = np.count_nonzero(piv != np.arange(a.shape[0]))
    sign = -1.0 if (swaps + np.count_nonzero(diag < 0)) % 2 else 1.0
    return lu, piv, sign, float(np.sum(np.log(absdiag)))


def slogdet_inv(m):
    """One pivoted LU factorization giving ``(sign, log|det|, inverse)``.

    Raises :class:`SingularityError` when a pivot is numerically zero.
    """
    a = as_matrix(m, square=True)
    lu, piv, sign, logabs = _factor(a)
    inv, info = lapack.dgetri(lu, piv)
    if info != 0:
        raise SingularityError("matrix is numerically singular")
    return sign, logabs, inv


def log_det(m) -> float:
    """Log-determinant of a square matrix with positive determinant.

    The sign is tracked through the pivoted LU factors.

    Raises
    ------
    SingularityError
        If the determinant is non-positive or numerically zero.
    """
    _, _, sign, logabs = _factor(as_matrix(m, square=True))
    if sign <= 0:
        raise SingularityError("determinant is negative")
    return logabs


def inverse_transpose(m) -> np.ndarray:
    """Return ``inv(m).T``."""
    return slogdet_inv(m)[2].T


def spectral_radius_nonneg(m, *, tol: float = 1e-8, max_iter: int = 20000,
                           eps: float = 1e-12) -> float:
    """Perron root of an entrywise non-negative matrix by power iteration.

    Nilpotent inputs are detected exactly (the iterate from the all-ones
    vector vanishes within ``d`` products) and return 0. Otherwise the
    iteration runs on ``I + m + eps * ones ones^T``, which is positive and
    aperiodic, and stops once the Collatz-Wielandt bounds agree to ``tol``
    relative to the estimate.
    """
    a = as_matrix(m, square=True)
    if np.any(a < 0):
        raise ValueError("spectral_radius_nonneg requires a non-negative matrix")
    d = a.shape[0]

    x = np.ones(d)
    for _ in range(d):
        x = a @ x
        if not np.any(x):
            return 0.0
        x /= x.max()

    b = a + eps + np.eye(d)
    x = np.ones(d)
    lo = hi = 0.0
    for _ in range(max_iter):
        y = b @ x
        ratios = y / x
        lo, hi = ratios.min(), ratios.max()
        rho = 0.5 * (lo + hi) - 1.0
        if hi - lo <= tol * max(rho, tol):
            break
        x = y / y.max()
    return max(0.5 * (lo + hi) - 1.0, 0.0)


def matrix_exponential(m) -> np.ndarray:
    """Matrix exponential by scaling and squaring around a Taylor core.

    The matrix is scaled by ``2**-k`` until its 1-norm is at most 1/2, the
    series is summed until terms stop contributing (exactly zero terms end
    it early, so nilpotent inputs are summed exactly), and the result is
    squared ``k`` times.
    """
    a = as_matrix(m, square=True)
    d = a.shape[0]
    norm = np.abs(a).sum(axis=0).max()
    k = 0
    if norm > 0.5:
        k = int(np.ceil(np.log2(norm / 0.5)))
    a = a / 2.0 ** k

    result = np.eye(d)
    term = np.eye(d)
    with np.errstate(over="raise", invalid="raise"):
        try:
            for j in range(1, 40):
                term = term @ a / j
                if not np.any(term):
                    break
                result = result + term
                if np.abs(term).max() <= np.finfo(float).eps * np.abs(result).max() * 1e-2:
                    break
            for _ in range(k):
                result = result @ result
        except FloatingPointError as exc:
            raise OverflowError("matrix exponential overflowed") from exc
    if not np.all(np.isfinite(result)):
        raise OverflowError("matrix exponential overflowed")
    return result
