"""Thresholding operators and support-restricted least squares."""
from __future__ import annotations

import numpy as np
import scipy.linalg

# singular values below this fraction of the largest are treated as zero
LSTSQ_RCOND = 1e-12


def magnitude_order(u) -> np.ndarray:
    """Indices of ``u`` by decreasing magnitude; ties go to the smaller index."""
    u = np.asarray(u, dtype=np.float64)
    # stable sort on -|u| keeps equal magnitudes in index order
    return np.argsort(-np.abs(u), kind="stable")


def top_k_indices(u, k: int) -> np.ndarray:
    """Sorted index set of the ``k`` largest-magnitude entries of ``u``."""
    u = np.asarray(u, dtype=np.float64)
    if k < 0 or k > u.shape[0]:
        raise ValueError(f"k={k} outside [0, {u.shape[0]}]")
    if k == 0:
        return np.empty(0, dtype=np.intp)
    return np.sort(magnitude_order(u)[:k])


def restrict_to_support(u, S) -> np.ndarray:
    """Copy of ``u`` with every entry outside ``S`` set to zero."""
    u = np.asarray(u, dtype=np.float64)
    S = np.asarray(S, dtype=np.intp)
    if S.size and (S.min() < 0 or S.max() >= u.shape[0]):
        raise IndexError(f"support index out of range for length {u.shape[0]}")
    out = np.zeros_like(u)
    out[S] = u[S]
    return out


def hard_threshold(u, k: int) -> np.ndarray:
    """Keep the ``k`` largest-magnitude entries of ``u`` and zero the rest."""
    return restrict_to_support(u, top_k_indices(u, k))


def support(x) -> np.ndarray:
    return np.flatnonzero(np.asarray(x))


def least_squares_on_support(A, y, S) -> np.ndarray:
    """Minimise ``||y - A x||`` over vectors supported on ``S``.

    Uses LAPACK's complete orthogonal factorisation (QR with column
    pivoting, ``gelsy``), so a rank-deficient ``A[:, S]`` yields the
    minimum-norm minimiser instead of an error.
    """
    A = np.asarray(A, dtype=np.float64)
    m, n = A.shape
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (m,):
        raise ValueError(f"y has shape {y.shape}, expected ({m},)")
    S = np.asarray(S, dtype=np.intp)
    x = np.zeros(n)
    if S.size == 0:
        return x
    if S.min() < 0 or S.max() >= n:
        raise IndexError(f"support index out of range for {n} columns")
    sol = scipy.linalg.lstsq(
        A[:, S], y, cond=LSTSQ_RCOND, lapack_driver="gelsy", check_finite=False
    )[0]
    x[S] = sol
    return x
