"""Problem/result data model and the elementary residual and gradient maps.

Matrices are plain ``numpy`` arrays stored column-major (Fortran order):
the pursuits spend most of their time gathering support-restricted column
blocks ``A[:, S]``, which are contiguous in that layout.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .meanfun import MeanFunctionSpec


class DimensionError(ValueError):
    """Operand shapes are inconsistent."""


def as_matrix(a) -> np.ndarray:
    """Validate ``a`` as a finite 2-D float64 matrix.

    Returns a read-only Fortran-ordered copy so problems can be shared freely.
    """
    if isinstance(a, np.ndarray) and not a.flags.writeable and a.flags.f_contiguous \
            and a.dtype == np.float64 and a.ndim == 2:
        return a
    arr = np.array(a, dtype=np.float64, order="F", copy=True)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"matrix must be non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix contains NaN or Inf entries")
    arr.flags.writeable = False
    return arr


def as_vector(v, length=None, name="vector") -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {arr.shape}")
    if length is not None and arr.shape[0] != length:
        raise DimensionError(f"{name} has length {arr.shape[0]}, expected {length}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return arr


def residual(A, x, y) -> np.ndarray:
    """Return ``y - A @ x``."""
    A = np.asarray(A, dtype=np.float64)
    m, n = A.shape
    x = as_vector(x, n, "x")
    y = as_vector(y, m, "y")
    return y - A @ x


def neg_gradient(A, x, y) -> np.ndarray:
    """Negative gradient of ``||y - Ax||^2 / 2``, i.e. ``A.T @ (y - A @ x)``."""
    A = np.asarray(A, dtype=np.float64)
    return A.T @ residual(A, x, y)


def normalize_columns(Ahat) -> np.ndarray:
    """Scale every column of ``Ahat`` to unit l2 norm.

    Raises ``ValueError`` naming the first zero column.
    """
    Ahat = np.asarray(Ahat, dtype=np.float64)
    if Ahat.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got ndim={Ahat.ndim}")
    norms = np.linalg.norm(Ahat, axis=0)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValueError(f"column {int(zero[0])} is the zero vector")
    out = np.asfortranarray(Ahat / norms)
    # a second pass removes the last ulp of drift so that renormalising is a no-op
    out /= np.linalg.norm(out, axis=0)
    return out


@dataclass(frozen=True)
class RecoveryProblem:
    """Measurements ``y = A x + noise`` with sparsity budget ``k``."""

    A: np.ndarray
    y: np.ndarray
    k: int
    ground_truth: Optional[np.ndarray] = None
    noise: Optional[np.ndarray] = None

    def __post_init__(self):
        A = as_matrix(self.A)
        m, n = A.shape
        y = as_vector(self.y, m, "y")
        if not (1 <= int(self.k) <= n):
            raise ValueError(f"sparsity k={self.k} outside [1, {n}]")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "k", int(self.k))
        if self.ground_truth is not None:
            object.__setattr__(
                self, "ground_truth", as_vector(self.ground_truth, n, "ground_truth")
            )
        if self.noise is not None:
            object.__setattr__(self, "noise", as_vector(self.noise, m, "noise"))
        if self.ground_truth is not None and self.noise is not None:
            recon = A @ self.ground_truth + self.noise
            scale = max(np.linalg.norm(y), np.finfo(float).tiny)
            if np.linalg.norm(recon - y) > 1e-12 * scale:
                raise ValueError("y differs from A @ ground_truth + noise")

    @property
    def shape(self):
        return self.A.shape


class StopReason(str, enum.Enum):
    RESIDUAL_TOL = "residual_tol"
    RELATIVE_CHANGE_TOL = "relative_change_tol"
    MAX_ITERS = "max_iters"
    ZERO_DIRECTION = "zero_direction"
    NO_PROGRESS = "no_progress"


@dataclass
class IterRecord:
    """One pursuit iteration. ``debug`` holds full vectors when requested."""

    p: int
    support: np.ndarray
    residual_norm: float
    q: Optional[int] = None
    wall_time: float = 0.0
    v_size: Optional[int] = None
    qp_iterations: Optional[int] = None
    debug: Optional[dict] = None


@dataclass
class PursuitTrace:
    iterates: list = field(default_factory=list)
    final_x: Optional[np.ndarray] = None
    stop_reason: Optional[StopReason] = None

    @property
    def iterations(self) -> int:
        return len(self.iterates)


@dataclass(frozen=True)
class AlgoConfig:
    """Solver parameters shared by every pursuit.

    ``max_iters=None`` selects the per-algorithm default; ``residual_tol=None``
    means ``1e-10 * ||y||``.  ``rel_change_tol=0`` disables the relative-change
    rule (noiseless runs); set it to ``1e-3`` for noisy data.
    """

    gamma: float = 0.1
    beta: float = 0.4
    mean_function: Optional["MeanFunctionSpec"] = None
    max_iters: Optional[int] = None
    residual_tol: Optional[float] = None
    rel_change_tol: float = 0.0
    qbar: Optional[int] = None
    stomp_threshold: float = 2.5
    rng_seed: int = 0
    debug: bool = False

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError(f"gamma={self.gamma} outside (0, 1]")
        if not (0.0 <= self.beta < 1.0):
            raise ValueError(f"beta={self.beta} outside [0, 1)")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.residual_tol is not None and self.residual_tol < 0:
            raise ValueError("residual_tol must be nonnegative")
        if self.rel_change_tol < 0:
            raise ValueError("rel_change_tol must be nonnegative")
        if self.qbar is not None and self.qbar < 1:
            raise ValueError("qbar must be positive")
        if self.stomp_threshold <= 0:
            raise ValueError("stomp_threshold must be positive")
        if not (0 <= int(self.rng_seed) < 2**64):
            raise ValueError("rng_seed must fit in 64 unsigned bits")
        if self.mean_function is None:
            from .meanfun import MeanFunctionSpec

            object.__setattr__(self, "mean_function", MeanFunctionSpec())
