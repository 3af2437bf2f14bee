"""The weight subproblem of optimal k-thresholding.

Given ``u`` and an index set ``V`` we minimise ``||y - A(u o w)||^2`` over
the capped simplex ``{0 <= w <= 1, sum(w) = k}`` (or ``sum(w) <= k``) with
``w`` supported on ``V``.  With ``M = A[:, V] diag(u[V])`` this is the
convex QP ``w'Hw - 2b'w + y'y`` where ``H = M'M`` and ``b = M'y``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from ._backend import kernels

MAX_ITERS = 10_000
KKT_RTOL = 1e-8
POWER_ITERS = 50
POWER_RTOL = 1e-10
_CHUNK = 25
_BOUND_EPS = 1e-10
_OBJ_SLACK = 1e-13
_SEARCH_STEPS = (1.0, 0.5, 0.25, 0.125)


class SumMode(str, enum.Enum):
    EQUALITY = "equality"
    AT_MOST = "at_most"


class InfeasibleError(ValueError):
    pass


@dataclass(frozen=True)
class CappedSimplexSpec:
    dimension: int
    mass: int
    sum_mode: SumMode = SumMode.EQUALITY

    def __post_init__(self):
        object.__setattr__(self, "sum_mode", SumMode(self.sum_mode))
        if self.mass < 1:
            raise ValueError(f"mass must be a positive integer, got {self.mass}")
        if self.dimension < 0:
            raise ValueError("dimension must be nonnegative")

    @property
    def feasible(self) -> bool:
        return self.sum_mode is SumMode.AT_MOST or self.mass <= self.dimension


@dataclass
class QpSolution:
    w: np.ndarray
    objective: float
    iterations: int
    kkt_residual: float
    converged: bool = True
    support: Optional[np.ndarray] = None
    history: np.ndarray = field(default_factory=lambda: np.empty(0))

    def expand(self, n: int) -> np.ndarray:
        """Full length-``n`` weight vector (zeros off the support)."""
        out = np.zeros(n)
        out[self.support] = self.w
        return out


def project_capped_simplex(v, spec: CappedSimplexSpec) -> np.ndarray:
    """Euclidean projection of ``v`` onto the capped simplex of ``spec``."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (spec.dimension,):
        raise ValueError(f"v has shape {v.shape}, expected ({spec.dimension},)")
    if not spec.feasible:
        raise InfeasibleError(f"mass {spec.mass} exceeds dimension {spec.dimension}")
    return kernels.project_capped_simplex(v, float(spec.mass), spec.sum_mode is SumMode.AT_MOST)[0]


def _largest_eigenvalue(H) -> float:
    d = H.shape[0]
    v = 1.0 + np.linspace(0.0, 1.0, d)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(POWER_ITERS):
        hv = H @ v
        nrm = np.linalg.norm(hv)
        if nrm == 0.0:
            return 0.0
        new = float(v @ hv)
        v = hv / nrm
        if abs(new - lam) <= POWER_RTOL * abs(new):
            lam = new
            break
        lam = new
    # both estimates sit below lambda_max; apg_qp doubles lip if a step fails
    return max(lam, float(nrm))


def _lstsq(a, r):
    return scipy.linalg.lstsq(a, r, lapack_driver="gelsy", check_finite=False)[0]


def _face_step(H, b, w, fixed, sum_active):
    """Smallest step to a minimiser over the free coordinates of ``w``.

    On a rank-deficient face the minimisers form an affine set; the
    minimum-norm step keeps the move short and so blocks less often.
    """
    free = ~fixed
    nf = int(free.sum())
    d = np.zeros_like(w)
    rhs = b[free] - H[free] @ w
    Hff = H[np.ix_(free, free)]
    if sum_active:
        kkt = np.zeros((nf + 1, nf + 1))
        kkt[:nf, :nf] = Hff
        kkt[:nf, nf] = 1.0
        kkt[nf, :nf] = 1.0
        d[free] = _lstsq(kkt, np.append(rhs, 0.0))[:nf]
    else:
        d[free] = _lstsq(Hff, rhs)
    return d


def _face_descent(H, b, w, mass, at_most):
    """Exact minimisation on the current face with a feasible step length.

    Coordinates within ``_BOUND_EPS`` of a bound are held fixed.  Each step
    first tries the projection of the full step toward the face minimiser;
    if that does not decrease the objective it moves along the step as far
    as the box (and, in ``at_most`` mode, the mass budget) allows, which
    fixes one more coordinate.  Yields the objective of accepted iterates.
    """
    f = kernels.qp_objective(H, b, w)
    for _ in range(w.shape[0]):
        fixed = (w <= _BOUND_EPS) | (w >= 1.0 - _BOUND_EPS)
        if fixed.all():
            return
        sum_active = not at_most or w.sum() >= mass - _BOUND_EPS
        d = _face_step(H, b, w, fixed, sum_active)
        if sum_active:
            d[~fixed] -= d[~fixed].mean()  # stay on the hyperplane exactly
        if not np.any(d):
            return
        # projected search first: it can settle many bounds in one step
        for alpha in _SEARCH_STEPS:
            cand = kernels.project_capped_simplex(w + alpha * d, mass, at_most)[0]
            f_cand = kernels.qp_objective(H, b, cand)
            if f_cand < f:
                break
        done = True  # hand back to the gradient steps to re-identify the face
        if f_cand >= f:
            with np.errstate(divide="ignore", invalid="ignore"):
                steps = np.where(d < 0, w / -d, np.where(d > 0, (1.0 - w) / d, np.inf))
            alpha = min(1.0, float(steps.min()))
            if not sum_active and d.sum() > 0:
                alpha = min(alpha, (mass - w.sum()) / d.sum())
            cand = np.clip(w + alpha * d, 0.0, 1.0)
            done = alpha >= 1.0
            f_cand = kernels.qp_objective(H, b, cand)
        # a face minimiser can lose a few ulps against an already optimal
        # iterate; tolerate that rather than stall
        if f_cand > f + _OBJ_SLACK * (1.0 + abs(f)):
            return
        w[:] = cand
        f = f_cand
        yield f
        if done:
            return


def solve_qp(H, b, mass, sum_mode=SumMode.EQUALITY, w0=None, max_iters=MAX_ITERS,
             const=0.0) -> QpSolution:
    """Minimise ``w'Hw - 2b'w + const`` over the capped simplex.

    Rounds of accelerated projected gradient (which settles the active face)
    alternate with exact minimisation on that face.  Hitting ``max_iters``
    returns the best iterate with ``converged=False``.  ``iterations`` counts
    gradient steps plus face steps.
    """
    H = np.ascontiguousarray(H, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    d = b.shape[0]
    sum_mode = SumMode(sum_mode)
    at_most = sum_mode is SumMode.AT_MOST
    spec = CappedSimplexSpec(d, int(mass), sum_mode)
    if not spec.feasible:
        raise InfeasibleError(f"mass {mass} exceeds dimension {d}")
    if w0 is None:
        w = np.full(d, min(1.0, mass / d) if d else 0.0)
    else:
        w = project_capped_simplex(np.asarray(w0, dtype=np.float64), spec)
    w = np.ascontiguousarray(w)

    lip = lip0 = 2.0 * _largest_eigenvalue(H) if d else 0.0
    if lip <= 0.0:
        obj = const + (kernels.qp_objective(H, b, w) if d else 0.0)
        return QpSolution(w, obj, 0, 0.0, True, history=np.empty(0))

    mass = float(mass)
    g0 = 2.0 * (H @ w - b)
    tol = KKT_RTOL * (1.0 + float(np.max(np.abs(g0))))
    history = np.empty(max_iters)
    used = 0
    kkt = kernels.kkt_residual(H, b, w, lip0, mass, at_most)
    while kkt > tol and used < max_iters:
        chunk = min(_CHUNK, max_iters - used)
        it, _, lip = kernels.apg_qp(H, b, w, lip, mass, at_most, chunk, tol, history[used:])
        used += it
        for f in _face_descent(H, b, w, mass, at_most):
            if used == max_iters:
                break
            history[used] = f
            used += 1
        kkt = kernels.kkt_residual(H, b, w, lip0, mass, at_most)
    obj = kernels.qp_objective(H, b, w)
    return QpSolution(
        w=w,
        objective=const + obj,
        iterations=used,
        kkt_residual=float(kkt),
        converged=bool(kkt <= tol),
        history=const + history[:used],
    )


def solve_w_subproblem(A, y, u, V, k, sum_mode=SumMode.EQUALITY, **kwargs) -> QpSolution:
    """Optimal weights ``w`` on ``V`` for ``min ||y - A(u o w)||^2``.

    The returned ``QpSolution.w`` is aligned with ``V``; use ``expand(n)``
    for the full vector.
    """
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    V = np.asarray(V, dtype=np.intp)
    M = A[:, V] * u[V]
    H = M.T @ M
    b = M.T @ y
    sol = solve_qp(H, b, k, sum_mode, const=float(y @ y), **kwargs)
    sol.support = V
    return sol
