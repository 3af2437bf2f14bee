"""Sparse recovery algorithms: DTAM, PGROTP and the greedy baselines.

Every solver has the signature ``solver(problem, config) -> (x, trace)``,
starts from ``x = 0`` and returns a point with at most ``k`` nonzeros.
"""
from __future__ import annotations

import time

import numpy as np

from .core import AlgoConfig, IterRecord, PursuitTrace, RecoveryProblem, StopReason
from .linalg import (
    hard_threshold,
    least_squares_on_support,
    magnitude_order,
    restrict_to_support,
    top_k_indices,
)
from .meanfun import ZeroDirectionError, select_q
from .qp import SumMode, solve_w_subproblem

DEFAULT_MAX_ITERS = {"dtam": 50, "pgrotp": 50, "sp": 150, "stomp": 50}
RESIDUAL_RTOL = 1e-10


def _residual_tol(problem, config):
    if config.residual_tol is not None:
        return config.residual_tol
    return RESIDUAL_RTOL * float(np.linalg.norm(problem.y))


def _max_iters(name, config):
    return config.max_iters if config.max_iters is not None else DEFAULT_MAX_ITERS[name]


def _rel_change_hit(x_new, x_old, tol):
    if tol <= 0:
        return False
    nrm = np.linalg.norm(x_new)
    return nrm > 0 and np.linalg.norm(x_new - x_old) <= tol * nrm


def _top_k_within(values, V, k):
    """The ``k`` largest-magnitude positions of ``values`` among ``V`` (sorted)."""
    order = magnitude_order(values[V])[:k]
    return np.sort(V[order])


def _finish(trace, x, reason):
    trace.final_x = x
    trace.stop_reason = reason
    return x, trace


def dtam(problem: RecoveryProblem, config: AlgoConfig = None):
    """Dynamic thresholding with memory.

    Each iteration forms the memory direction ``r = A'(y - Ax) + beta r_prev``,
    lets the mean-function rule pick how many of its ``k`` largest entries to
    use, scores the union with the current support by the weight subproblem,
    and finishes with least squares on the ``k`` best indices.
    """
    config = config or AlgoConfig()
    A, y, k = problem.A, problem.y, problem.k
    n = A.shape[1]
    spec = config.mean_function
    tol = _residual_tol(problem, config)
    max_iters = _max_iters("dtam", config)
    trace = PursuitTrace()
    x = np.zeros(n)
    r_prev = np.zeros(n)
    if not np.any(y):
        return _finish(trace, x, StopReason.ZERO_DIRECTION)
    res = y.copy()
    for p in range(max_iters + 1):
        if np.linalg.norm(res) <= tol:
            return _finish(trace, x, StopReason.RESIDUAL_TOL)
        if p == max_iters:
            return _finish(trace, x, StopReason.MAX_ITERS)
        t0 = time.perf_counter()
        r_hat = A.T @ res
        r = r_hat + config.beta * r_prev
        try:
            q, omega_q, omega_k = select_q(r, k, config.gamma, spec)
        except ZeroDirectionError:
            return _finish(trace, x, StopReason.ZERO_DIRECTION)
        u = x + restrict_to_support(r, omega_q)
        V = np.union1d(np.flatnonzero(x), omega_q)
        assert V.size <= 2 * k, (V.size, k)
        qp_iters = None
        w = None
        if V.size <= k:
            S = V
        else:
            sol = solve_w_subproblem(A, y, u, V, k, SumMode.EQUALITY)
            qp_iters = sol.iterations
            w = sol.expand(n)
            S = _top_k_within(u * w, V, k)
        x_new = least_squares_on_support(A, y, S)
        res = y - A @ x_new
        debug = None
        if config.debug:
            debug = dict(r_hat=r_hat, r_accum=r, u=u, w=w, V=V, S=S,
                         Omega_q=omega_q, Omega_k=omega_k, x=x_new)
        trace.iterates.append(IterRecord(
            p=p + 1, support=S, residual_norm=float(np.linalg.norm(res)), q=q,
            wall_time=time.perf_counter() - t0, v_size=int(V.size),
            qp_iterations=qp_iters, debug=debug,
        ))
        stop = _rel_change_hit(x_new, x, config.rel_change_tol)
        x, r_prev = x_new, r
        if stop:
            return _finish(trace, x, StopReason.RELATIVE_CHANGE_TOL)
    raise AssertionError("unreachable")


def pgrotp(problem: RecoveryProblem, config: AlgoConfig = None):
    """Partial gradient relaxed optimal k-thresholding pursuit.

    ``u = x + H_qbar(A'(y - Ax))``; the weight subproblem runs on ``supp(u)``
    with ``sum(w) <= k`` (the remaining coordinates could absorb any leftover
    mass without changing the objective), then least squares on the ``k``
    best entries of ``u o w``.
    """
    config = config or AlgoConfig()
    A, y, k = problem.A, problem.y, problem.k
    n = A.shape[1]
    qbar = config.qbar if config.qbar is not None else k
    if not k <= qbar <= n:
        raise ValueError(f"qbar={qbar} must lie in [k, n] = [{k}, {n}]")
    tol = _residual_tol(problem, config)
    max_iters = _max_iters("pgrotp", config)
    trace = PursuitTrace()
    x = np.zeros(n)
    if not np.any(y):
        return _finish(trace, x, StopReason.ZERO_DIRECTION)
    res = y.copy()
    for p in range(max_iters + 1):
        if np.linalg.norm(res) <= tol:
            return _finish(trace, x, StopReason.RESIDUAL_TOL)
        if p == max_iters:
            return _finish(trace, x, StopReason.MAX_ITERS)
        t0 = time.perf_counter()
        grad = A.T @ res
        step = hard_threshold(grad, qbar)
        if not np.any(step):
            return _finish(trace, x, StopReason.ZERO_DIRECTION)
        u = x + step
        U = np.flatnonzero(u)
        assert n - U.size >= k, "full-dimensional subproblem needs n - |supp(u)| >= k"
        sol = solve_w_subproblem(A, y, u, U, k, SumMode.AT_MOST)
        w = sol.expand(n)
        S = _top_k_within(u * w, U, k)
        x_new = least_squares_on_support(A, y, S)
        res = y - A @ x_new
        debug = None
        if config.debug:
            debug = dict(r_hat=grad, u=u, w=w, V=U, S=S, x=x_new)
        trace.iterates.append(IterRecord(
            p=p + 1, support=S, residual_norm=float(np.linalg.norm(res)),
            wall_time=time.perf_counter() - t0, v_size=int(U.size),
            qp_iterations=sol.iterations, debug=debug,
        ))
        stop = _rel_change_hit(x_new, x, config.rel_change_tol)
        # no memory: an exactly repeated iterate is a fixed point of the map
        stalled = np.array_equal(x_new, x)
        x = x_new
        if stop:
            return _finish(trace, x, StopReason.RELATIVE_CHANGE_TOL)
        if stalled:
            return _finish(trace, x, StopReason.NO_PROGRESS)
    raise AssertionError("unreachable")


def omp(problem: RecoveryProblem, config: AlgoConfig = None):
    """Orthogonal matching pursuit: ``k`` greedy single-index steps.

    An index already in the support is never chosen again, and the loop ends
    early once the residual is below tolerance.
    """
    config = config or AlgoConfig()
    A, y, k = problem.A, problem.y, problem.k
    n = A.shape[1]
    tol = _residual_tol(problem, config)
    trace = PursuitTrace()
    x = np.zeros(n)
    if not np.any(y):
        return _finish(trace, x, StopReason.ZERO_DIRECTION)
    chosen = np.zeros(n, dtype=bool)
    res = y.copy()
    for p in range(k):
        if np.linalg.norm(res) <= tol:
            return _finish(trace, x, StopReason.RESIDUAL_TOL)
        t0 = time.perf_counter()
        c = np.abs(A.T @ res)
        c[chosen] = -1.0
        chosen[int(np.argmax(c))] = True
        S = np.flatnonzero(chosen)
        x = least_squares_on_support(A, y, S)
        res = y - A @ x
        trace.iterates.append(IterRecord(
            p=p + 1, support=S, residual_norm=float(np.linalg.norm(res)),
            wall_time=time.perf_counter() - t0,
            debug=dict(x=x, S=S) if config.debug else None,
        ))
    reason = StopReason.RESIDUAL_TOL if np.linalg.norm(res) <= tol else StopReason.MAX_ITERS
    return _finish(trace, x, reason)


def sp(problem: RecoveryProblem, config: AlgoConfig = None):
    """Subspace pursuit.

    Starting from the empty support: merge the current support with the
    ``k`` largest correlations, solve least squares on the union, keep its
    ``k`` largest entries and re-solve.  The update is rejected, and the
    loop stops, as soon as the residual fails to decrease.
    """
    config = config or AlgoConfig()
    A, y, k = problem.A, problem.y, problem.k
    n = A.shape[1]
    tol = _residual_tol(problem, config)
    max_iters = _max_iters("sp", config)
    trace = PursuitTrace()
    x = np.zeros(n)
    if not np.any(y):
        return _finish(trace, x, StopReason.ZERO_DIRECTION)
    T = np.empty(0, dtype=np.intp)
    res = y.copy()
    res_norm = float(np.linalg.norm(res))
    for p in range(max_iters + 1):
        if res_norm <= tol:
            return _finish(trace, x, StopReason.RESIDUAL_TOL)
        if p == max_iters:
            return _finish(trace, x, StopReason.MAX_ITERS)
        t0 = time.perf_counter()
        C = np.union1d(T, top_k_indices(A.T @ res, k))
        b = least_squares_on_support(A, y, C)
        T_new = _top_k_within(b, C, k)
        x_new = least_squares_on_support(A, y, T_new)
        res_new = y - A @ x_new
        new_norm = float(np.linalg.norm(res_new))
        if new_norm >= res_norm:
            return _finish(trace, x, StopReason.NO_PROGRESS)
        x, T, res, res_norm = x_new, T_new, res_new, new_norm
        trace.iterates.append(IterRecord(
            p=p + 1, support=T, residual_norm=res_norm,
            wall_time=time.perf_counter() - t0, v_size=int(C.size),
            debug=dict(x=x, S=T, V=C) if config.debug else None,
        ))
    raise AssertionError("unreachable")


def stomp(problem: RecoveryProblem, config: AlgoConfig = None):
    """Stagewise OMP with a fixed threshold rule.

    Stage noise level ``sigma = ||r|| / sqrt(m)``; every index outside the
    support with ``|A'r|_i > t_s sigma`` joins it.  When the merged set has
    more than ``k`` indices, least squares on it ranks them and only the
    ``k`` largest coefficients are kept.  Stops when nothing new passes or
    when a stage reproduces the previous iterate exactly.
    """
    config = config or AlgoConfig()
    A, y, k = problem.A, problem.y, problem.k
    m, n = A.shape
    ts = config.stomp_threshold
    tol = _residual_tol(problem, config)
    max_iters = _max_iters("stomp", config)
    trace = PursuitTrace()
    x = np.zeros(n)
    if not np.any(y):
        return _finish(trace, x, StopReason.ZERO_DIRECTION)
    S = np.empty(0, dtype=np.intp)
    res = y.copy()
    for p in range(max_iters + 1):
        res_norm = float(np.linalg.norm(res))
        if res_norm <= tol:
            return _finish(trace, x, StopReason.RESIDUAL_TOL)
        if p == max_iters:
            return _finish(trace, x, StopReason.MAX_ITERS)
        t0 = time.perf_counter()
        c = np.abs(A.T @ res)
        c[S] = 0.0
        passed = np.flatnonzero(c > ts * res_norm / np.sqrt(m))
        if passed.size == 0:
            return _finish(trace, x, StopReason.NO_PROGRESS)
        C = np.union1d(S, passed)
        x_old = x
        x = least_squares_on_support(A, y, C)
        S = C
        if C.size > k:
            S = _top_k_within(x, C, k)
            x = least_squares_on_support(A, y, S)
        res = y - A @ x
        trace.iterates.append(IterRecord(
            p=p + 1, support=S, residual_norm=float(np.linalg.norm(res)),
            wall_time=time.perf_counter() - t0, v_size=int(C.size),
            debug=dict(x=x, S=S, V=C) if config.debug else None,
        ))
        if np.array_equal(x, x_old):  # pruning undid the stage: fixed point
            return _finish(trace, x, StopReason.NO_PROGRESS)
    raise AssertionError("unreachable")


ALGORITHMS = {"dtam": dtam, "pgrotp": pgrotp, "omp": omp, "sp": sp, "stomp": stomp}


def get_algorithm(name: str):
    try:
        return ALGORITHMS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown algorithm {name!r}; choose from {sorted(ALGORITHMS)}") from None


def run(name: str, problem: RecoveryProblem, config: AlgoConfig = None):
    return get_algorithm(name)(problem, config)
