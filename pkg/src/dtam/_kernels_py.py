"""NumPy implementations of the hot kernels.

Semantics match ``_kernels.pyx`` exactly; results agree to rounding.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

BACKEND = "python"

_RIC_BATCH = 4096


def project_capped_simplex(v, mass, at_most):
    """Project ``v`` onto {0 <= w <= 1, sum(w) = mass} (or ``<= mass``).

    Returns ``(w, tau)`` with ``w = clip(v - tau, 0, 1)``.
    """
    v = np.asarray(v, dtype=np.float64)
    d = v.shape[0]
    if at_most:
        w = np.clip(v, 0.0, 1.0)
        if w.sum() <= mass:
            return w, 0.0
    if mass >= d:
        return np.ones(d), float(v.min() - 1.0) if d else 0.0
    if mass <= 0:
        return np.zeros(d), float(v.max()) if d else 0.0

    vs = np.sort(v)
    csum = np.concatenate(([0.0], np.cumsum(vs)))
    bp = np.sort(np.concatenate((vs - 1.0, vs)))
    # s(tau) = #{v >= tau + 1} + sum_{tau < v < tau + 1} (v - tau), nonincreasing
    lo = np.searchsorted(vs, bp, side="right")
    hi = np.searchsorted(vs, bp + 1.0, side="left")
    s = (d - hi) + (csum[hi] - csum[lo]) - (hi - lo) * bp
    j = int(np.searchsorted(-s, -mass, side="right")) - 1  # last j with s[j] >= mass
    j = min(max(j, 0), bp.shape[0] - 2)
    drop = s[j] - s[j + 1]
    if drop > 0:
        tau = bp[j] + (s[j] - mass) / drop * (bp[j + 1] - bp[j])
    else:
        tau = bp[j]
    if at_most and tau < 0.0:
        tau = 0.0
    return np.clip(v - tau, 0.0, 1.0), float(tau)


def qp_objective(H, b, w):
    return float(w @ (H @ w) - 2.0 * (b @ w))


def kkt_residual(H, b, w, lip, mass, at_most):
    """Sup-norm of the gradient mapping ``lip * (w - P(w - grad / lip))``."""
    g = 2.0 * (H @ w - b)
    p, _ = project_capped_simplex(w - g / lip, mass, at_most)
    return float(lip * np.max(np.abs(w - p))) if w.shape[0] else 0.0


def apg_qp(H, b, w, lip, mass, at_most, max_iter, tol, history):
    """Monotone accelerated projected gradient on ``w'Hw - 2b'w``.

    ``w`` is updated in place and must be feasible on entry. The objective
    of the accepted iterate is written to ``history[i]``; it never increases.
    Momentum restarts whenever a trial step fails to decrease the objective;
    two material failures in a row (the second a plain gradient step) double
    ``lip``.
    Returns ``(iterations, kkt, lip)``.
    """
    H = np.asarray(H)
    x = w.copy()
    fx = qp_objective(H, b, x)
    yk = x.copy()
    t = 1.0
    restarted = False
    kkt = np.inf
    it = 0
    while it < max_iter:
        g = 2.0 * (H @ yk - b)
        z, _ = project_capped_simplex(yk - g / lip, mass, at_most)
        fz = qp_objective(H, b, z)
        if fz <= fx:
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            yk = z + ((t - 1.0) / t_new) * (z - x)
            x, fx, t = z, fz, t_new
            restarted = False
        else:
            if restarted and fz - fx > 1e-12 * (1.0 + abs(fx)):
                lip *= 2.0
            yk = x.copy()
            t = 1.0
            restarted = True
        history[it] = fx
        it += 1
        if it % 5 == 0 or it == max_iter:
            kkt = kkt_residual(H, b, x, lip, mass, at_most)
            if kkt <= tol:
                break
    w[:] = x
    return it, kkt, lip


def jacobi_eigvalsh(A, tol=1e-13, max_sweeps=60):
    """Eigenvalues (ascending) of one or a batch of symmetric matrices.

    Cyclic Jacobi rotations until the off-diagonal Frobenius norm falls
    below ``tol`` times the matrix Frobenius norm.
    """
    A = np.array(A, dtype=np.float64)
    single = A.ndim == 2
    if single:
        A = A[None]
    k = A.shape[-1]
    scale = np.sqrt(np.sum(A * A, axis=(1, 2)))
    scale[scale == 0.0] = 1.0
    offmask = ~np.eye(k, dtype=bool)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(A[:, offmask] ** 2, axis=1))
        if np.all(off <= tol * scale):
            break
        for p in range(k - 1):
            for q in range(p + 1, k):
                apq = A[:, p, q]
                nz = apq != 0.0
                if not nz.any():
                    continue
                theta = np.where(nz, (A[:, q, q] - A[:, p, p]) / (2.0 * np.where(nz, apq, 1.0)), 0.0)
                t = np.where(theta >= 0.0, 1.0, -1.0) / (np.abs(theta) + np.hypot(theta, 1.0))
                t = np.where(nz, t, 0.0)
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                cp = A[:, :, p].copy()
                cq = A[:, :, q].copy()
                A[:, :, p] = c[:, None] * cp - s[:, None] * cq
                A[:, :, q] = s[:, None] * cp + c[:, None] * cq
                rp = A[:, p, :].copy()
                rq = A[:, q, :].copy()
                A[:, p, :] = c[:, None] * rp - s[:, None] * rq
                A[:, q, :] = s[:, None] * rp + c[:, None] * rq
                A[:, p, q] = 0.0
                A[:, q, p] = 0.0
    ev = np.sort(np.diagonal(A, axis1=1, axis2=2), axis=1)
    return ev[0] if single else ev


def ric_enumerate(G, k):
    """Max over k-subsets S of max(1 - lmin, lmax - 1) for ``G[S, S]``.

    Returns ``(delta, lmin, lmax)`` with the extreme eigenvalues seen.
    """
    G = np.asarray(G, dtype=np.float64)
    n = G.shape[0]
    lmin, lmax = np.inf, -np.inf
    combos = itertools.combinations(range(n), k)
    total = math.comb(n, k)
    done = 0
    while done < total:
        chunk = min(_RIC_BATCH, total - done)
        idx = np.fromiter(
            itertools.chain.from_iterable(itertools.islice(combos, chunk)),
            dtype=np.intp,
            count=chunk * k,
        ).reshape(chunk, k)
        sub = G[idx[:, :, None], idx[:, None, :]]
        ev = jacobi_eigvalsh(sub)
        lmin = min(lmin, float(ev[:, 0].min()))
        lmax = max(lmax, float(ev[:, -1].max()))
        done += chunk
    return max(1.0 - lmin, lmax - 1.0, 0.0), lmin, lmax
