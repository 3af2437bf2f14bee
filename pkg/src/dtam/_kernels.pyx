# cython: language_level=3
"""Compiled hot kernels: capped-simplex projection, the accelerated projected
gradient QP loop, and Jacobi eigenvalues for brute-force RIC enumeration.

Pure-NumPy twins live in ``_kernels_py``; both must agree to rounding.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, hypot
from libc.stdlib cimport malloc, free, qsort

cnp.import_array()

BACKEND = "cython"


cdef int _cmp_double(const void* a, const void* b) noexcept nogil:
    cdef double x = (<const double*>a)[0]
    cdef double y = (<const double*>b)[0]
    if x < y:
        return -1
    if x > y:
        return 1
    return 0


cdef inline double _clip01(double x) noexcept nogil:
    if x < 0.0:
        return 0.0
    if x > 1.0:
        return 1.0
    return x


cdef double _project(const double* v, Py_ssize_t d, double mass, bint at_most,
                     double* out, double* scratch) noexcept nogil:
    """Write the projection of v into out; return tau. scratch holds d doubles."""
    cdef Py_ssize_t i, ia, ib
    cdef double s, tot, tau, vmin, vmax, nxt, s_next
    cdef int cnt
    if d == 0:
        return 0.0
    if at_most:
        tot = 0.0
        for i in range(d):
            out[i] = _clip01(v[i])
            tot += out[i]
        if tot <= mass:
            return 0.0
    if mass >= d:
        vmin = v[0]
        for i in range(d):
            out[i] = 1.0
            if v[i] < vmin:
                vmin = v[i]
        return vmin - 1.0
    if mass <= 0:
        vmax = v[0]
        for i in range(d):
            out[i] = 0.0
            if v[i] > vmax:
                vmax = v[i]
        return vmax

    for i in range(d):
        scratch[i] = v[i]
    qsort(scratch, d, sizeof(double), _cmp_double)
    # walk the merged breakpoints {v_i - 1} (enter linear part) and {v_i} (leave)
    tau = scratch[0] - 1.0
    s = <double>d
    cnt = 0
    ia = 0
    ib = 0
    while ib < d:
        if ia < d and scratch[ia] - 1.0 <= scratch[ib]:
            nxt = scratch[ia] - 1.0
            s_next = s - cnt * (nxt - tau)
            if s_next <= mass and cnt > 0:
                break
            tau = nxt
            s = s_next
            cnt += 1
            ia += 1
        else:
            nxt = scratch[ib]
            s_next = s - cnt * (nxt - tau)
            if s_next <= mass and cnt > 0:
                break
            tau = nxt
            s = s_next
            cnt -= 1
            ib += 1
    if cnt > 0:
        tau = tau + (s - mass) / cnt
    if at_most and tau < 0.0:
        tau = 0.0
    for i in range(d):
        out[i] = _clip01(v[i] - tau)
    return tau


def project_capped_simplex(v, double mass, bint at_most):
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef Py_ssize_t d = vv.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] out = np.empty(d)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] scratch = np.empty(max(d, 1))
    cdef double tau = _project(&vv[0] if d else NULL, d, mass, at_most, &out[0] if d else NULL, &scratch[0])
    return out, float(tau)


cdef inline void _matvec(const double* H, const double* x, double* out, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(d):
        acc = 0.0
        for j in range(d):
            acc += H[i * d + j] * x[j]
        out[i] = acc


cdef double _objective(const double* H, const double* b, const double* w,
                       double* tmp, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t i
    cdef double acc = 0.0
    _matvec(H, w, tmp, d)
    for i in range(d):
        acc += w[i] * tmp[i] - 2.0 * b[i] * w[i]
    return acc


cdef double _kkt(const double* H, const double* b, const double* w, double lip,
                 double mass, bint at_most, double* g, double* p, double* scratch,
                 Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t i
    cdef double r = 0.0, a
    _matvec(H, w, g, d)
    for i in range(d):
        g[i] = w[i] - 2.0 * (g[i] - b[i]) / lip
    _project(g, d, mass, at_most, p, scratch)
    for i in range(d):
        a = fabs(w[i] - p[i])
        if a > r:
            r = a
    return lip * r


def kkt_residual(H, b, w, double lip, double mass, bint at_most):
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] HH = np.ascontiguousarray(H, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] bb = np.ascontiguousarray(b, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] ww = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t d = ww.shape[0]
    if d == 0:
        return 0.0
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] work = np.empty(3 * d)
    return _kkt(&HH[0, 0], &bb[0], &ww[0], lip, mass, at_most,
                &work[0], &work[d], &work[2 * d], d)


def qp_objective(H, b, w):
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] HH = np.ascontiguousarray(H, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] bb = np.ascontiguousarray(b, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] ww = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t d = ww.shape[0]
    if d == 0:
        return 0.0
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] tmp = np.empty(d)
    return _objective(&HH[0, 0], &bb[0], &ww[0], &tmp[0], d)


def apg_qp(H, b, cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] w, double lip,
           double mass, bint at_most, int max_iter, double tol,
           cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] history):
    """See ``_kernels_py.apg_qp``; ``w`` is updated in place."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] HH = np.ascontiguousarray(H, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] bb = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t d = w.shape[0]
    cdef Py_ssize_t i
    if d == 0:
        return 0, 0.0, lip
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] work = np.empty(7 * d)
    cdef double* Hp = &HH[0, 0]
    cdef double* bp = &bb[0]
    cdef double* x = &w[0]
    cdef double* yk = &work[0]
    cdef double* z = &work[d]
    cdef double* g = &work[2 * d]
    cdef double* scratch = &work[3 * d]
    cdef double* t1 = &work[4 * d]
    cdef double* t2 = &work[5 * d]
    cdef double* t3 = &work[6 * d]
    cdef double* hist = &history[0]
    cdef double fx, fz, t = 1.0, t_new, mom
    cdef double kkt = 1e308
    cdef bint restarted = False
    cdef int it = 0
    with nogil:
        fx = _objective(Hp, bp, x, g, d)
        for i in range(d):
            yk[i] = x[i]
        while it < max_iter:
            _matvec(Hp, yk, g, d)
            for i in range(d):
                g[i] = yk[i] - 2.0 * (g[i] - bp[i]) / lip
            _project(g, d, mass, at_most, z, scratch)
            fz = _objective(Hp, bp, z, g, d)
            if fz <= fx:
                t_new = 0.5 * (1.0 + sqrt(1.0 + 4.0 * t * t))
                mom = (t - 1.0) / t_new
                for i in range(d):
                    yk[i] = z[i] + mom * (z[i] - x[i])
                    x[i] = z[i]
                fx = fz
                t = t_new
                restarted = False
            else:
                if restarted and fz - fx > 1e-12 * (1.0 + fabs(fx)):
                    lip *= 2.0
                for i in range(d):
                    yk[i] = x[i]
                t = 1.0
                restarted = True
            hist[it] = fx
            it += 1
            if it % 5 == 0 or it == max_iter:
                kkt = _kkt(Hp, bp, x, lip, mass, at_most, t1, t2, t3, d)
                if kkt <= tol:
                    break
    return it, float(kkt), float(lip)


cdef void _jacobi(double* A, Py_ssize_t k, double tol, int max_sweeps) noexcept nogil:
    """In-place cyclic Jacobi on a row-major k x k symmetric matrix."""
    cdef Py_ssize_t p, q, r
    cdef int sweep
    cdef double off, scale, apq, theta, t, c, s, ap, aq
    scale = 0.0
    for p in range(k * k):
        scale += A[p] * A[p]
    scale = sqrt(scale)
    if scale == 0.0:
        scale = 1.0
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(k):
            for q in range(k):
                if p != q:
                    off += A[p * k + q] * A[p * k + q]
        if sqrt(off) <= tol * scale:
            return
        for p in range(k - 1):
            for q in range(p + 1, k):
                apq = A[p * k + q]
                if apq == 0.0:
                    continue
                theta = (A[q * k + q] - A[p * k + p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + hypot(theta, 1.0))
                else:
                    t = -1.0 / (-theta + hypot(theta, 1.0))
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                for r in range(k):
                    ap = A[r * k + p]
                    aq = A[r * k + q]
                    A[r * k + p] = c * ap - s * aq
                    A[r * k + q] = s * ap + c * aq
                for r in range(k):
                    ap = A[p * k + r]
                    aq = A[q * k + r]
                    A[p * k + r] = c * ap - s * aq
                    A[q * k + r] = s * ap + c * aq
                A[p * k + q] = 0.0
                A[q * k + p] = 0.0


def jacobi_eigvalsh(A, double tol=1e-13, int max_sweeps=60):
    arr = np.array(A, dtype=np.float64)
    if arr.ndim == 3:
        return np.stack([jacobi_eigvalsh(a, tol, max_sweeps) for a in arr]) if arr.shape[0] else np.empty((0, arr.shape[-1]))
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] M = np.ascontiguousarray(arr)
    cdef Py_ssize_t k = M.shape[0]
    if k == 0:
        return np.empty(0)
    _jacobi(&M[0, 0], k, tol, max_sweeps)
    return np.sort(np.diagonal(M).copy())


def ric_enumerate(G, Py_ssize_t k):
    """See ``_kernels_py.ric_enumerate``."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] GG = np.ascontiguousarray(G, dtype=np.float64)
    cdef Py_ssize_t n = GG.shape[0]
    cdef Py_ssize_t i, j, pos
    cdef double lmin = 1e308, lmax = -1e308, e
    if k <= 0 or k > n:
        raise ValueError("k outside [1, n]")
    cdef Py_ssize_t* comb = <Py_ssize_t*>malloc(k * sizeof(Py_ssize_t))
    cdef double* sub = <double*>malloc(k * k * sizeof(double))
    cdef double* Gp = &GG[0, 0]
    if comb == NULL or sub == NULL:
        free(comb)
        free(sub)
        raise MemoryError()
    try:
        with nogil:
            for i in range(k):
                comb[i] = i
            while True:
                for i in range(k):
                    for j in range(k):
                        sub[i * k + j] = Gp[comb[i] * n + comb[j]]
                _jacobi(sub, k, 1e-13, 60)
                for i in range(k):
                    e = sub[i * k + i]
                    if e < lmin:
                        lmin = e
                    if e > lmax:
                        lmax = e
                # next combination in lexicographic order
                pos = k - 1
                while pos >= 0 and comb[pos] == n - k + pos:
                    pos -= 1
                if pos < 0:
                    break
                comb[pos] += 1
                for i in range(pos + 1, k):
                    comb[i] = comb[i - 1] + 1
    finally:
        free(comb)
        free(sub)
    return max(1.0 - lmin, lmax - 1.0, 0.0), float(lmin), float(lmax)
