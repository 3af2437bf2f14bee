"""Time the compiled kernels against the NumPy fallback.

Usage: ``python3 benchmarks/bench_kernels.py [--repeat N]``.  Each kernel
runs on identical inputs under both backends; the table reports the best
wall time per call and the speed-up.  Results are also cross-checked.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from dtam._backend import available_backends


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _qp_data(rng, d, m):
    M = rng.standard_normal((m, d))
    y = rng.standard_normal(m)
    H = np.ascontiguousarray(M.T @ M)
    b = M.T @ y
    lip = 2.0 * float(np.linalg.eigvalsh(H)[-1])
    return H, b, lip


def cases(rng):
    v = rng.standard_normal(40) * 2
    H, b, lip = _qp_data(rng, 20, 60)
    A = rng.standard_normal((8, 14))
    A /= np.linalg.norm(A, axis=0)
    G = A.T @ A

    def proj(kern):
        return lambda: kern.project_capped_simplex(v, 10.0, False)[0]

    def apg(kern):
        def run():
            w = np.full(20, 0.5)
            hist = np.empty(2000)
            kern.apg_qp(H, b, w, lip, 10.0, False, 2000, 1e-9, hist)
            return w
        return run

    def ric(kern):
        return lambda: np.array(kern.ric_enumerate(G, 4)[:1])

    # (label, factory, agreement tolerance); APG stops at a KKT tolerance, so
    # the two backends may halt on slightly different iterates
    return [
        ("project_capped_simplex d=40", proj, 1e-12),
        ("apg_qp d=20 (2000 iters max)", apg, 1e-6),
        ("ric_enumerate n=14 k=4", ric, 1e-12),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the NumPy backend is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<32}" + "".join(f"{name:>12}" for name in backends) + f"{'speed-up':>10}")
    for label, make, atol in cases(rng):
        times = {}
        outs = {}
        for name, kern in backends.items():
            times[name], outs[name] = _best(make(kern), args.repeat)
        ratio = times["python"] / times["cython"] if "cython" in times else float("nan")
        row = f"{label:<32}" + "".join(f"{times[n] * 1e3:>10.3f}ms" for n in backends)
        print(row + f"{ratio:>9.1f}x")
        if "cython" in outs:
            gap = float(np.max(np.abs(outs["python"] - outs["cython"])))
            if gap > atol:
                print(f"  warning: backends differ by {gap:.2e}")


if __name__ == "__main__":
    main()
