"""Acceptance criteria 1-10, each at its stated tolerance.

Every test records one PASS/FAIL line (shown in the terminal summary).
"""
import math
import time

import numpy as np
import pytest

from dtam import theory
from dtam._backend import kernels
from dtam.cli import main
from dtam.core import AlgoConfig, RecoveryProblem, normalize_columns
from dtam.experiments import ExperimentConfig, gen_instance, phase_transition, signal_demo
from dtam.linalg import hard_threshold, least_squares_on_support
from dtam.meanfun import MeanFunctionSpec, g_gamma
from dtam.pursuit import dtam
from dtam.qp import SumMode, solve_w_subproblem
from dtam.transforms import WaveletSpec, dwt, idwt
from oracles import qp_active_set_oracle, random_orthonormal

L2 = MeanFunctionSpec("lp_norm", l=2.0)

CRIT7 = dict(n=400, m=100, k_grid=tuple(range(10, 81, 10)), trials=50, omit_timing=True)


# ---------------------------------------------------------------- criterion 1

def test_c1_delta_star(verdict, capsys):
    t0 = time.perf_counter()
    rc = main(["theory"])
    elapsed = time.perf_counter() - t0
    rows = dict(line.split(None, 1) for line in capsys.readouterr().out.splitlines())
    d = float(rows["delta_star"])
    ok = (rc == 0 and 0.270 <= d <= 0.274 and abs(theory.eval_G_hat(theory.find_delta_star())) <= 1e-12
          and abs(float(rows["G_hat(delta_star)"])) <= 1e-12 and elapsed < 1.0)
    verdict(1, ok, f"delta*={d:.6f}, {elapsed:.2f}s")


# ---------------------------------------------------------------- criterion 2

def test_c2_l2_g_gamma(verdict):
    got = {(gamma, k): g_gamma(L2, gamma, k).g for gamma in (0.1, 0.5, 1.0) for k in (1, 5, 20)}
    ok = all(g == gamma for (gamma, _), g in got.items())
    verdict(2, ok, ", ".join(f"g({gm})={g}" for (gm, k), g in got.items() if k == 5) + " for k in 1, 5, 20")


# ---------------------------------------------------------------- criterion 3

def _projection_kkt(v, mass):
    w, tau = kernels.project_capped_simplex(v, float(mass), False)
    return max(abs(w.sum() - mass), np.max(np.abs(w - np.clip(v - tau, 0.0, 1.0))))


def test_c3_qp_oracle(verdict):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst_gap = worst_kkt = 0.0
    for i in range(200):
        d = int(rng.integers(2, 7))
        k = int(rng.integers(1, min(3, d) + 1))
        mode = SumMode.AT_MOST if i % 2 else SumMode.EQUALITY
        if mode is SumMode.EQUALITY and k == d:
            k = d - 1
        m = int(rng.integers(d, 12))
        A = rng.standard_normal((m, d + 3))
        y = rng.standard_normal(m)
        u = rng.standard_normal(d + 3)
        V = np.sort(rng.choice(d + 3, d, replace=False))
        sol = solve_w_subproblem(A, y, u, V, k, mode)
        M = A[:, V] * u[V]
        ref, _ = qp_active_set_oracle(M.T @ M, M.T @ y, k, mode is SumMode.AT_MOST)
        worst_gap = max(worst_gap, abs(sol.objective - (y @ y + ref)))
        worst_kkt = max(worst_kkt, _projection_kkt(rng.standard_normal(d) * 3, k))
    elapsed = time.perf_counter() - t0
    ok = worst_gap <= 1e-6 and worst_kkt <= 1e-10 and elapsed < 30
    verdict(3, ok, f"max gap {worst_gap:.2e}, projection KKT {worst_kkt:.2e}, {elapsed:.1f}s")


# ---------------------------------------------------------------- criterion 4

def test_c4_ric(verdict):
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    ortho = max(theory.ric_bruteforce(random_orthonormal(rng, 10, 7), k) for k in (1, 2, 3, 4))
    u = rng.standard_normal(5)
    u /= np.linalg.norm(u)
    w = rng.standard_normal((5, 3))
    D = np.column_stack([u, u, w / np.linalg.norm(w, axis=0)])
    dup = theory.ric_bruteforce(D, 2)
    monotone = sandwich = True
    for _ in range(50):
        A = rng.standard_normal((6, 10)) / math.sqrt(6)
        deltas = [theory.ric_bruteforce(A, k) for k in range(1, 7)]
        monotone &= all(a <= b for a, b in zip(deltas, deltas[1:]))
        for _ in range(1000):
            k = int(rng.integers(1, 7))
            x = np.zeros(10)
            x[rng.choice(10, k, replace=False)] = rng.standard_normal(k)
            e, dk = x @ x, deltas[k - 1]
            ax = np.linalg.norm(A @ x) ** 2
            sandwich &= (1 - dk) * e * (1 - 1e-12) <= ax <= (1 + dk) * e * (1 + 1e-12)
    elapsed = time.perf_counter() - t0
    ok = ortho <= 1e-12 and abs(dup - 1) <= 1e-12 and monotone and sandwich and elapsed < 60
    verdict(4, ok, f"orthonormal {ortho:.1e}, duplicate {dup:.15f}, monotone={monotone}, "
                   f"sandwich={sandwich}, {elapsed:.1f}s")


# ---------------------------------------------------------------- criterion 5

def _small_matrix(rng, m, n):
    if rng.uniform() < 0.5:
        return normalize_columns(random_orthonormal(rng, max(m, n), n)[:m] + 0.1 * rng.standard_normal((m, n)))
    return rng.standard_normal((m, n)) / math.sqrt(m)


def test_c5_inequality_oracles(verdict):
    rng = np.random.default_rng(5)
    viol = {"gram-deviation": 0, "adjoint": 0, "restricted-ls": 0, "thresholding": 0}
    # near-isometry: ||((I - A'A)u)_W|| <= delta_s ||u|| if |W u supp u| <= s;
    #            ||(A'v)_W|| <= sqrt(1 + delta_s) ||v|| if |W| <= s
    for _ in range(500):
        n = int(rng.integers(3, 11))
        m = int(rng.integers(2, n + 1))
        A = _small_matrix(rng, m, n)
        s = int(rng.integers(1, min(m, 4) + 1))
        ds = theory.ric_bruteforce(A, s)
        T = rng.choice(n, s, replace=False)
        u = np.zeros(n)
        su = int(rng.integers(1, s + 1))
        u[T[:su]] = rng.standard_normal(su)
        W = T[rng.permutation(s)[: int(rng.integers(1, s + 1))]]
        lhs = np.linalg.norm((u - A.T @ (A @ u))[W])
        viol["gram-deviation"] += lhs > ds * np.linalg.norm(u) * (1 + 1e-12) + 1e-15
        v = rng.standard_normal(m)
        W2 = rng.choice(n, s, replace=False)
        viol["adjoint"] += np.linalg.norm((A.T @ v)[W2]) > math.sqrt(1 + ds) * np.linalg.norm(v) * (1 + 1e-12)
    # restricted least squares: u* = LS on Omega (|Omega| <= k), y = A x_S + nu'
    done = 0
    while done < 500:
        n = int(rng.integers(4, 13))
        m = int(rng.integers(4, n + 1))
        k = int(rng.integers(1, min(3, m // 2) + 1))
        A = _small_matrix(rng, m, n)
        dk, d2k = theory.ric_bruteforce(A, k), theory.ric_bruteforce(A, 2 * k)
        if d2k >= 1:
            continue
        done += 1
        xs = np.zeros(n)
        xs[rng.choice(n, k, replace=False)] = rng.standard_normal(k)
        nu = rng.standard_normal(m) * rng.choice([0.0, 0.01, 0.3])
        omega = np.sort(rng.choice(n, int(rng.integers(1, k + 1)), replace=False))
        ustar = least_squares_on_support(A, A @ xs + nu, omega)
        off = np.setdiff1d(np.arange(n), omega)
        bound = (np.linalg.norm(xs[off]) / math.sqrt(1 - d2k * d2k)
                 + math.sqrt(1 + dk) / (1 - d2k) * np.linalg.norm(nu))
        viol["restricted-ls"] += np.linalg.norm(ustar - xs) > bound * (1 + 1e-12) + 1e-14
    # hard thresholding: ||h - H_k(u)|| <= ||(u-h)_{S u S*}|| + ||(u-h)_{S* \ S}||
    for _ in range(500):
        n = int(rng.integers(2, 13))
        k = int(rng.integers(1, n + 1))
        h = np.zeros(n)
        h[rng.choice(n, k, replace=False)] = rng.standard_normal(k)
        u = h + rng.standard_normal(n) * rng.uniform(0.01, 3)
        Hu = hard_threshold(u, k)
        S, Ss = set(np.flatnonzero(h)), set(np.flatnonzero(Hu))
        dlt = u - h
        rhs = np.linalg.norm(dlt[sorted(S | Ss)]) + np.linalg.norm(dlt[sorted(Ss - S)])
        viol["thresholding"] += np.linalg.norm(h - Hu) > rhs * (1 + 1e-12)
    verdict(5, sum(viol.values()) == 0, ", ".join(f"{k}: {v} violations" for k, v in viol.items()))


# ---------------------------------------------------------------- criterion 6

C6_SPECS = [MeanFunctionSpec(), L2, MeanFunctionSpec("power", l=2.0), MeanFunctionSpec("delta11", l=2.0)]


def test_c6_dtam_invariants(verdict):
    bad = {"sparsity": 0, "gradient": 0, "V": 0, "beta0": 0, "recursion": 0, "energy-fraction": 0}
    g_cache = {}
    for s in range(100):
        k = 5 + s % 16
        p = gen_instance(200, 70, k, seed=10_000 + s)
        beta = 0.0 if s % 4 == 0 else (0.4, 0.7, 0.2)[s % 3]
        gamma = (0.1, 0.5, 1.0)[s % 3]
        spec = C6_SPECS[s % len(C6_SPECS)]
        cfg = AlgoConfig(gamma=gamma, beta=beta, mean_function=spec, debug=True)
        _, trace = dtam(p, cfg)
        key = (spec, gamma, k)
        if key not in g_cache:
            g_cache[key] = g_gamma(spec, gamma, k).g
        g = g_cache[key]
        scale = max(1.0, np.max(np.abs(p.A.T @ p.y)))
        r_hats = []
        for rec in trace.iterates:
            dbg = rec.debug
            x, S = dbg["x"], dbg["S"]
            bad["sparsity"] += np.count_nonzero(x) > k
            grad = p.A.T @ (p.y - p.A @ x)
            bad["gradient"] += np.max(np.abs(grad[S]), initial=0.0) > 1e-8 * scale
            bad["V"] += dbg["V"].size > 2 * k
            r_hats.append(dbg["r_hat"])
            r = dbg["r_accum"]
            if beta == 0.0:
                bad["beta0"] += np.max(np.abs(r - dbg["r_hat"])) > 1e-12 * max(1.0, np.max(np.abs(r)))
            explicit = sum(beta ** (len(r_hats) - 1 - j) * rh for j, rh in enumerate(r_hats))
            bad["recursion"] += np.linalg.norm(r - explicit) > 1e-12 * np.linalg.norm(explicit)
            lhs = np.linalg.norm(r[dbg["Omega_q"]])
            bad["energy-fraction"] += lhs < g * np.linalg.norm(r[dbg["Omega_k"]])
    verdict(6, sum(bad.values()) == 0, ", ".join(f"{k}: {v}" for k, v in bad.items()))


# ---------------------------------------------------------------- criterion 7

@pytest.fixture(scope="session")
def crit7_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("crit7") / "phase.csv"
    t0 = time.perf_counter()
    rows, aggs = phase_transition(ExperimentConfig(output_path=str(out), **CRIT7))
    return out, aggs, time.perf_counter() - t0


def test_c7_phase_transition(verdict, crit7_run):
    _, aggs, elapsed = crit7_run
    freq = {(a, k): f for a, k, _, f, _ in aggs}
    easy = {a: freq[(a, 10)] for a in ("dtam", "pgrotp", "sp", "omp")}
    hard = {a: freq[(a, 80)] for a in ("dtam", "pgrotp", "omp", "sp", "stomp")}
    curve = [freq[("dtam", k)] for k in CRIT7["k_grid"]]
    rises = max(b - a for a, b in zip(curve, curve[1:]))
    ok = (all(f >= 0.95 for f in easy.values()) and all(f <= 0.5 for f in hard.values())
          and rises <= 0.1 and elapsed < 15 * 60)
    verdict(7, ok, f"k=10 {easy}, k=80 {hard}, DTAM curve {curve}, {elapsed:.0f}s")


# ---------------------------------------------------------------- criterion 8

def _near_orthonormal(rng, n, eps):
    return normalize_columns(random_orthonormal(rng, n, n) + eps * rng.standard_normal((n, n)))


def test_c8_error_bound(verdict):
    rng = np.random.default_rng(8)
    g = g_gamma(L2, 1.0, 2).g
    violations = checked = instances = 0
    worst = 0.0
    while instances < 20:
        n, k = int(rng.integers(9, 13)), 2
        A = _near_orthonormal(rng, n, rng.uniform(0.005, 0.03))
        dk, d2, d3 = theory.ric_triple(A, k)
        if d3 >= theory.find_delta_gamma(g):
            continue
        beta = 0.5 * theory.constants_bundle(dk, d2, d3, g, 0.0).beta_max
        const = theory.constants_bundle(dk, d2, d3, g, beta)
        assert const.valid
        instances += 1
        x = np.zeros(n)
        x[rng.choice(n, k, replace=False)] = rng.standard_normal(k)
        for noise in (0.0, 1e-3):
            nu = noise * rng.standard_normal(n)
            p = RecoveryProblem(A, A @ x + nu, k)
            _, trace = dtam(p, AlgoConfig(gamma=1.0, beta=beta, mean_function=L2, debug=True))
            iterates = [np.zeros(n)] + [rec.debug["x"] for rec in trace.iterates]
            for p_, obs, bound in theory.check_error_bound(A, x, nu, k, iterates, const):
                checked += 1
                if p_ > 0:  # p = 0 holds with equality by construction
                    worst = max(worst, obs / bound)
                violations += obs > bound
    verdict(8, violations == 0, f"{instances} instances, {checked} iterates, "
                                f"max observed/bound for p>=1 {worst:.3g}, {violations} violations")


# ---------------------------------------------------------------- criterion 9

def test_c9_determinism(verdict, crit7_run, tmp_path):
    first, _, _ = crit7_run
    second = tmp_path / "phase.csv"
    phase_transition(ExperimentConfig(output_path=str(second), **CRIT7))
    same = first.read_bytes() == second.read_bytes()
    same_summary = (first.with_name("phase_summary.csv").read_bytes()
                    == second.with_name("phase_summary.csv").read_bytes())
    verdict(9, same and same_summary, f"{len(first.read_bytes())} bytes per run")


# ---------------------------------------------------------------- criterion 10

def test_c10_wavelet_demo(verdict):
    rng = np.random.default_rng(10)
    spec = WaveletSpec("db2", 3)
    trip = max(np.max(np.abs(idwt(dwt(s, spec), spec) - s))
               for s in (rng.standard_normal(256) for _ in range(100)))
    haar = max(np.max(np.abs(idwt(dwt(s, WaveletSpec("haar", 3)), WaveletSpec("haar", 3)) - s))
               for s in (rng.standard_normal(256) for _ in range(100)))
    exact = signal_demo(kappa=0.5, sparse_signal=True).snr_db
    means = [float(np.mean([signal_demo(kappa=kap, seed=s).snr_db for s in range(10)]))
             for kap in (0.35, 0.4, 0.5)]
    ok = max(trip, haar) <= 1e-12 and math.isinf(exact) and means[0] <= means[1] <= means[2]
    verdict(10, ok, f"round trip {max(trip, haar):.1e}, sparse demo SNR {exact}, "
                    f"mean SNR {', '.join(f'{m:.2f}' for m in means)} dB")
