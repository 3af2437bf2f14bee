"""Seeded Monte-Carlo experiments: phase transitions and the wavelet demo."""
from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from . import meanfun, theory
from .core import AlgoConfig, RecoveryProblem, normalize_columns
from .metrics import snr
from .pursuit import ALGORITHMS, get_algorithm
from .rng import SplitMix64, mix_seed
from .transforms import WaveletSpec, idwt, wavelet_matrix

SUCCESS_RTOL = 1e-3
NOISY_REL_CHANGE_TOL = 1e-3
ROW_FIELDS = ("algorithm", "k", "trial", "seed", "success", "rel_error", "iterations", "time_ms")
AGG_FIELDS = ("algorithm", "k", "trials", "success_freq", "mean_time_ms")


def gen_instance(n: int, m: int, k: int, seed: int, noise_std: float = 0.0) -> RecoveryProblem:
    """Normalized Gaussian ``A`` (m x n) and a k-sparse Gaussian ``x``.

    Draw order from ``SplitMix64(seed)``: the m*n entries of ``A`` in
    column-major order, the ``k`` support positions, the ``k`` nonzero
    values, then (if ``noise_std > 0``) ``m`` noise entries.
    """
    if not (1 <= k <= m < n):
        raise ValueError(f"need 1 <= k <= m < n, got k={k}, m={m}, n={n}")
    stream = SplitMix64(seed)
    A = normalize_columns(stream.normal(m * n).reshape((m, n), order="F"))
    x = np.zeros(n)
    x[stream.choice(n, k)] = stream.normal(k)
    noise = noise_std * stream.normal(m) if noise_std > 0 else np.zeros(m)
    return RecoveryProblem(A, A @ x + noise, k, ground_truth=x, noise=noise)


@dataclass
class ExperimentConfig:
    n: int = 400
    m: int = 80
    k_grid: Sequence[int] = tuple(range(5, 80, 5))
    trials: int = 20
    algorithms: Sequence[str] = ("dtam", "pgrotp", "omp", "sp", "stomp")
    base_seed: int = 0
    algo_config: AlgoConfig = field(default_factory=AlgoConfig)
    output_path: Optional[str] = None
    aggregate_path: Optional[str] = None
    noise_std: float = 0.0
    workers: int = 1
    omit_timing: bool = False

    def __post_init__(self):
        self.k_grid = tuple(int(k) for k in self.k_grid)
        self.algorithms = tuple(a.lower() for a in self.algorithms)
        if not self.m < self.n:
            raise ValueError(f"need m < n, got m={self.m}, n={self.n}")
        if any(not 1 <= k <= self.m for k in self.k_grid):
            raise ValueError(f"every k must lie in [1, m={self.m}]")
        if self.trials < 0:
            raise ValueError("trials must be nonnegative")
        for a in self.algorithms:
            get_algorithm(a)
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        if self.workers < 1:
            raise ValueError("workers must be positive")

    @property
    def noisy(self) -> bool:
        return self.noise_std > 0


@dataclass(frozen=True)
class TrialResult:
    algorithm: str
    k: int
    trial: int
    seed: int
    success: Optional[bool]
    rel_error: float
    iterations: int
    time_ms: float


def algorithm_index(name: str) -> int:
    return list(ALGORITHMS).index(name)


def trial_seed(base_seed: int, algorithm: str, k: int, trial: int) -> int:
    return mix_seed(base_seed, algorithm_index(algorithm), k, trial)


def run_trial(config: ExperimentConfig, algorithm: str, k: int, trial: int) -> TrialResult:
    seed = trial_seed(config.base_seed, algorithm, k, trial)
    problem = gen_instance(config.n, config.m, k, seed, config.noise_std)
    algo_cfg = config.algo_config
    if config.noisy and algo_cfg.rel_change_tol == 0:
        algo_cfg = replace(algo_cfg, rel_change_tol=NOISY_REL_CHANGE_TOL)
    t0 = time.perf_counter()
    x, trace = get_algorithm(algorithm)(problem, algo_cfg)
    elapsed = (time.perf_counter() - t0) * 1e3
    xs = problem.ground_truth
    rel = float(np.linalg.norm(x - xs) / np.linalg.norm(xs))
    success = None if config.noisy else rel <= SUCCESS_RTOL
    return TrialResult(algorithm, k, trial, seed, success, rel, trace.iterations, elapsed)


def _run_cell(args):
    config, algorithm, k, trial = args
    return run_trial(config, algorithm, k, trial)


def run_grid(config: ExperimentConfig) -> List[TrialResult]:
    jobs = [(config, a, k, t) for a in config.algorithms for k in config.k_grid
            for t in range(config.trials)]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(_run_cell, jobs, chunksize=8))
    else:
        rows = [_run_cell(j) for j in jobs]
    order = {a: i for i, a in enumerate(config.algorithms)}
    rows.sort(key=lambda r: (order[r.algorithm], r.k, r.trial))
    return rows


def aggregate(rows: Sequence[TrialResult], config: ExperimentConfig):
    """Per-(algorithm, k) success frequency and mean time over all trials."""
    cells = {}
    for r in rows:
        cells.setdefault((r.algorithm, r.k), []).append(r)
    out = []
    for a in config.algorithms:
        for k in config.k_grid:
            rs = cells.get((a, k), [])
            if not rs:
                continue
            freq = None if config.noisy else sum(bool(r.success) for r in rs) / len(rs)
            mean_t = sum(r.time_ms for r in rs) / len(rs)
            out.append((a, k, len(rs), freq, mean_t))
    return out


def _fmt_float(v):
    return "NA" if v is None else repr(float(v))


def _fmt_row(r: TrialResult, omit_timing):
    success = "NA" if r.success is None else str(int(r.success))
    t = "NA" if omit_timing else f"{r.time_ms:.3f}"
    return [r.algorithm, r.k, r.trial, r.seed, success, _fmt_float(r.rel_error), r.iterations, t]


def write_rows(path, rows, omit_timing=False):
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(ROW_FIELDS)
            for r in rows:
                w.writerow(_fmt_row(r, omit_timing))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def write_aggregates(path, aggs, omit_timing=False):
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(AGG_FIELDS)
            for a, k, n, freq, mean_t in aggs:
                w.writerow([a, k, n, _fmt_float(freq), "NA" if omit_timing else f"{mean_t:.3f}"])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def default_aggregate_path(path: str) -> str:
    root, ext = os.path.splitext(path)
    return f"{root}_summary{ext or '.csv'}"


def phase_transition(config: ExperimentConfig):
    """Run the sweep; write the per-trial and per-cell CSV files if paths are set.

    Returns ``(rows, aggregates)``.
    """
    rows = run_grid(config)
    aggs = aggregate(rows, config)
    if config.output_path:
        write_rows(config.output_path, rows, config.omit_timing)
        write_aggregates(config.aggregate_path or default_aggregate_path(config.output_path),
                         aggs, config.omit_timing)
    return rows, aggs


# --------------------------------------------------------------------------
# wavelet demo

def demo_signal(n: int) -> np.ndarray:
    """Piecewise-smooth test signal: a chirp, a ramp and a damped tone joined
    by jumps."""
    t = np.arange(n) / n
    s = np.where(t < 0.3, np.sin(2 * np.pi * (3 * t + 10 * t * t)), 0.0)
    s += np.where((t >= 0.3) & (t < 0.55), 0.8 - 1.5 * (t - 0.3), 0.0)
    s += np.where(t >= 0.55, np.exp(-4 * (t - 0.55)) * np.cos(2 * np.pi * 6 * t) - 0.3, 0.0)
    return s


@dataclass
class DemoReport:
    n: int
    m: int
    k: int
    kappa: float
    wavelet: WaveletSpec
    algorithm: str
    seed: int
    snr_db: float
    rel_error: float
    sparse_signal: bool

    def lines(self):
        kind = "k-sparse by construction" if self.sparse_signal else "synthetic piecewise-smooth"
        return [
            f"# signal: {kind} (stand-in for recorded audio)",
            f"n={self.n} m={self.m} k={self.k} kappa={self.kappa}",
            f"wavelet={self.wavelet.family.value} levels={self.wavelet.levels}",
            f"algorithm={self.algorithm} seed={self.seed}",
            f"rel_error={self.rel_error:.3e}",
            "snr_db=" + ("inf" if math.isinf(self.snr_db) else f"{self.snr_db:.2f}"),
        ]


def signal_demo(n: int = 256, kappa: float = 0.5, wavelet: WaveletSpec = None,
                algorithm: str = "dtam", seed: int = 0, sparse_signal: bool = False,
                orthonormal_B: bool = False, algo_config: AlgoConfig = None,
                snr_rtol: float = 1e-12) -> DemoReport:
    """Compressive measurement and wavelet-domain recovery of a 1-D signal.

    ``m = ceil(kappa n)`` measurements ``y = B d`` with a column-normalized
    Gaussian ``B``; ``x`` is recovered from ``A = B Phi^T`` with sparsity
    ``k = ceil(0.3 m)`` and ``d_hat = Phi^T x_hat``.  ``orthonormal_B``
    (``kappa = 1`` only) is a pipeline check: a random orthogonal ``B`` and
    ``k = n``, so recovery must be exact.
    Relative errors at or below ``snr_rtol`` report an infinite SNR.
    """
    wavelet = wavelet or WaveletSpec("haar", 3)
    if not 0 < kappa <= 1:
        raise ValueError(f"kappa must lie in (0, 1], got {kappa}")
    wavelet.check_length(n)
    m = math.ceil(kappa * n)
    k = math.ceil(0.3 * m)
    stream = SplitMix64(seed)
    Phi = wavelet_matrix(n, wavelet)
    if sparse_signal:
        coef = np.zeros(n)
        coef[stream.choice(n, k)] = stream.normal(k)
        d = idwt(coef, wavelet)
    else:
        d = demo_signal(n)
    G = stream.normal(m * n).reshape((m, n), order="F")
    if orthonormal_B:
        if m != n:
            raise ValueError("orthonormal_B requires kappa = 1")
        B = np.linalg.qr(G)[0]
        k = n  # pipeline check: keep every coefficient
    else:
        B = normalize_columns(G)
    y = B @ d
    A = B @ Phi.T
    x_hat, _ = get_algorithm(algorithm)(RecoveryProblem(A, y, k), algo_config or AlgoConfig())
    d_hat = Phi.T @ x_hat
    rel = float(np.linalg.norm(d - d_hat) / np.linalg.norm(d))
    return DemoReport(n, m, k, kappa, wavelet, algorithm, seed,
                      snr(d, d_hat, rtol=snr_rtol), rel, sparse_signal)


# --------------------------------------------------------------------------
# theory table

def theory_report(gamma: float = 0.1, beta: float = 0.4, spec: meanfun.MeanFunctionSpec = None,
                  k: int = 10, deltas=None, matrix=None, lambda_samples: int = meanfun.LAMBDA_SAMPLES):
    """Rows ``(name, value)`` summarising the theory layer for given inputs.

    RICs come from ``deltas = (delta_k, delta_2k, delta_3k)`` or, when a
    ``matrix`` is supplied, from exhaustive enumeration at orders k, 2k, 3k.
    """
    spec = spec or meanfun.MeanFunctionSpec()
    rows = [("delta_star", theory.find_delta_star())]
    rows.append(("G_hat(delta_star)", theory.eval_G_hat(rows[0][1])))
    bundle = meanfun.g_gamma(spec, gamma, k, samples=lambda_samples)
    rows += [
        ("family", spec.family.value), ("k", k), ("gamma", gamma), ("beta", beta),
        ("c", bundle.c), ("grad_norm", bundle.grad_norm),
        ("lambda_star", bundle.lambda_star), ("g_gamma", bundle.g),
        ("delta_gamma", theory.find_delta_gamma(bundle.g)),
    ]
    if matrix is not None:
        deltas = theory.ric_triple(matrix, k)
        rows.append(("ric_source", "brute force"))
    if deltas is not None:
        dk, d2, d3 = deltas
        if 0 <= dk <= d2 <= d3 and d3 >= 1:
            # legitimate RICs outside the regime the constants are defined for
            rows += [("delta_k", dk), ("delta_2k", d2), ("delta_3k", d3),
                     ("ric_condition", False), ("pgrotp_condition", False)]
            return rows
        c = theory.constants_bundle(dk, d2, d3, bundle.g, beta)
        rows += [
            ("delta_k", c.delta_k), ("delta_2k", c.delta_2k), ("delta_3k", c.delta_3k),
            ("C1", c.C1), ("C2", c.C2), ("rho_tilde", c.rho_tilde), ("rho", c.rho),
            ("C_beta", c.C_beta), ("beta_max", c.beta_max),
            ("ric_condition", c.ric_condition), ("beta_condition", c.beta_condition),
        ]
        pc = theory.pgrotp_constants(dk, d2, d3)
        rows += [("rho_hat", pc.rho_hat), ("C_hat", pc.C_hat), ("pgrotp_condition", pc.valid)]
    return rows


def format_table(rows) -> str:
    width = max(len(name) for name, _ in rows)
    out = []
    for name, value in rows:
        if isinstance(value, float):
            value = f"{value:.12g}"
        out.append(f"{name:<{width}}  {value}")
    return "\n".join(out)
