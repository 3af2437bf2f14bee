"""Command-line driver.

Subcommands: ``phase-transition``, ``recover``, ``signal-demo``, ``theory``
and ``ric``.  Options may also come from a flat ``key=value`` file given
with ``--config``; command-line flags win over the file.  Exit status is 0
on success, 2 for configuration or I/O errors and 3 for numerical failures.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import experiments, matrixio, meanfun, theory
from .core import AlgoConfig, RecoveryProblem
from .pursuit import ALGORITHMS, get_algorithm
from .transforms import WaveletSpec

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

FULL_SCALE = dict(n=4000, m=800, k_grid=list(range(5, 400, 25)), trials=100)


# LinAlgError and InvalidConstantsError subclass ValueError; keep them numeric
NUMERIC_ERRORS = (ArithmeticError, np.linalg.LinAlgError, theory.InvalidConstantsError)


class ConfigError(ValueError):
    pass


def read_config_file(path):
    """Parse ``key=value`` lines; ``#`` starts a comment, dashes in keys
    become underscores."""
    out = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    for no, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{no}: expected key=value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _int_list(text):
    try:
        return [int(v) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError:
        raise ConfigError(f"expected a comma-separated integer list, got {text!r}") from None


def _float_list(text):
    try:
        return [float(v) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _bool(text):
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


# option name -> (type, default); shared by the config file and the flags
ALGO_OPTIONS = {
    "gamma": (float, 0.1),
    "beta": (float, 0.4),
    "family": (str, "log_sum_exp"),
    "theta": (_float_list, None),
    "sigma": (float, 1.0),
    "l": (float, 2.0),
    "max_iters": (int, None),
    "residual_tol": (float, None),
    "rel_change_tol": (float, 0.0),
    "qbar": (int, None),
    "stomp_threshold": (float, 2.5),
    "rng_seed": (int, 0),
}


def _add_algo_flags(p):
    g = p.add_argument_group("algorithm parameters")
    g.add_argument("--gamma", help="index-selection ratio in (0, 1] (default 0.1)")
    g.add_argument("--beta", help="memory factor in [0, 1) (default 0.4)")
    g.add_argument("--family", help="mean function: " + ", ".join(f.value for f in meanfun.Family))
    g.add_argument("--theta", help="comma-separated positive weights (default all ones)")
    g.add_argument("--sigma", help="mean-function sigma (default 1)")
    g.add_argument("--l", help="mean-function exponent (default 2)")
    g.add_argument("--max-iters", help="iteration cap (default per algorithm)")
    g.add_argument("--residual-tol", help="absolute residual tolerance (default 1e-10*||y||)")
    g.add_argument("--rel-change-tol", help="relative-change stopping tolerance (0 = off)")
    g.add_argument("--qbar", help="PGROTP gradient support size (default k)")
    g.add_argument("--stomp-threshold", help="StOMP threshold t_s (default 2.5)")
    g.add_argument("--rng-seed", help="solver seed")


def _merged(args, file_opts, name, conv, default):
    value = getattr(args, name, None)
    if value is None:
        value = file_opts.get(name)
    if value is None:
        return default
    try:
        return conv(value)
    except ConfigError:
        raise
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {name}: {value!r}") from None


def build_algo_config(args, file_opts) -> AlgoConfig:
    o = {k: _merged(args, file_opts, k, conv, d) for k, (conv, d) in ALGO_OPTIONS.items()}
    try:
        spec = meanfun.MeanFunctionSpec(
            family=o["family"], theta=tuple(o["theta"]) if o["theta"] else None,
            sigma=o["sigma"], l=o["l"],
        )
        return AlgoConfig(
            gamma=o["gamma"], beta=o["beta"], mean_function=spec, max_iters=o["max_iters"],
            residual_tol=o["residual_tol"], rel_change_tol=o["rel_change_tol"], qbar=o["qbar"],
            stomp_threshold=o["stomp_threshold"], rng_seed=o["rng_seed"],
        )
    except NUMERIC_ERRORS:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _get(args, file_opts, name, conv, default):
    return _merged(args, file_opts, name, conv, default)


def cmd_phase_transition(args, fo):
    base = dict(n=400, m=80, k_grid=list(range(5, 80, 5)), trials=20)
    if _get(args, fo, "full_scale", _bool, False):
        base.update(FULL_SCALE)
    output = _get(args, fo, "output", str, "phase_transition.csv")
    try:
        cfg = experiments.ExperimentConfig(
            n=_get(args, fo, "n", int, base["n"]),
            m=_get(args, fo, "m", int, base["m"]),
            k_grid=_get(args, fo, "k_grid", _int_list, base["k_grid"]),
            trials=_get(args, fo, "trials", int, base["trials"]),
            algorithms=_get(args, fo, "algorithms", lambda s: [a for a in s.split(",") if a],
                            list(ALGORITHMS)),
            base_seed=_get(args, fo, "seed", int, 0),
            algo_config=build_algo_config(args, fo),
            output_path=output,
            aggregate_path=_get(args, fo, "aggregate_output", str, None),
            noise_std=_get(args, fo, "noise_std", float, 0.0),
            workers=_get(args, fo, "workers", int, 1),
            omit_timing=_get(args, fo, "omit_timing", _bool, False),
        )
    except ConfigError:
        raise
    except NUMERIC_ERRORS:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    _, aggs = experiments.phase_transition(cfg)
    agg_path = cfg.aggregate_path or experiments.default_aggregate_path(output)
    print(f"wrote {output} and {agg_path}")
    for a, k, n, freq, t in aggs:
        f = "NA" if freq is None else f"{freq:.2f}"
        print(f"{a:>7} k={k:<4d} success={f}")
    return EXIT_OK


def cmd_recover(args, fo):
    algo = _get(args, fo, "algorithm", str, "dtam")
    try:
        solver = get_algorithm(algo)
    except NUMERIC_ERRORS:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    cfg = build_algo_config(args, fo)
    k = _get(args, fo, "k", int, None)
    matrix = _get(args, fo, "matrix", str, None)
    truth = None
    if matrix:
        yfile = _get(args, fo, "y", str, None)
        if not yfile or k is None:
            raise ConfigError("--matrix needs --y and --k")
        A = matrixio.read_matrix(matrix)
        y = matrixio.read_vector(yfile)
        try:
            problem = RecoveryProblem(A, y, k)
        except NUMERIC_ERRORS:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    else:
        n = _get(args, fo, "n", int, 400)
        m = _get(args, fo, "m", int, 100)
        k = 10 if k is None else k
        try:
            problem = experiments.gen_instance(n, m, k, _get(args, fo, "seed", int, 0),
                                               _get(args, fo, "noise_std", float, 0.0))
        except NUMERIC_ERRORS:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        truth = problem.ground_truth
    x, trace = solver(problem, cfg)
    print(f"algorithm={algo} iterations={trace.iterations} stop={trace.stop_reason.value}")
    print(f"residual_norm={np.linalg.norm(problem.y - problem.A @ x):.6e}")
    print("support=" + ",".join(str(i) for i in np.flatnonzero(x)))
    if truth is not None:
        rel = np.linalg.norm(x - truth) / np.linalg.norm(truth)
        print(f"rel_error={rel:.6e} success={rel <= experiments.SUCCESS_RTOL}")
    out = _get(args, fo, "output", str, None)
    if out:
        matrixio.write_vector(out, x)
        print(f"wrote {out}")
    return EXIT_OK


def cmd_signal_demo(args, fo):
    try:
        wav = WaveletSpec(_get(args, fo, "wavelet", str, "haar"), _get(args, fo, "levels", int, 3))
        rep = experiments.signal_demo(
            n=_get(args, fo, "n", int, 256),
            kappa=_get(args, fo, "kappa", float, 0.5),
            wavelet=wav,
            algorithm=_get(args, fo, "algorithm", str, "dtam"),
            seed=_get(args, fo, "seed", int, 0),
            sparse_signal=_get(args, fo, "sparse", _bool, False),
            orthonormal_B=_get(args, fo, "orthonormal", _bool, False),
            algo_config=build_algo_config(args, fo),
        )
    except ConfigError:
        raise
    except NUMERIC_ERRORS:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    print("\n".join(rep.lines()))
    return EXIT_OK


def cmd_theory(args, fo):
    cfg = build_algo_config(args, fo)
    k = _get(args, fo, "k", int, 10)
    deltas = _get(args, fo, "deltas", _float_list, None)
    if deltas is not None and len(deltas) != 3:
        raise ConfigError("--deltas takes delta_k,delta_2k,delta_3k")
    matrix = _get(args, fo, "matrix", str, None)
    A = matrixio.read_matrix(matrix) if matrix else None
    try:
        rows = experiments.theory_report(
            gamma=cfg.gamma, beta=cfg.beta, spec=cfg.mean_function, k=k,
            deltas=deltas, matrix=A,
        )
    except theory.CombinatorialLimitError as exc:
        raise ConfigError(str(exc)) from None
    except NUMERIC_ERRORS:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    print(experiments.format_table(rows))
    return EXIT_OK


def cmd_ric(args, fo):
    matrix = _get(args, fo, "matrix", str, None)
    k = _get(args, fo, "k", int, None)
    if not matrix or k is None:
        raise ConfigError("ric needs --matrix and --k")
    A = matrixio.read_matrix(matrix)
    try:
        delta = theory.ric_bruteforce(A, k)
    except NUMERIC_ERRORS:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    print(f"delta_{k}={delta:.15g}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="dtam", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        p.add_argument("--config", help="key=value file; flags override its entries")
        p.set_defaults(func=func)
        return p

    p = add("phase-transition", cmd_phase_transition,
            "success frequency sweep over sparsity levels; writes CSV")
    p.add_argument("--n", help="columns (default 400)")
    p.add_argument("--m", help="rows (default 80)")
    p.add_argument("--k-grid", help="comma-separated sparsity levels (default 5,10,...,75)")
    p.add_argument("--trials", help="instances per (algorithm, k) (default 20)")
    p.add_argument("--algorithms", help="comma-separated subset of " + ",".join(ALGORITHMS))
    p.add_argument("--seed", help="base seed (default 0)")
    p.add_argument("--output", help="per-trial CSV (default phase_transition.csv)")
    p.add_argument("--aggregate-output", help="per-cell CSV (default <output>_summary.csv)")
    p.add_argument("--noise-std", help="Gaussian noise level; >0 switches to noisy mode")
    p.add_argument("--workers", help="worker processes (default 1)")
    p.add_argument("--omit-timing", action="store_const", const="1",
                   help="write time columns as NA so output is byte-reproducible")
    p.add_argument("--full-scale", action="store_const", const="1",
                   help="n=4000, m=800, 100 trials (slow)")
    _add_algo_flags(p)

    p = add("recover", cmd_recover, "recover one sparse vector")
    p.add_argument("--algorithm", help="one of " + ",".join(ALGORITHMS) + " (default dtam)")
    p.add_argument("--matrix", help="measurement matrix file (.csv or .bin)")
    p.add_argument("--y", help="measurement vector file")
    p.add_argument("--k", help="sparsity level")
    p.add_argument("--n", help="columns of a generated instance (default 400)")
    p.add_argument("--m", help="rows of a generated instance (default 100)")
    p.add_argument("--seed", help="seed of a generated instance (default 0)")
    p.add_argument("--noise-std", help="noise level of a generated instance")
    p.add_argument("--output", help="write the recovered vector here")
    _add_algo_flags(p)

    p = add("signal-demo", cmd_signal_demo, "wavelet-domain recovery of a 1-D signal")
    p.add_argument("--n", help="signal length (default 256)")
    p.add_argument("--kappa", help="sampling ratio m/n (default 0.5)")
    p.add_argument("--wavelet", help="haar or db2 (default haar)")
    p.add_argument("--levels", help="decomposition levels (default 3)")
    p.add_argument("--algorithm", help="recovery algorithm (default dtam)")
    p.add_argument("--seed", help="seed (default 0)")
    p.add_argument("--sparse", action="store_const", const="1",
                   help="use a signal that is exactly k-sparse in the wavelet basis")
    p.add_argument("--orthonormal", action="store_const", const="1",
                   help="pipeline check: orthogonal B with kappa=1")
    _add_algo_flags(p)

    p = add("theory", cmd_theory, "thresholds and error-bound constants")
    p.add_argument("--k", help="sparsity level for g(gamma) and RIC orders (default 10)")
    p.add_argument("--deltas", help="delta_k,delta_2k,delta_3k")
    p.add_argument("--matrix", help="matrix file; RICs by exhaustive enumeration")
    _add_algo_flags(p)

    p = add("ric", cmd_ric, "restricted isometry constant by exhaustive enumeration")
    p.add_argument("--matrix", help="matrix file (.csv or .bin)")
    p.add_argument("--k", help="order")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        fo = read_config_file(args.config) if args.config else {}
        return args.func(args, fo)
    except (ConfigError, matrixio.MatrixFormatError, OSError) as exc:
        print(f"dtam: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"dtam: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # any remaining validation failure comes from user-supplied data
        print(f"dtam: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
