"""Restricted isometry constants and the convergence constants of DTAM.

Everything here is a direct numerical evaluation: RICs by exhaustive
enumeration of supports, the thresholds ``delta(gamma)`` and ``delta*`` by
bisection on monotone root functions, and closed-form constants.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .linalg import hard_threshold

RIC_MAX_SUBSETS = 1_000_000
ROOT_TOL = 1e-12
_UPPER = 1.0 - 1e-12


class CombinatorialLimitError(ValueError):
    pass


class InvalidConstantsError(ValueError):
    pass


def ric_bruteforce(A, k: int) -> float:
    """The order-``k`` restricted isometry constant of ``A``.

    Enumerates every ``k``-column submatrix and returns the largest
    deviation of a Gram eigenvalue from 1.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError("A must be a matrix")
    n = A.shape[1]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside [1, {n}]")
    count = math.comb(n, k)
    if count > RIC_MAX_SUBSETS:
        raise CombinatorialLimitError(
            f"C({n},{k}) = {count} supports exceeds {RIC_MAX_SUBSETS}; "
            "use fewer columns or a smaller k"
        )
    G = np.ascontiguousarray(A.T @ A)
    return float(kernels.ric_enumerate(G, int(k))[0])


def ric_triple(A, k: int):
    """``(delta_k, delta_2k, delta_3k)``, capping orders at the column count."""
    n = np.asarray(A).shape[1]
    return tuple(ric_bruteforce(A, min(j * k, n)) for j in (1, 2, 3))


def _bisect(fn, lo=0.0, hi=_UPPER, tol=ROOT_TOL):
    flo = fn(lo)
    if flo >= 0:
        return lo
    mid = lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if abs(fm) <= tol:
            return mid
        if fm < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4 * np.finfo(float).eps:
            break
    return mid


def _check_t(t):
    if not 0 <= t < 1:
        raise ValueError(f"t must lie in [0, 1), got {t}")


def eval_G(t: float, g: float) -> float:
    """Root function whose zero in (0, 1) is ``delta(gamma)``."""
    _check_t(t)
    if not 0 < g <= 1:
        raise ValueError(f"g must lie in (0, 1], got {g}")
    s = math.sqrt(max(0.0, 1.0 - g * g))
    return (math.sqrt(2) * t + t * math.sqrt((5 + t) / (1 + t)) + s * (1 + t)) / (1 - t) - 1


def find_delta_gamma(g: float) -> float:
    return _bisect(lambda t: eval_G(t, g))


def eval_G_hat(t: float) -> float:
    """Root function for the PGROTP threshold ``delta*``."""
    _check_t(t)
    return math.sqrt(2) * t / (1 - t) * (1 + 1 / math.sqrt(1 + t)) - 1


def find_delta_star() -> float:
    return _bisect(eval_G_hat)


@dataclass(frozen=True)
class TheoryConstants:
    delta_k: float
    delta_2k: float
    delta_3k: float
    g: float
    beta: float
    C1: float
    C2: float
    rho_tilde: float
    rho: float
    C_beta: float
    beta_max: float
    delta_gamma: float

    @property
    def ric_condition(self) -> bool:
        return self.delta_3k < self.delta_gamma

    @property
    def beta_condition(self) -> bool:
        return self.beta < self.beta_max

    @property
    def valid(self) -> bool:
        """Both hypotheses of the error bound hold."""
        return self.ric_condition and self.beta_condition


def _check_rics(dk, d2, d3):
    if not 0 <= dk <= d2 <= d3 < 1:
        raise ValueError(
            f"need 0 <= delta_k <= delta_2k <= delta_3k < 1, got {dk}, {d2}, {d3}"
        )


def constants_bundle(delta_k, delta_2k, delta_3k, g, beta) -> TheoryConstants:
    dk, d2, d3 = float(delta_k), float(delta_2k), float(delta_3k)
    _check_rics(dk, d2, d3)
    if not 0 < g <= 1:
        raise ValueError(f"g must lie in (0, 1], got {g}")
    if not 0 <= beta < 1:
        raise ValueError(f"beta must lie in [0, 1), got {beta}")
    s = math.sqrt(max(0.0, 1.0 - g * g))
    C1 = math.sqrt(2) * d3 + s * (1 + d3)
    C2 = math.sqrt(1 + d2) * (math.sqrt(2) + s)
    rt = (C1 + d3 * math.sqrt((5 + d2) / (1 + d2))) / (1 - d2)
    if beta == 0:
        rho = rt  # the memory term vanishes; avoids 0/0 when rho_tilde = 0
    else:
        rho = rt + beta + beta / ((1 - d2) * (rt + beta))
    C_beta = (
        (C2 + math.sqrt(5 + d2)) / (1 - beta) + 2 / math.sqrt(1 + d2) + math.sqrt(1 + dk)
    ) / (1 - d2)
    if rt > 0:
        beta_max = 2 * rt / (d2 + math.sqrt(d2 * d2 + 4 * rt * (1 - d2))) - rt
    else:
        beta_max = 0.0
    return TheoryConstants(
        delta_k=dk, delta_2k=d2, delta_3k=d3, g=float(g), beta=float(beta),
        C1=C1, C2=C2, rho_tilde=rt, rho=rho, C_beta=C_beta, beta_max=beta_max,
        delta_gamma=find_delta_gamma(g),
    )


def error_bound(p: int, x0_err: float, nu_norm: float, constants: TheoryConstants) -> float:
    """``rho^p * x0_err + C_beta / (1 - rho) * nu_norm``."""
    if not constants.valid:
        raise InvalidConstantsError(
            "error bound requires delta_3k < delta(gamma) and beta < beta_max"
        )
    if p < 0:
        raise ValueError("p must be nonnegative")
    c = constants
    return c.rho ** p * x0_err + c.C_beta / (1 - c.rho) * nu_norm


@dataclass(frozen=True)
class PgrotpConstants:
    rho_hat: float
    C_hat: float
    valid: bool


def pgrotp_constants(delta_k, delta_2k, delta_3k) -> PgrotpConstants:
    """Contraction factor and noise constant for PGROTP with ``qbar = k``.

    ``valid`` is False when ``delta_3k >= delta*``; the numbers are still
    returned.
    """
    dk, d2, d3 = float(delta_k), float(delta_2k), float(delta_3k)
    _check_rics(dk, d2, d3)
    rho_hat = math.sqrt(2) * d3 / (1 - d2) * (1 + math.sqrt(1 + dk)) / math.sqrt(1 + d2)
    C_hat = (math.sqrt(2) + 2 / math.sqrt(1 + d2) + (math.sqrt(2) + 1) * math.sqrt(1 + dk)) / (1 - d2)
    valid = d3 < find_delta_star()
    if valid:
        assert rho_hat < 1, rho_hat
    return PgrotpConstants(rho_hat, C_hat, valid)


def nu_prime(A, x, nu, k: int) -> np.ndarray:
    """Effective noise ``A x_{S-bar} + nu`` for the best k-term part ``x_S``."""
    A = np.asarray(A, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    tail = x - hard_threshold(x, k)
    out = A @ tail
    if nu is not None:
        out = out + np.asarray(nu, dtype=np.float64)
    return out


def memory_sums(errors, beta: float) -> np.ndarray:
    """``Q_i = sum_{j<=i} beta^(i-j) e_j`` for a sequence of errors ``e_j``."""
    out = np.empty(len(errors))
    acc = 0.0
    for i, e in enumerate(errors):
        acc = beta * acc + e
        out[i] = acc
    return out


def check_error_bound(A, x_true, nu, k, iterates, constants: TheoryConstants):
    """Compare ``||x^p - x_S||`` with the bound for every iterate.

    ``iterates`` is the sequence ``x^0, x^1, ...``.  Returns a list of
    ``(p, observed, bound)`` tuples.
    """
    xs = hard_threshold(np.asarray(x_true, dtype=np.float64), k)
    nu_n = float(np.linalg.norm(nu_prime(A, x_true, nu, k)))
    x0_err = float(np.linalg.norm(np.asarray(iterates[0]) - xs))
    rows = []
    for p, xp in enumerate(iterates):
        obs = float(np.linalg.norm(np.asarray(xp) - xs))
        rows.append((p, obs, error_bound(p, x0_err, nu_n, constants)))
    return rows
