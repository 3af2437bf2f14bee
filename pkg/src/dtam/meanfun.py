"""Generalized mean functions and the dynamic index-selection rule.

A mean function is ``Gamma(z) = Psi^{-1}(sum_i theta_i phi(z_i))`` and the
selection rule scores prefixes of the sorted residual with the shifted
``f(z) = Gamma(z) - Gamma(0)``.  Five families are built in:

``log_sum_exp``  ``sigma * ln(sum theta_i exp(z_i / sigma))``
``power``        ``(sum theta_i (z_i + sigma)^l)^(1/l) - sigma``
``delta11``      ``(sum theta_i D11(z_i + sigma))^(1/l) - sigma``
``delta12``      ``(sum theta_i D12(z_i + sigma))^(1/l) - sigma``
``lp_norm``      ``(sum theta_i |z_i|^l)^(1/l)``  (not twice differentiable at 0)

with ``D11(t) = t^2/2 - t + ln(t + 1)`` and
``D12(t) = ((t + 1)^2 - 1/(t + 1) - 3t) / 2``.
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.optimize
from scipy.special import logsumexp

from .linalg import magnitude_order

LAMBDA_SAMPLES = 16
LAMBDA_SAFETY = 1.05
MAX_CORNER_K = 10


class Family(str, enum.Enum):
    LOG_SUM_EXP = "log_sum_exp"
    POWER = "power"
    DELTA11 = "delta11"
    DELTA12 = "delta12"
    LP_NORM = "lp_norm"


class ZeroDirectionError(ArithmeticError):
    """The top-k part of the residual is identically zero."""


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class MeanFunctionSpec:
    """Family tag plus parameters.

    ``theta=None`` means all-ones weights of whatever length the caller needs.
    ``sigma`` is ignored by ``lp_norm``; ``l`` is ignored by ``log_sum_exp``.
    """

    family: Family = Family.LOG_SUM_EXP
    theta: Optional[Tuple[float, ...]] = None
    sigma: float = 1.0
    l: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.theta is not None:
            theta = tuple(float(t) for t in np.ravel(self.theta))
            if not theta or not all(math.isfinite(t) and t > 0 for t in theta):
                raise ValueError("theta must be a nonempty vector of positive reals")
            object.__setattr__(self, "theta", theta)
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        fam = self.family
        if fam in (Family.POWER, Family.LP_NORM) and not self.l > 1:
            raise ValueError(f"{fam.value} needs l > 1, got {self.l}")
        if fam in (Family.DELTA11, Family.DELTA12) and not 1 < self.l <= 2:
            raise ValueError(f"{fam.value} needs 1 < l <= 2, got {self.l}")

    def weights(self, k: int) -> np.ndarray:
        if self.theta is None:
            return np.ones(k)
        if len(self.theta) != k:
            raise ValueError(f"theta has length {len(self.theta)}, expected {k}")
        return np.array(self.theta)

    @property
    def smooth(self) -> bool:
        return self.family is not Family.LP_NORM


@dataclass(frozen=True)
class GGammaBundle:
    c: float
    grad_norm: float
    lambda_star: float
    g: float


# phi, phi', phi'' for the families built on Psi(t) = t^l
def _phi(spec, t, order):
    fam, l = spec.family, spec.l
    if fam is Family.POWER:
        if order == 0:
            return t ** l
        if order == 1:
            return l * t ** (l - 1)
        return l * (l - 1) * t ** (l - 2)
    if fam is Family.DELTA11:
        if order == 0:
            return t * t / 2 - t + np.log1p(t)
        if order == 1:
            return t - 1 + 1 / (t + 1)
        return 1 - 1 / (t + 1) ** 2
    if fam is Family.DELTA12:
        if order == 0:
            return 0.5 * ((t + 1) ** 2 - 1 / (t + 1) - 3 * t)
        if order == 1:
            return 0.5 * (2 * (t + 1) + (t + 1) ** -2 - 3)
        return 1 - (t + 1) ** -3
    raise AssertionError(fam)


def _check_domain(spec, z):
    if not np.all(np.isfinite(z)):
        raise DomainError("z must be finite")
    fam = spec.family
    if fam is Family.LP_NORM and np.any(z < 0):
        raise DomainError("lp_norm is evaluated on nonnegative vectors")
    if fam in (Family.POWER, Family.DELTA11, Family.DELTA12) and np.any(z <= -spec.sigma):
        raise DomainError(f"{fam.value} requires z > -sigma")


def _gamma(spec, Z, theta):
    """Gamma along the last axis of ``Z`` (no domain checks)."""
    fam, sigma, l = spec.family, spec.sigma, spec.l
    if fam is Family.LOG_SUM_EXP:
        return sigma * logsumexp(Z / sigma, axis=-1, b=theta)
    if fam is Family.LP_NORM:
        return np.sum(theta * np.abs(Z) ** l, axis=-1) ** (1 / l)
    S = np.sum(theta * _phi(spec, Z + sigma, 0), axis=-1)
    return S ** (1 / l) - sigma


def _f(spec, Z, theta):
    zero = np.zeros(Z.shape[-1])
    return _gamma(spec, Z, theta) - _gamma(spec, zero, theta)


def eval_gamma(spec: MeanFunctionSpec, z) -> float:
    """The mean function itself, ``Gamma_theta(z)``."""
    z = np.asarray(z, dtype=np.float64)
    _check_domain(spec, z)
    return float(_gamma(spec, z, spec.weights(z.shape[0])))


def eval_f(spec: MeanFunctionSpec, z) -> float:
    """``f(z) = Gamma(z) - Gamma(0)``; ``f(0) == 0`` exactly."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or z.shape[0] == 0:
        raise ValueError("z must be a nonempty vector")
    _check_domain(spec, z)
    if not np.any(z):
        return 0.0
    return float(_f(spec, z, spec.weights(z.shape[0])))


def grad_f_at_zero(spec: MeanFunctionSpec, k: int) -> np.ndarray:
    """Analytic gradient of f at the origin (all entries positive)."""
    if spec.family is Family.LP_NORM:
        raise DomainError("the lp_norm family has no gradient at 0")
    theta = spec.weights(k)
    if spec.family is Family.LOG_SUM_EXP:
        return theta / theta.sum()
    t = np.full(k, spec.sigma)
    S = np.sum(theta * _phi(spec, t, 0))
    return S ** (1 / spec.l - 1) / spec.l * theta * _phi(spec, t, 1)


def hessian_f(spec: MeanFunctionSpec, z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if spec.family is Family.LP_NORM:
        raise DomainError("the lp_norm family is not twice differentiable at 0")
    _check_domain(spec, z)
    theta = spec.weights(z.shape[0])
    if spec.family is Family.LOG_SUM_EXP:
        e = z / spec.sigma
        p = theta * np.exp(e - e.max())
        p /= p.sum()
        return (np.diag(p) - np.outer(p, p)) / spec.sigma
    l = spec.l
    t = z + spec.sigma
    S = np.sum(theta * _phi(spec, t, 0))
    d1 = theta * _phi(spec, t, 1)
    d2 = theta * _phi(spec, t, 2)
    return (S ** (1 / l - 1) / l) * np.diag(d2) + (
        (1 / l) * (1 / l - 1) * S ** (1 / l - 2)
    ) * np.outer(d1, d1)


def _lambda_max(spec, z):
    return float(np.linalg.eigvalsh(hessian_f(spec, z))[-1])


def lambda_star(spec: MeanFunctionSpec, k: int, samples: int = LAMBDA_SAMPLES,
                seed: int = 0) -> float:
    """Upper estimate of ``max_{z in [0,1]^k} lambda_max(hess f(z))``.

    Every corner of the cube (for ``k <= 10``) and ``samples`` seeded random
    points are evaluated; bounded local maximisation is then started from
    the random points and the best corner.  The running maximum is inflated
    by 5%.  Start points for a given seed are prefixes of one stream, so
    more samples never lower the estimate.
    """
    if spec.family is Family.LP_NORM:
        raise DomainError("lambda_star is undefined for the lp_norm family")
    best = _lambda_max(spec, np.zeros(k))
    starts = list(np.random.default_rng(seed).random((samples, k)))
    if k <= MAX_CORNER_K:
        corners = np.array(np.meshgrid(*[[0.0, 1.0]] * k, indexing="ij")).reshape(k, -1).T
        vals = [_lambda_max(spec, c) for c in corners]
        i = int(np.argmax(vals))
        best = max(best, vals[i])
        starts.append(corners[i])
    bounds = [(0.0, 1.0)] * k
    for z0 in starts:
        best = max(best, _lambda_max(spec, z0))
        res = scipy.optimize.minimize(
            lambda z: -_lambda_max(spec, np.clip(z, 0.0, 1.0)),
            z0, method="L-BFGS-B", bounds=bounds,
        )
        best = max(best, -float(res.fun))
    return max(best, 0.0) * LAMBDA_SAFETY


def _lp_norm_ratio(spec, k):
    # c1 ||z||_2 <= ||z||_{l,theta} <= c2 ||z||_2 on R^k
    l = spec.l
    theta = spec.weights(k)
    if l >= 2:
        c1, c2 = k ** (1 / l - 0.5), 1.0
    else:
        c1, c2 = 1.0, k ** (1 / l - 0.5)
    return c1 * theta.min() ** (1 / l), c2 * theta.max() ** (1 / l)


@functools.lru_cache(maxsize=256)
def _bundle(spec, k, gamma, samples, seed):
    if spec.family is Family.LP_NORM:
        c1, c2 = _lp_norm_ratio(spec, k)
        return GGammaBundle(c=float(c1), grad_norm=float(c2), lambda_star=0.0,
                            g=float(gamma * c1 / c2))
    grad = grad_f_at_zero(spec, k)
    c = float(grad.min())
    gn = float(np.linalg.norm(grad))
    lam = lambda_star(spec, k, samples, seed)
    if lam == 0.0:
        g = gamma * c / gn
    else:
        g = 2 * gamma * c / (math.sqrt(gn * gn + 2 * gamma * c * lam) + gn)
    return GGammaBundle(c=c, grad_norm=gn, lambda_star=lam, g=g)


def g_gamma(spec: MeanFunctionSpec, gamma: float, k: int,
            samples: int = LAMBDA_SAMPLES, seed: int = 0) -> GGammaBundle:
    """The constant ``g(gamma)`` guaranteeing
    ``||r_{Omega_q}||_2 >= g(gamma) ||r_{Omega_k}||_2`` for the selected ``q``."""
    if not 0 < gamma <= 1:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    return _bundle(spec, int(k), float(gamma), int(samples), int(seed))


def select_q(r, k: int, gamma: float, spec: MeanFunctionSpec):
    """Dynamic choice of how many of the ``k`` largest entries of ``r`` to use.

    Returns ``(q, Omega_q, Omega_k)`` where ``Omega_i`` is the (sorted) index
    set of the ``i`` largest magnitudes.  ``q`` is the smallest ``i`` with
    ``f(z_i) >= gamma * f(z_k)``; ``z_i`` holds the ``k`` largest magnitudes
    in descending order, divided by their norm, with positions after ``i``
    zeroed.
    """
    r = np.asarray(r, dtype=np.float64)
    if not 1 <= k <= r.shape[0]:
        raise ValueError(f"k={k} outside [1, {r.shape[0]}]")
    order = magnitude_order(r)[:k]
    a = np.abs(r[order])
    if a[0] == 0.0:
        raise ZeroDirectionError("the k largest entries of r are all zero")
    a = a / a[0]  # rescale first so tiny entries cannot underflow the norm
    z = a / np.linalg.norm(a)
    theta = spec.weights(k)
    Z = np.tril(np.broadcast_to(z, (k, k)))  # row i keeps the first i+1 entries
    vals = _f(spec, Z, theta)
    target = gamma * vals[-1]
    q = int(np.argmax(vals >= target)) + 1
    if vals[q - 1] < target:  # unreachable unless f misbehaves numerically
        q = k
    return q, np.sort(order[:q]), np.sort(order)
