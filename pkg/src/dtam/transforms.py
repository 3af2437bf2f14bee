"""Orthonormal 1-D discrete wavelet transform with periodic boundaries.

Coefficients are laid out ``[cA_L, cD_L, cD_{L-1}, ..., cD_1]`` where ``L``
is the number of levels, so the coarse approximation comes first.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

_S3 = math.sqrt(3.0)
LOWPASS = {
    "haar": np.array([1.0, 1.0]) / math.sqrt(2.0),
    "db2": np.array([1 + _S3, 3 + _S3, 3 - _S3, 1 - _S3]) / (4 * math.sqrt(2.0)),
}


class Wavelet(str, enum.Enum):
    HAAR = "haar"
    DB2 = "db2"


@dataclass(frozen=True)
class WaveletSpec:
    family: Wavelet = Wavelet.HAAR
    levels: int = 1

    def __post_init__(self):
        object.__setattr__(self, "family", Wavelet(self.family))
        if self.levels < 1:
            raise ValueError("levels must be positive")

    def check_length(self, n: int):
        if n < 2 ** self.levels or n % 2 ** self.levels:
            raise ValueError(f"length {n} is not a positive multiple of 2^{self.levels}")


def _filters(spec):
    h = LOWPASS[spec.family.value]
    g = h[::-1] * (-1.0) ** np.arange(h.size)
    return h, g


def _taps(n, L):
    # periodic indices (2i + j) mod n, shape (n/2, L)
    return (2 * np.arange(n // 2)[:, None] + np.arange(L)[None, :]) % n


def dwt(signal, spec: WaveletSpec) -> np.ndarray:
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("signal must be 1-D")
    spec.check_length(x.shape[0])
    h, g = _filters(spec)
    details = []
    a = x
    for _ in range(spec.levels):
        seg = a[_taps(a.shape[0], h.size)]
        details.append(seg @ g)
        a = seg @ h
    return np.concatenate([a] + details[::-1])


def idwt(coeffs, spec: WaveletSpec) -> np.ndarray:
    c = np.asarray(coeffs, dtype=np.float64)
    if c.ndim != 1:
        raise ValueError("coefficients must be 1-D")
    n = c.shape[0]
    spec.check_length(n)
    h, g = _filters(spec)
    size = n >> spec.levels
    a = c[:size]
    pos = size
    for _ in range(spec.levels):
        d = c[pos:pos + size]
        pos += size
        out = np.zeros(2 * size)
        idx = _taps(2 * size, h.size)
        np.add.at(out, idx, a[:, None] * h[None, :] + d[:, None] * g[None, :])
        a = out
        size *= 2
    return a


def wavelet_matrix(n: int, spec: WaveletSpec) -> np.ndarray:
    """Analysis matrix ``Phi`` with ``dwt(s) == Phi @ s``; ``Phi.T`` synthesises."""
    spec.check_length(n)
    return np.column_stack([dwt(e, spec) for e in np.eye(n)])
