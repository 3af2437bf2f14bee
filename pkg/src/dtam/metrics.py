"""Reconstruction quality in decibels."""
from __future__ import annotations

import math

import numpy as np


def snr(d, dhat, rtol: float = 0.0) -> float:
    """``20 log10(||d|| / ||d - dhat||)``.

    Returns ``inf`` when ``||d - dhat|| <= rtol * ||d||`` (with the default
    ``rtol=0`` only for an exact match).
    """
    d = np.asarray(d, dtype=np.float64)
    dhat = np.asarray(dhat, dtype=np.float64)
    if d.shape != dhat.shape:
        raise ValueError(f"shape mismatch {d.shape} vs {dhat.shape}")
    ref = float(np.linalg.norm(d))
    if ref == 0.0:
        raise ValueError("SNR is undefined for a zero reference signal")
    err = float(np.linalg.norm(d - dhat))
    if err <= rtol * ref:
        return math.inf
    return 20.0 * math.log10(ref / err)


def psnr(img, imghat, peak: float = 255.0) -> float:
    """``20 log10(peak / sqrt(MSE))``; identical inputs give ``inf``."""
    img = np.asarray(img, dtype=np.float64).ravel()
    imghat = np.asarray(imghat, dtype=np.float64).ravel()
    if img.size == 0:
        raise ValueError("PSNR of an empty image")
    if img.shape != imghat.shape:
        raise ValueError(f"shape mismatch {img.shape} vs {imghat.shape}")
    mse = float(np.mean((img - imghat) ** 2))
    if mse == 0.0:
        return math.inf
    return 20.0 * math.log10(peak / math.sqrt(mse))


def format_db(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.2f}"
