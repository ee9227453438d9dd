"""Principal branch of the Lambert W function (Halley iteration)."""

from __future__ import annotations

import math

import numpy as np

_BRANCH = -1.0 / math.e


def _initial(z: np.ndarray) -> np.ndarray:
    w = np.empty_like(z)
    near = z < -0.25
    p = np.sqrt(np.maximum(2.0 * (math.e * z[near] + 1.0), 0.0))
    w[near] = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    mid = ~near & (z <= math.e)
    w[mid] = np.log1p(z[mid]) * (1.0 - np.log1p(np.log1p(z[mid])) / (2.0 + np.log1p(z[mid])))
    big = z > math.e
    l1 = np.log(z[big])
    l2 = np.log(l1)
    w[big] = l1 - l2 + l2 / l1
    return w


def lambert_w0(z):
    """W0(z) for real ``z >= -1/e``, scalar or array.

    Halley steps from a branch-aware starting point; converges to machine
    precision in a handful of iterations.
    """
    arr = np.asarray(z, dtype=float)
    scalar = arr.ndim == 0
    zz = np.atleast_1d(arr).astype(float)
    if np.any(np.isnan(zz)) or np.any(zz < _BRANCH - 1e-15):
        raise ValueError("lambert_w0 is defined for z >= -1/e")
    zz = np.maximum(zz, _BRANCH)
    w = _initial(zz)
    for _ in range(64):
        ew = np.exp(w)
        f = w * ew - zz
        wp1 = w + 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
            step = np.where(np.abs(wp1) > 1e-300, f / denom, 0.0)
        step = np.where(np.isfinite(step), step, 0.0)
        w = w - step
        if np.all(np.abs(step) <= 1e-15 * (1.0 + np.abs(w))):
            break
    w = np.where(zz == 0.0, 0.0, w)
    return float(w[0]) if scalar else w


def lambert_w0_of_exp(log_z):
    """W0(exp(log_z)) without forming ``exp(log_z)``; safe for huge arguments."""
    lz = np.atleast_1d(np.asarray(log_z, dtype=float))
    out = np.empty_like(lz)
    small = lz < 700.0
    out[small] = lambert_w0(np.exp(lz[small]))
    if np.any(~small):
        # solve w + ln w = log_z by Newton
        t = lz[~small]
        w = t - np.log(t)
        for _ in range(50):
            step = (w + np.log(w) - t) / (1.0 + 1.0 / w)
            w = w - step
            if np.all(np.abs(step) <= 1e-15 * w):
                break
        out[~small] = w
    return float(out[0]) if np.ndim(log_z) == 0 else out
