"""Q8.8 fixed-point helpers shared by the sparse codec and the warp engine."""

from __future__ import annotations

import numpy as np

Q_BITS = 8
Q_ONE = 1 << Q_BITS
Q_MIN = -(1 << 15)
Q_MAX = (1 << 15) - 1


def quantize(t: np.ndarray) -> np.ndarray:
    """Round a real tensor to Q8.8 raw int16 (ties to even, saturating)."""
    raw = np.rint(np.asarray(t, dtype=np.float64) * Q_ONE)
    return np.clip(raw, Q_MIN, Q_MAX).astype(np.int16)


def dequantize(q: np.ndarray) -> np.ndarray:
    """Q8.8 raw values back to float32 (exact: raw / 256)."""
    return np.asarray(q, dtype=np.float32) / np.float32(Q_ONE)


def bilinear_q88(a00: int, a01: int, a10: int, a11: int, u: int, v: int) -> int:
    """One bilinear interpolator evaluation in integer arithmetic.

    a00..a11 are the Q8.8 corner values (a01 right of a00, a10 below, a11
    diagonal); u and v are the 8-bit fractional parts of the source x and y
    coordinates.  Weighted products accumulate at full width; a single final
    shift truncates toward zero back to Q8.8.
    """
    wu0 = Q_ONE - u
    wv0 = Q_ONE - v
    acc = a00 * wu0 * wv0 + a01 * u * wv0 + a10 * wu0 * v + a11 * u * v
    if acc >= 0:
        return acc >> 16
    return -((-acc) >> 16)
