"""Daubechies-4 discrete wavelet transform with symmetric boundary extension.

Single-level analysis pads the signal by (filter length - 1) on each side,
which keeps the decomposition redundant enough for exact reconstruction.
"""

from __future__ import annotations

import numpy as np

# Orthonormal Daubechies-4 scaling filter (8 taps, sum = sqrt(2)).
DB4_REC_LO = np.array(
    [
        0.23037781330885523,
        0.7148465705525415,
        0.6308807679295904,
        -0.02798376941698385,
        -0.18703481171888114,
        0.030841381835986965,
        0.032883011666982945,
        -0.010597401784997278,
    ]
)

_L = DB4_REC_LO.size
# Quadrature-mirror relations for an orthonormal two-channel bank.
DB4_REC_HI = np.array([(-1.0) ** k * DB4_REC_LO[_L - 1 - k] for k in range(_L)])
DB4_DEC_LO = DB4_REC_LO[::-1].copy()
DB4_DEC_HI = DB4_REC_HI[::-1].copy()

FILTER_LENGTH = _L


def _extend_symmetric(x: np.ndarray, pad: int) -> np.ndarray:
    if x.size < pad:
        raise ValueError(f"signal of length {x.size} too short for symmetric pad {pad}")
    left = x[:pad][::-1]
    right = x[-pad:][::-1]
    return np.concatenate([left, x, right])


def dwt_single(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One analysis level: (approximation, detail), each of length (n + L - 1) // 2."""
    x = np.asarray(x, dtype=float)
    if x.size < FILTER_LENGTH:
        raise ValueError(f"signal of length {x.size} shorter than filter length {FILTER_LENGTH}")
    ext = _extend_symmetric(x, FILTER_LENGTH - 1)
    approx = np.convolve(ext, DB4_DEC_LO, mode="valid")[1::2]
    detail = np.convolve(ext, DB4_DEC_HI, mode="valid")[1::2]
    return approx, detail


def idwt_single(approx: np.ndarray, detail: np.ndarray, length: int) -> np.ndarray:
    """Invert one analysis level back to `length` samples."""
    if approx.size != detail.size:
        raise ValueError("approximation and detail lengths differ")
    up_a = np.zeros(2 * approx.size)
    up_d = np.zeros(2 * detail.size)
    up_a[1::2] = approx
    up_d[1::2] = detail
    rec = np.convolve(up_a, DB4_REC_LO) + np.convolve(up_d, DB4_REC_HI)
    offset = FILTER_LENGTH - 1
    return rec[offset : offset + length]


def wavedec(x: np.ndarray, levels: int) -> tuple[np.ndarray, list[np.ndarray], list[int]]:
    """Multi-level decomposition: (approximation, details per level, input lengths per level)."""
    if levels < 1:
        raise ValueError("levels must be a positive integer")
    current = np.asarray(x, dtype=float)
    details: list[np.ndarray] = []
    lengths: list[int] = []
    for _ in range(levels):
        lengths.append(current.size)
        current, detail = dwt_single(current)
        details.append(detail)
    return current, details, lengths


def waverec(approx: np.ndarray, details: list[np.ndarray], lengths: list[int]) -> np.ndarray:
    """Invert wavedec output back to the original signal."""
    current = approx
    for detail, length in zip(reversed(details), reversed(lengths)):
        current = idwt_single(current, detail, length)
    return current
