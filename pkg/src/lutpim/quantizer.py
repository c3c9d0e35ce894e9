"""Uniform affine quantization r = S*(q - Z) for N in {4, 8, 16}, plus calibration.

Weights use the symmetric scheme (Z fixed at mid-range); activations use
asymmetric min-max calibration. Rounding is half-even throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SUPPORTED_BITS = (4, 8, 16)


class CalibrationError(ValueError):
    """Empty or non-finite calibration input."""


@dataclass(frozen=True)
class QuantParams:
    scale: float
    zero_point: int
    bits: int
    symmetric: bool = False

    def __post_init__(self):
        if self.bits not in SUPPORTED_BITS:
            raise ValueError(f"bits must be one of {SUPPORTED_BITS}, got {self.bits}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")
        if not 0 <= self.zero_point <= self.qmax:
            raise ValueError(f"zero_point {self.zero_point} outside [0, {self.qmax}]")
        if self.symmetric and self.zero_point != 1 << (self.bits - 1):
            raise ValueError("symmetric params require mid-range zero_point")

    @property
    def qmax(self) -> int:
        return (1 << self.bits) - 1


@dataclass(frozen=True)
class QuantTensor:
    data: np.ndarray
    shape: tuple[int, ...]
    params: QuantParams

    def __post_init__(self):
        if int(np.prod(self.shape)) != self.data.size:
            raise ValueError("element count does not match shape")
        if self.data.size and (self.data.min() < 0 or self.data.max() > self.params.qmax):
            raise ValueError("quantized values outside the N-bit range")


def calibrate(values, bits: int, symmetric: bool = False) -> QuantParams:
    """Min-max affine calibration; degenerate ranges fall back to scale 1."""
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise CalibrationError("cannot calibrate from an empty value set")
    if not np.all(np.isfinite(arr)):
        raise CalibrationError("calibration values must be finite")
    qmax = (1 << bits) - 1
    if symmetric:
        peak = float(np.abs(arr).max())
        half = (1 << (bits - 1)) - 1
        scale = peak / half if peak > 0 else 1.0
        return QuantParams(scale=scale, zero_point=1 << (bits - 1), bits=bits, symmetric=True)
    lo, hi = float(arr.min()), float(arr.max())
    if hi == lo:
        scale = 1.0
    else:
        scale = (hi - lo) / qmax
    zp = int(min(max(round(-lo / scale), 0), qmax))
    return QuantParams(scale=scale, zero_point=zp, bits=bits, symmetric=False)


def quantize(r, p: QuantParams):
    """q = clamp(round_half_even(r/S) + Z, 0, 2^N - 1)."""
    arr = np.asarray(r, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("cannot quantize non-finite values")
    q = np.clip(np.rint(arr / p.scale) + p.zero_point, 0, p.qmax)
    q = q.astype(np.int64)
    return int(q) if np.isscalar(r) or arr.ndim == 0 else q


def dequantize(q, p: QuantParams):
    """D(q) = S * (q - Z)."""
    arr = np.asarray(q, dtype=np.int64)
    if arr.size and (arr.min() < 0 or arr.max() > p.qmax):
        raise ValueError(f"quantized value outside [0, {p.qmax}]")
    r = p.scale * (arr.astype(np.float64) - p.zero_point)
    return float(r) if np.isscalar(q) or arr.ndim == 0 else r


def quantize_tensor(values: np.ndarray, bits: int, symmetric: bool = False) -> QuantTensor:
    arr = np.asarray(values, dtype=np.float64)
    params = calibrate(arr, bits, symmetric=symmetric)
    return QuantTensor(data=quantize(arr, params), shape=tuple(arr.shape), params=params)
