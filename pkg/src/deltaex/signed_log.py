"""Signed log-domain arithmetic.

A value v is stored as (sign, log|v|) so that sums of terms whose magnitudes
range over hundreds of orders of magnitude can be accumulated without
underflow. The canonical zero is (0, -inf).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["SignedLogValue", "signed_logsumexp", "signed_logsumexp_batch"]


@dataclass(frozen=True)
class SignedLogValue:
    sign: int
    log_abs: float

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or 1, got {self.sign}")
        if (self.sign == 0) != (self.log_abs == -math.inf):
            raise ValueError("canonical zero requires sign=0 and log_abs=-inf")

    @staticmethod
    def zero() -> "SignedLogValue":
        return SignedLogValue(0, -math.inf)

    @classmethod
    def from_real(cls, x: float) -> "SignedLogValue":
        if x == 0.0:
            return cls.zero()
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    def to_real(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_abs)

    def __mul__(self, other: "SignedLogValue") -> "SignedLogValue":
        if self.sign == 0 or other.sign == 0:
            return SignedLogValue.zero()
        return SignedLogValue(self.sign * other.sign, self.log_abs + other.log_abs)

    def __neg__(self) -> "SignedLogValue":
        return SignedLogValue(-self.sign, self.log_abs)


def signed_logsumexp(signs, logs) -> SignedLogValue:
    """Sum of terms sign_i * exp(log_i), returned as a SignedLogValue.

    Uses a max-shift so cancellation between large terms is handled at
    float precision relative to the largest magnitude.
    """
    signs = np.asarray(signs, dtype=float)
    logs = np.asarray(logs, dtype=float)
    if signs.shape != logs.shape:
        raise ValueError("signs and logs must have equal shapes")
    live = signs != 0
    if not live.any():
        return SignedLogValue.zero()
    shift = logs[live].max()
    if shift == -math.inf:
        return SignedLogValue.zero()
    total = float(np.sum(signs[live] * np.exp(logs[live] - shift)))
    if total == 0.0:
        return SignedLogValue.zero()
    return SignedLogValue(1 if total > 0 else -1, shift + math.log(abs(total)))


def signed_logsumexp_batch(signs, logs, axis: int = -1):
    """Vectorized signed log-sum-exp along ``axis``.

    Returns (sign array, log-magnitude array); entries that cancel exactly
    come back as (0, -inf).
    """
    signs = np.asarray(signs, dtype=float)
    logs = np.asarray(logs, dtype=float)
    masked = np.where(signs != 0, logs, -np.inf)
    shift = np.max(masked, axis=axis, keepdims=True)
    safe_shift = np.where(np.isfinite(shift), shift, 0.0)
    total = np.sum(signs * np.exp(masked - safe_shift), axis=axis)
    shift = np.squeeze(safe_shift, axis=axis)
    out_sign = np.sign(total).astype(np.int8)
    with np.errstate(divide="ignore"):
        out_log = np.where(total != 0.0, shift + np.log(np.abs(total)), -np.inf)
    return out_sign, out_log
