"""Regression error measures and the STD-normalised closeness ratio."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MetricError(ValueError):
    pass


def _pairs(predicted, true):
    p = np.asarray(predicted, dtype=float).ravel()
    t = np.asarray(true, dtype=float).ravel()
    if p.shape != t.shape:
        raise MetricError(f"length mismatch: {p.size} predictions vs {t.size} truths")
    if p.size == 0:
        raise MetricError("empty prediction set")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(t))):
        raise MetricError("non-finite prediction or truth")
    return p, t


def rmse(predicted, true, *, literal: bool = False) -> float:
    """Root of the mean squared error.

    ``literal=True`` drops the 1/n inside the root (root of the plain sum
    of squares), kept only to audit the unnormalised formula.
    """
    p, t = _pairs(predicted, true)
    err = p - t
    # scale by the largest error so tiny errors do not underflow when squared
    scale = float(np.max(np.abs(err)))
    if scale == 0.0:
        return 0.0
    sse = float(np.sum((err / scale) ** 2))
    if literal:
        return scale * float(np.sqrt(sse))
    return scale * float(np.sqrt(sse / p.size))


def r_squared(predicted, true) -> float:
    """1 - SSE/SST with SST taken about the mean of ``true``; can be negative."""
    p, t = _pairs(predicted, true)
    sst = float(np.sum((t - t.mean()) ** 2))
    if sst <= 0.0:
        raise MetricError("truth values have zero variance; R^2 undefined")
    sse = float(np.sum((p - t) ** 2))
    return 1.0 - sse / sst


def population_std(values, *, ddof: int = 0) -> float:
    v = np.asarray(values, dtype=float).ravel()
    if v.size - ddof <= 0:
        raise MetricError("not enough values for the requested ddof")
    return float(np.std(v, ddof=ddof))


def closeness(rmsecv: float, std: float) -> float:
    """RMSECV as a percentage of the dataset's sugar STD."""
    if not std > 0:
        raise MetricError(f"dataset std must be positive, got {std}")
    if rmsecv < 0:
        raise MetricError(f"rmsecv must be non-negative, got {rmsecv}")
    return 100.0 * rmsecv / std


@dataclass(frozen=True)
class ClosenessScore:
    rmsecv: float
    std: float

    @property
    def closeness(self) -> float:
        return closeness(self.rmsecv, self.std)
