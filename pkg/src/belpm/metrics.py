"""Prediction error measures."""
from __future__ import annotations

import numpy as np

from .errors import ArgumentError, UndefinedMetricError

_DENOM_FLOOR = 1e-12


def mse(predicted, target) -> float:
    """Mean square error."""
    predicted = np.asarray(predicted, dtype=float)
    target = np.asarray(target, dtype=float)
    if predicted.shape != target.shape or predicted.ndim != 1:
        raise ArgumentError("predicted and target must be equal-length 1-D sequences")
    if len(target) < 1:
        raise ArgumentError("mse needs at least one sample")
    return float(np.mean((target - predicted) ** 2))


def nmse(predicted, target) -> float:
    """Mean square error normalized by the target's variance sum.

    Equals 0 for a perfect predictor and 1 for the constant mean predictor.
    """
    predicted = np.asarray(predicted, dtype=float)
    target = np.asarray(target, dtype=float)
    if predicted.shape != target.shape or predicted.ndim != 1:
        raise ArgumentError("predicted and target must be equal-length 1-D sequences")
    if len(target) < 2:
        raise ArgumentError("nmse needs at least two samples")
    denom = float(np.sum((target - target.mean()) ** 2))
    if denom < _DENOM_FLOOR:
        raise UndefinedMetricError("nmse undefined for a constant target sequence")
    return float(np.sum((target - predicted) ** 2) / denom)
