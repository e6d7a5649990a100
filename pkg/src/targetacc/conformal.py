"""Split-conformal quantile calibration and prediction-set construction.

The quantile rule is the ceiling-based order statistic: for a level q and m
calibration scores, the threshold is the clamp(ceil(q*m), 1, m)-th smallest
score. The conformal level itself is ceil(alpha*(m+1))/m, which may exceed 1
for large alpha; the clamp then selects the maximum order statistic rather
than raising, because high source accuracies feed such levels routinely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import EmptyInput, NonFiniteValue, ValueOutOfRange

# Absolute slack under ceil() so that levels that are mathematically integral
# but carry float dust (q = k/m round-tripped through division) do not
# overshoot by one order statistic.
_CEIL_DUST = 1e-9


def _order_index(q: float, m: int) -> int:
    """1-based order-statistic index clamp(ceil(q*m), 1, m)."""
    return min(max(math.ceil(q * m - _CEIL_DUST), 1), m)


@dataclass(frozen=True)
class ConformalCalibration:
    """Result of calibrating a conformal threshold.

    Attributes
    ----------
    t_hat : float
        The calibrated score threshold (always an element of the
        calibration score multiset).
    alpha : float
        The requested confidence level.
    m : int
        Number of calibration scores.
    quantile_index : int
        The 1-based order statistic actually used, in [1, m].
    """

    t_hat: float
    alpha: float
    m: int
    quantile_index: int


def quantile(scores, q: float) -> float:
    """Ceiling-based empirical quantile of a score vector.

    Sorts ascending and returns the clamp(ceil(q*m), 1, m)-th smallest
    element. Accepts any level q >= 0; levels above 1 clamp to the maximum.

    Raises
    ------
    EmptyInput
        If ``scores`` is empty.
    ValueOutOfRange
        If ``q`` is negative.
    NonFiniteValue
        If any score is NaN or infinite (NaN has no place in a total order).
    """
    arr = np.asarray(scores, dtype=np.float64).ravel()
    if arr.size == 0:
        raise EmptyInput("quantile of an empty score vector")
    if not np.isfinite(q) or q < 0.0:
        raise ValueOutOfRange(f"quantile level must be finite and >= 0, got {q!r}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue("scores must be finite")
    k = _order_index(q, arr.size)
    return float(np.sort(arr)[k - 1])


def conformal_threshold(calibration_scores, alpha: float) -> ConformalCalibration:
    """Calibrate a prediction-set threshold at confidence level alpha.

    Computes the level q = ceil(alpha*(m+1))/m first, then takes the
    ceiling-based quantile of the calibration scores at q (whose clamp
    handles q > 1).
    """
    arr = np.asarray(calibration_scores, dtype=np.float64).ravel()
    if arr.size == 0:
        raise EmptyInput("conformal calibration needs at least one score")
    if not np.isfinite(alpha) or alpha < 0.0 or alpha > 1.0:
        raise ValueOutOfRange(f"alpha must lie in [0, 1], got {alpha!r}")
    m = arr.size
    q = math.ceil(alpha * (m + 1) - _CEIL_DUST) / m
    q = max(q, 0.0)
    t_hat = quantile(arr, q)
    return ConformalCalibration(t_hat=t_hat, alpha=float(alpha), m=m,
                                quantile_index=_order_index(q, m))


def prediction_set(row, t_hat: float) -> np.ndarray:
    """Class indices whose score strictly exceeds the threshold.

    Returns the (possibly empty) ascending index array
    {j : row[j] > t_hat}; callers decide how to handle empty sets.
    """
    return np.flatnonzero(np.asarray(row) > t_hat)
