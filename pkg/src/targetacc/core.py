"""Score-matrix validation and the elementary confidence computations shared by every estimator.

A *score matrix* is an (n, K) float64 array of per-sample class probabilities
(each row on the probability simplex); a *logit matrix* is an (n, K) array of
raw pre-softmax scores. Both carry n >= 1 samples over K >= 2 classes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Row sums must land within this absolute tolerance of 1.
ROW_SUM_TOL = 1e-4
# Entries outside [0, 1] by at most this much are treated as floating-point
# dust and clamped; anything larger is a data bug and is rejected.
DUST_TOL = 1e-9


class ValidationError(ValueError):
    """Base class for input-contract violations."""


class BadShape(ValidationError):
    """Matrix is not 2-D, has no rows, or has fewer than two classes."""


class NonFiniteValue(ValidationError):
    """A score, logit, or label is NaN or infinite."""


class ValueOutOfRange(ValidationError):
    """A probability entry lies outside [0, 1] beyond the dust tolerance."""


class RowSumViolation(ValidationError):
    """A probability row does not sum to 1 within tolerance."""


class ClassCountMismatch(ValidationError):
    """Source and target matrices disagree on the number of classes."""


class MissingLabels(ValidationError):
    """An operation that needs labels was given unlabeled data."""


class LabelOutOfRange(ValidationError):
    """A label is not an integer in [0, K)."""


class EmptyInput(ValidationError):
    """An operation that needs at least one value received none."""


class InvalidConfig(ValidationError):
    """A configuration value violates its documented bounds."""


def validate_scores(matrix, renormalize: bool = False) -> np.ndarray:
    """Validate (and lightly repair) a probability score matrix.

    Parameters
    ----------
    matrix : array-like of shape (n, K)
        Per-sample class probabilities. Each row must sum to 1 within
        ``ROW_SUM_TOL``; entries may stray outside [0, 1] by at most
        ``DUST_TOL`` (they are clamped back).
    renormalize : bool, default=False
        When True, rows are divided by their sums instead of having their
        sums checked. Entries must then be nonnegative (within dust) and
        each row sum positive. Off by default so that malformed inputs
        surface as errors rather than being silently repaired.

    Returns
    -------
    np.ndarray
        float64 array of shape (n, K) satisfying all invariants. A matrix
        that is already valid float64 is returned unchanged (same object),
        so validation is idempotent.

    Raises
    ------
    BadShape, NonFiniteValue, ValueOutOfRange, RowSumViolation
    """
    out = np.asarray(matrix, dtype=np.float64)
    if out.ndim != 2:
        raise BadShape(f"expected a 2-D matrix, got {out.ndim}-D")
    n, k = out.shape
    if n < 1:
        raise BadShape("score matrix must have at least one row")
    if k < 2:
        raise BadShape(f"score matrix must have at least two classes, got {k}")
    if not np.all(np.isfinite(out)):
        i, j = np.argwhere(~np.isfinite(out))[0]
        raise NonFiniteValue(f"non-finite score at row {i}, column {j}")

    if renormalize:
        if np.any(out < -DUST_TOL):
            i, j = np.argwhere(out < -DUST_TOL)[0]
            raise ValueOutOfRange(
                f"negative score {out[i, j]!r} at row {i}, column {j}"
            )
        out = np.clip(out, 0.0, None)
        sums = out.sum(axis=1)
        if np.any(sums <= 0.0):
            i = int(np.argwhere(sums <= 0.0)[0][0])
            raise RowSumViolation(f"row {i} sums to {sums[i]!r}, cannot renormalize")
        return out / sums[:, None]

    low = out < -DUST_TOL
    high = out > 1.0 + DUST_TOL
    if np.any(low | high):
        i, j = np.argwhere(low | high)[0]
        raise ValueOutOfRange(
            f"score {out[i, j]!r} at row {i}, column {j} is outside [0, 1]"
        )
    if np.any((out < 0.0) | (out > 1.0)):
        out = np.clip(out, 0.0, 1.0)
    sums = out.sum(axis=1)
    bad = np.abs(sums - 1.0) > ROW_SUM_TOL
    if np.any(bad):
        i = int(np.argwhere(bad)[0][0])
        raise RowSumViolation(
            f"row {i} sums to {sums[i]!r}; expected 1 within {ROW_SUM_TOL}"
            " (pass renormalize=True to rescale)"
        )
    return out


def validate_logits(matrix) -> np.ndarray:
    """Validate a raw logit matrix: 2-D, n >= 1, K >= 2, all entries finite."""
    out = np.asarray(matrix, dtype=np.float64)
    if out.ndim != 2:
        raise BadShape(f"expected a 2-D matrix, got {out.ndim}-D")
    n, k = out.shape
    if n < 1:
        raise BadShape("logit matrix must have at least one row")
    if k < 2:
        raise BadShape(f"logit matrix must have at least two classes, got {k}")
    if not np.all(np.isfinite(out)):
        i, j = np.argwhere(~np.isfinite(out))[0]
        raise NonFiniteValue(f"non-finite logit at row {i}, column {j}")
    return out


def validate_labels(labels, n: int, k: int) -> np.ndarray:
    """Validate integer class labels: length n, every value in [0, K)."""
    out = np.asarray(labels)
    if out.ndim != 1 or out.shape[0] != n:
        raise BadShape(f"expected {n} labels, got shape {out.shape}")
    if not np.issubdtype(out.dtype, np.integer):
        if not np.all(out == np.floor(out)):
            raise LabelOutOfRange("labels must be integers")
        out = out.astype(np.int64)
    else:
        out = out.astype(np.int64)
    if out.size and (out.min() < 0 or out.max() >= k):
        bad = out[(out < 0) | (out >= k)][0]
        raise LabelOutOfRange(f"label {bad} outside [0, {k})")
    return out


@dataclass(frozen=True)
class LabeledDataset:
    """Prediction scores paired with integer class labels.

    ``scores`` holds probabilities by default; set ``logits=True`` when the
    matrix carries raw pre-softmax scores instead. Arrays are validated on
    construction and should not be mutated afterwards.
    """

    scores: np.ndarray
    labels: np.ndarray
    logits: bool = False

    def __post_init__(self):
        if self.logits:
            scores = validate_logits(self.scores)
        else:
            scores = validate_scores(self.scores)
        labels = validate_labels(self.labels, scores.shape[0], scores.shape[1])
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.scores.shape[0]

    @property
    def num_classes(self) -> int:
        return self.scores.shape[1]

    def subset(self, indices) -> "LabeledDataset":
        """Row-subset view of the dataset (used for calibration splits)."""
        return LabeledDataset(self.scores[indices], self.labels[indices], self.logits)


def accuracy(data: LabeledDataset) -> float:
    """Fraction of rows whose argmax matches the label.

    Argmax ties break to the lowest class index. Works for probability and
    logit scores alike (argmax is invariant under softmax).
    """
    predicted = np.argmax(data.scores, axis=1)
    return float(np.mean(predicted == data.labels))


def max_confidence(scores: np.ndarray) -> np.ndarray:
    """Per-row maximum probability; each value lies in [1/K, 1]."""
    return np.max(scores, axis=1)


def neg_entropy(scores: np.ndarray) -> np.ndarray:
    """Per-row negative entropy sum_j p_j * log(p_j), natural log.

    Uses the convention 0 * log(0) = 0, so one-hot rows score exactly 0 (the
    maximum) and uniform rows score -log(K) (the minimum). Higher values mean
    more confident predictions.
    """
    scores = np.asarray(scores, dtype=np.float64)
    safe = np.where(scores > 0.0, scores, 1.0)
    return np.sum(np.where(scores > 0.0, scores * np.log(safe), 0.0), axis=1)
