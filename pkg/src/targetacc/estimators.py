"""Black-box accuracy estimators for unlabeled target data.

Six methods, all operating on prediction-score matrices alone:

* **AC** -- average confidence: mean of the per-sample maximum probability
  on the target set.
* **DOC** -- difference of confidence: source accuracy plus the (absolute,
  by default) gap between target and source average confidence.
* **ATC-MC / ATC-NE** -- average thresholded confidence: fraction of target
  samples whose score (max confidence or negative entropy) strictly exceeds
  a threshold chosen so that the above-threshold fraction on the labeled
  source set equals the source accuracy.
* **CPC-ACC / CPC-AC** -- conformal prediction confidence: calibrate a
  score threshold on source max-confidence values at level alpha (source
  accuracy, or target average confidence), build per-row prediction sets
  {j : p_j > t_hat} on the target, and average each set's mean probability.
  Empty sets fall back to the argmax singleton; occurrences are counted.

All estimators are pure functions of their inputs and return values in
[0, 1].
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .conformal import conformal_threshold
from .core import (
    ClassCountMismatch,
    InvalidConfig,
    LabeledDataset,
    MissingLabels,
    accuracy,
    max_confidence,
    neg_entropy,
    validate_scores,
)


class Method(str, Enum):
    """Estimator identifiers; values double as CLI names."""

    AC = "ac"
    DOC = "doc"
    ATC_MC = "atc-mc"
    ATC_NE = "atc-ne"
    CPC_ACC = "cpc-acc"
    CPC_AC = "cpc-ac"


# Fixed reporting order for tables and reports.
TABLE_ORDER = (Method.ATC_MC, Method.ATC_NE, Method.AC, Method.DOC,
               Method.CPC_ACC, Method.CPC_AC)

SCORE_FUNCTIONS = {
    "max-confidence": max_confidence,
    "neg-entropy": neg_entropy,
}


@dataclass(frozen=True)
class EstimatorOutput:
    """One estimator's accuracy estimate plus its intermediate artifacts.

    ``threshold`` is populated for the ATC and CPC families, ``alpha`` for
    CPC only, ``temperature`` when the pipeline applied temperature scaling,
    ``empty_set_fallbacks`` for CPC (count of target rows whose prediction
    set was empty and fell back to the argmax singleton), and ``clamped``
    when a raw DOC value left [0, 1].
    """

    method: Method
    estimate: float
    threshold: float | None = None
    alpha: float | None = None
    temperature: float | None = None
    source_accuracy: float | None = None
    empty_set_fallbacks: int | None = None
    clamped: bool = False


def _as_scores(data: LabeledDataset | np.ndarray) -> np.ndarray:
    """Probability matrix of a dataset or bare matrix argument."""
    if isinstance(data, LabeledDataset):
        if data.logits:
            raise InvalidConfig(
                "estimators need probability scores; apply a softmax "
                "(calibration.apply_temperature) to logit data first"
            )
        return data.scores
    return validate_scores(data)


def _require_labeled(data, what: str) -> LabeledDataset:
    if not isinstance(data, LabeledDataset):
        raise MissingLabels(f"{what} needs a labeled source dataset")
    return data


def _check_class_counts(source_scores: np.ndarray, target: np.ndarray) -> None:
    if source_scores.shape[1] != target.shape[1]:
        raise ClassCountMismatch(
            f"source has {source_scores.shape[1]} classes, "
            f"target has {target.shape[1]}"
        )


def split_calibration(n: int, cal_fraction: float, seed: int = 0):
    """Deterministic (cal, eval) index split of n source rows.

    ``cal_fraction = 1.0`` (the default) returns the full index range for
    both parts: the whole source set then serves as both the calibration
    set (conformal threshold, temperature fit) and the evaluation set
    (source accuracy, confidence means, ATC thresholds). Fractions below 1
    carve out ceil(cal_fraction * n) rows for calibration under a seeded
    permutation and leave the rest for evaluation.
    """
    if not (0.0 < cal_fraction <= 1.0):
        raise InvalidConfig(f"cal_fraction must lie in (0, 1], got {cal_fraction!r}")
    every = np.arange(n)
    if cal_fraction >= 1.0:
        return every, every
    n_cal = max(1, math.ceil(cal_fraction * n))
    if n_cal >= n:
        return every, every
    rng = np.random.Generator(np.random.Philox(key=seed & 0xFFFFFFFFFFFFFFFF))
    perm = rng.permutation(n)
    return np.sort(perm[:n_cal]), np.sort(perm[n_cal:])


def estimate_ac(target) -> EstimatorOutput:
    """Average confidence: mean per-row maximum probability on the target."""
    scores = _as_scores(target)
    return EstimatorOutput(Method.AC, float(np.mean(max_confidence(scores))))


def estimate_doc(source: LabeledDataset, target, signed: bool = False) -> EstimatorOutput:
    """Difference of confidence between target and source, atop source accuracy.

    The default adds the absolute confidence gap |AC_target - AC_source| to
    the source accuracy (which can only raise the estimate); ``signed=True``
    adds the raw gap instead. Results outside [0, 1] are clamped and
    flagged.
    """
    source = _require_labeled(source, "DOC")
    src_scores = _as_scores(source)
    tgt_scores = _as_scores(target)
    _check_class_counts(src_scores, tgt_scores)

    acc = accuracy(source)
    gap = float(np.mean(max_confidence(tgt_scores))) - float(
        np.mean(max_confidence(src_scores))
    )
    raw = acc + (gap if signed else abs(gap))
    clamped = raw < 0.0 or raw > 1.0
    if clamped:
        warnings.warn(
            f"DOC estimate {raw!r} clamped to [0, 1]", UserWarning, stacklevel=2
        )
    return EstimatorOutput(Method.DOC, float(min(max(raw, 0.0), 1.0)),
                           source_accuracy=acc, clamped=clamped)


def select_atc_threshold(source: LabeledDataset, score_fn: str = "max-confidence") -> float:
    """Score threshold whose above-threshold source fraction matches accuracy.

    With source accuracy a over m samples, the threshold is the
    (m - round(a*m))-th smallest source score (round half to even); when
    round(a*m) = m the threshold is -inf so every target point counts. For
    distinct scores the fraction of source scores strictly above the
    threshold is exactly round(a*m)/m.
    """
    source = _require_labeled(source, "ATC threshold selection")
    scores = SCORE_FUNCTIONS[score_fn](_as_scores(source))
    m = scores.shape[0]
    k = m - int(np.round(accuracy(source) * m))
    if k <= 0:
        return float("-inf")
    return float(np.sort(scores)[k - 1])


def estimate_atc(source: LabeledDataset, target,
                 score_fn: str = "max-confidence") -> EstimatorOutput:
    """Average thresholded confidence: target fraction above the source threshold."""
    if score_fn not in SCORE_FUNCTIONS:
        raise InvalidConfig(f"unknown score function {score_fn!r}")
    source = _require_labeled(source, "ATC")
    tgt_scores = _as_scores(target)
    _check_class_counts(_as_scores(source), tgt_scores)

    threshold = select_atc_threshold(source, score_fn)
    values = SCORE_FUNCTIONS[score_fn](tgt_scores)
    estimate = float(np.mean(values > threshold))
    method = Method.ATC_MC if score_fn == "max-confidence" else Method.ATC_NE
    return EstimatorOutput(method, estimate, threshold=threshold,
                           source_accuracy=accuracy(source))


def estimate_cpc(source, target, variant: str = "acc",
                 calibration: LabeledDataset | np.ndarray | None = None) -> EstimatorOutput:
    """Conformal prediction confidence on the target set.

    Calibrates a threshold t_hat on source max-confidence scores at level
    alpha = source accuracy (``variant="acc"``) or alpha = target average
    confidence (``variant="ac"``), forms each target row's prediction set
    {j : p_j > t_hat}, and averages the mean probability inside each set.
    A row whose set is empty falls back to the argmax singleton; the count
    of such rows is reported.

    ``calibration`` optionally supplies a separate calibration sample for
    t_hat (defaults to ``source`` itself).
    """
    if variant not in ("acc", "ac"):
        raise InvalidConfig(f"unknown CPC variant {variant!r}")
    tgt_scores = _as_scores(target)

    source_acc = None
    if variant == "acc":
        labeled = _require_labeled(source, "CPC-ACC")
        source_acc = accuracy(labeled)
        alpha = source_acc
    else:
        alpha = float(np.mean(max_confidence(tgt_scores)))

    cal = source if calibration is None else calibration
    cal_scores = _as_scores(cal)
    _check_class_counts(cal_scores, tgt_scores)

    calib = conformal_threshold(max_confidence(cal_scores), alpha)

    mask = tgt_scores > calib.t_hat
    sizes = mask.sum(axis=1)
    empty = sizes == 0
    fallback_values = max_confidence(tgt_scores)
    with np.errstate(invalid="ignore"):
        set_means = (tgt_scores * mask).sum(axis=1) / np.maximum(sizes, 1)
    row_values = np.where(empty, fallback_values, set_means)

    method = Method.CPC_ACC if variant == "acc" else Method.CPC_AC
    return EstimatorOutput(
        method,
        float(np.mean(row_values)),
        threshold=calib.t_hat,
        alpha=float(alpha),
        source_accuracy=source_acc,
        empty_set_fallbacks=int(np.count_nonzero(empty)),
    )


def estimate_all(source, target, methods=TABLE_ORDER, *, doc_signed: bool = False,
                 cal_fraction: float = 1.0, seed: int = 0,
                 temperature: float | None = None) -> list[EstimatorOutput]:
    """Run a set of estimators and return outputs in fixed table order.

    ``source`` may be a :class:`LabeledDataset` or, when only label-free
    methods (AC, CPC-AC) are requested, a bare probability matrix.
    ``cal_fraction`` splits the source deterministically under ``seed``:
    the calibration part feeds the conformal threshold, the evaluation part
    feeds accuracies, confidence means, and ATC thresholds (see
    :func:`split_calibration`). ``temperature`` is recorded on every output
    when the caller has already applied temperature scaling upstream.
    """
    methods = [Method(m) for m in methods]
    ordered = [m for m in TABLE_ORDER if m in methods]
    tgt_scores = _as_scores(target)

    cal_part = acc_part = source
    if isinstance(source, LabeledDataset):
        cal_idx, acc_idx = split_calibration(source.n, cal_fraction, seed)
        if len(cal_idx) != source.n:
            cal_part = source.subset(cal_idx)
            acc_part = source.subset(acc_idx)

    outputs = []
    for method in ordered:
        if method is Method.AC:
            out = estimate_ac(tgt_scores)
        elif method is Method.DOC:
            out = estimate_doc(acc_part, tgt_scores, signed=doc_signed)
        elif method is Method.ATC_MC:
            out = estimate_atc(acc_part, tgt_scores, "max-confidence")
        elif method is Method.ATC_NE:
            out = estimate_atc(acc_part, tgt_scores, "neg-entropy")
        elif method is Method.CPC_ACC:
            out = estimate_cpc(acc_part, tgt_scores, "acc", calibration=cal_part)
        else:
            out = estimate_cpc(acc_part, tgt_scores, "ac", calibration=cal_part)
        if temperature is not None:
            out = replace(out, temperature=float(temperature))
        outputs.append(out)
    return outputs
