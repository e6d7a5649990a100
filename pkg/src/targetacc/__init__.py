"""targetacc: estimate a black-box classifier's accuracy on unlabeled data.

Given only prediction-score matrices (probabilities or logits) from a
labeled source sample and an unlabeled target sample, the estimators here
predict the classifier's target accuracy: average confidence (AC),
difference of confidence (DOC), average thresholded confidence (ATC-MC /
ATC-NE), and conformal prediction confidence (CPC-ACC / CPC-AC), with
optional temperature scaling. A seeded synthetic generator provides
ground-truth data for benchmarking the estimators under controlled shift.
"""

from .calibration import (
    DegenerateDataWarning,
    TemperatureFit,
    apply_temperature,
    fit_temperature,
    negative_log_likelihood,
    recover_logits,
    softmax,
)
from .conformal import (
    ConformalCalibration,
    conformal_threshold,
    prediction_set,
    quantile,
)
from .core import (
    BadShape,
    ClassCountMismatch,
    EmptyInput,
    InvalidConfig,
    LabelOutOfRange,
    LabeledDataset,
    MissingLabels,
    NonFiniteValue,
    RowSumViolation,
    ValidationError,
    ValueOutOfRange,
    accuracy,
    max_confidence,
    neg_entropy,
    validate_logits,
    validate_scores,
)
from .estimators import (
    TABLE_ORDER,
    EstimatorOutput,
    Method,
    estimate_ac,
    estimate_all,
    estimate_atc,
    estimate_cpc,
    estimate_doc,
    select_atc_threshold,
    split_calibration,
)
from .io import (
    EvaluationReport,
    MultiRunReport,
    ParseError,
    PredictionFile,
    evaluate,
    read_predictions,
    run_calibrate,
    run_estimate,
    run_synth,
    run_synth_estimate,
    write_predictions,
)
from .synth import SynthConfig, SynthOutput, generate, shift_preset

__version__ = "0.1.0"
