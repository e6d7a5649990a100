"""Prediction-file formats, evaluation reports, and the estimation pipeline.

File format: UTF-8 CSV, first line a header. Score columns are named
``p0..p{K-1}`` (probabilities) or ``l0..l{K-1}`` (logits); an optional
leading ``label`` column holds base-10 integer class indices. Floats are
written with shortest round-trip decimal text (up to 17 significant
digits), so write -> read reproduces matrices exactly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .calibration import apply_temperature, fit_temperature, recover_logits
from .core import (
    InvalidConfig,
    LabeledDataset,
    LabelOutOfRange,
    MissingLabels,
    ValidationError,
    accuracy,
    validate_logits,
    validate_scores,
)
from .estimators import (
    TABLE_ORDER,
    EstimatorOutput,
    Method,
    estimate_all,
    split_calibration,
)
from .synth import SynthConfig, SynthOutput, generate


class ParseError(ValidationError):
    """A prediction file has a malformed header or data row."""

    def __init__(self, message: str, line: int | None = None,
                 column: str | None = None):
        at = ""
        if line is not None:
            at = f" (line {line})" if column is None else f" (line {line}, column {column})"
        super().__init__(message + at)
        self.line = line
        self.column = column


@dataclass(frozen=True)
class PredictionFile:
    """Parsed prediction file: score matrix plus optional labels."""

    path: str
    kind: str  # "probabilities" | "logits"
    scores: np.ndarray
    labels: np.ndarray | None

    @property
    def n(self) -> int:
        return self.scores.shape[0]

    @property
    def num_classes(self) -> int:
        return self.scores.shape[1]

    @property
    def has_labels(self) -> bool:
        return self.labels is not None

    def to_dataset(self) -> LabeledDataset:
        if self.labels is None:
            raise MissingLabels(f"{self.path} has no label column")
        return LabeledDataset(self.scores, self.labels, logits=self.kind == "logits")


def _parse_header(fields: list[str], path: str) -> tuple[bool, str, int]:
    if not fields:
        raise ParseError(f"{path}: empty header", line=1)
    has_labels = fields[0].strip() == "label"
    score_fields = fields[1:] if has_labels else fields
    if not score_fields:
        raise ParseError(f"{path}: header has no score columns", line=1)
    prefix = score_fields[0][:1]
    if prefix not in ("p", "l"):
        raise ParseError(
            f"{path}: score columns must be named p0..pK-1 or l0..lK-1, "
            f"got {score_fields[0]!r}", line=1)
    expected = [f"{prefix}{i}" for i in range(len(score_fields))]
    if [f.strip() for f in score_fields] != expected:
        raise ParseError(
            f"{path}: expected score columns {expected}, got {score_fields}", line=1)
    kind = "probabilities" if prefix == "p" else "logits"
    return has_labels, kind, len(score_fields)


def read_predictions(path, kind: str | None = None,
                     renormalize: bool = False) -> PredictionFile:
    """Read a prediction CSV into a validated matrix plus optional labels.

    The score kind is inferred from the header column names; passing
    ``kind`` asserts it (ParseError on mismatch). ``renormalize`` forwards
    to probability validation.
    """
    path = str(path)
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: file is empty", line=1) from None
        has_labels, file_kind, k = _parse_header(header, path)
        if kind is not None and kind != file_kind:
            raise ParseError(f"{path}: expected {kind} columns, found {file_kind}",
                             line=1)
        expected_fields = k + (1 if has_labels else 0)

        labels: list[int] = []
        rows: list[list[float]] = []
        for line_no, fields in enumerate(reader, start=2):
            if not fields:
                continue  # ignore trailing blank lines
            if len(fields) != expected_fields:
                raise ParseError(
                    f"{path}: expected {expected_fields} fields, got {len(fields)}",
                    line=line_no)
            offset = 0
            if has_labels:
                try:
                    label = int(fields[0])
                except ValueError:
                    raise ParseError(f"{path}: bad label {fields[0]!r}",
                                     line=line_no, column="label") from None
                if not 0 <= label < k:
                    raise LabelOutOfRange(
                        f"{path}: label {label} outside [0, {k}) at line {line_no}")
                labels.append(label)
                offset = 1
            row = []
            for j, field in enumerate(fields[offset:]):
                try:
                    row.append(float(field))
                except ValueError:
                    prefix = "p" if file_kind == "probabilities" else "l"
                    raise ParseError(f"{path}: bad value {field!r}",
                                     line=line_no, column=f"{prefix}{j}") from None
            rows.append(row)

    if not rows:
        raise ParseError(f"{path}: no data rows", line=2)
    matrix = np.asarray(rows, dtype=np.float64)
    if file_kind == "probabilities":
        matrix = validate_scores(matrix, renormalize=renormalize)
    else:
        matrix = validate_logits(matrix)
    return PredictionFile(
        path=path, kind=file_kind, scores=matrix,
        labels=np.asarray(labels, dtype=np.int64) if has_labels else None)


def write_predictions(path, scores, labels=None, logits: bool = False) -> None:
    """Write a prediction CSV (see module docstring for the format)."""
    matrix = validate_logits(scores) if logits else validate_scores(scores)
    prefix = "l" if logits else "p"
    k = matrix.shape[1]
    header = [f"{prefix}{i}" for i in range(k)]
    if labels is not None:
        header = ["label"] + header
    with open(path, "w", newline="", encoding="utf-8") as handle:
        handle.write(",".join(header) + "\n")
        for i, row in enumerate(matrix):
            fields = [repr(float(v)) for v in row]
            if labels is not None:
                fields = [str(int(labels[i]))] + fields
            handle.write(",".join(fields) + "\n")


def write_truth(path, cfg: SynthConfig, out: SynthOutput) -> None:
    """Write the ground-truth sidecar (seed, config, true accuracies) as JSON."""
    payload = {
        "seed": cfg.seed,
        "config": asdict(cfg),
        "true_source_accuracy": out.true_source_accuracy,
        "true_target_accuracy": out.true_target_accuracy,
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def read_truth(path) -> dict:
    with open(path, encoding="utf-8") as handle:
        return json.load(handle)


@dataclass(frozen=True)
class EvaluationReport:
    """Per-method estimates with optional ground truth and absolute errors.

    ``absolute_errors`` is keyed by method name and present exactly when
    ``true_target_accuracy`` is; each entry is |estimate - truth| as stored.
    """

    outputs: tuple[EstimatorOutput, ...]
    true_target_accuracy: float | None = None
    absolute_errors: dict | None = None
    seed: int | None = None
    temperature: float | None = None
    cal_fraction: float = 1.0
    empty_set_fallbacks: int = 0

    def __post_init__(self):
        if (self.true_target_accuracy is None) != (self.absolute_errors is None):
            raise InvalidConfig(
                "absolute_errors must be present exactly when "
                "true_target_accuracy is")

    def to_json(self) -> str:
        payload = {
            "methods": [
                {**asdict(out), "method": out.method.value}
                for out in self.outputs
            ],
            "true_target_accuracy": self.true_target_accuracy,
            "absolute_errors": self.absolute_errors,
            "seed": self.seed,
            "temperature": self.temperature,
            "cal_fraction": self.cal_fraction,
            "empty_set_fallbacks": self.empty_set_fallbacks,
        }
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "EvaluationReport":
        payload = json.loads(text)
        outputs = tuple(
            EstimatorOutput(**{**entry, "method": Method(entry["method"])})
            for entry in payload["methods"])
        return cls(
            outputs=outputs,
            true_target_accuracy=payload["true_target_accuracy"],
            absolute_errors=payload["absolute_errors"],
            seed=payload["seed"],
            temperature=payload["temperature"],
            cal_fraction=payload["cal_fraction"],
            empty_set_fallbacks=payload["empty_set_fallbacks"],
        )

    def to_csv(self) -> str:
        lines = ["method,estimate,true_target_accuracy,absolute_error"]
        for out in self.outputs:
            truth = "" if self.true_target_accuracy is None else repr(self.true_target_accuracy)
            err = ""
            if self.absolute_errors is not None:
                err = repr(self.absolute_errors[out.method.value])
            lines.append(f"{out.method.value},{out.estimate!r},{truth},{err}")
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        rows = [("method", "estimate", "truth", "abs error")]
        for out in self.outputs:
            truth = err = "-"
            if self.true_target_accuracy is not None:
                truth = f"{self.true_target_accuracy:.4f}"
                err = f"{self.absolute_errors[out.method.value]:.4f}"
            rows.append((out.method.value, f"{out.estimate:.4f}", truth, err))
        widths = [max(len(row[i]) for row in rows) for i in range(4)]
        lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
                 for row in rows]
        meta = []
        if self.temperature is not None:
            meta.append(f"temperature={self.temperature:.4f}")
        if self.cal_fraction != 1.0:
            meta.append(f"cal_fraction={self.cal_fraction}")
        if self.empty_set_fallbacks:
            meta.append(f"empty_set_fallbacks={self.empty_set_fallbacks}")
        if self.seed is not None:
            meta.append(f"seed={self.seed}")
        if meta:
            lines.append("(" + ", ".join(meta) + ")")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class MultiRunReport:
    """Mean and sample standard deviation of absolute error across runs."""

    methods: tuple[str, ...]
    mean_absolute_error: dict
    std_absolute_error: dict
    runs: int
    seed: int
    temperature_scale: bool

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    def to_csv(self) -> str:
        lines = ["method,mean_absolute_error,std_absolute_error,runs"]
        for m in self.methods:
            lines.append(f"{m},{self.mean_absolute_error[m]!r},"
                         f"{self.std_absolute_error[m]!r},{self.runs}")
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        rows = [("method", "abs error (mean ± std)")]
        for m in self.methods:
            rows.append((m, f"{self.mean_absolute_error[m]:.4f} ± "
                            f"{self.std_absolute_error[m]:.4f}"))
        width = max(len(r[0]) for r in rows)
        lines = [f"{r[0].ljust(width)}  {r[1]}" for r in rows]
        lines.append(f"({self.runs} runs, seed={self.seed}, "
                     f"temperature_scale={self.temperature_scale})")
        return "\n".join(lines) + "\n"


def resolve_methods(spec) -> list[Method]:
    """Normalize a method selection ('all', names, or Methods) to table order."""
    if spec is None or spec == "all" or spec == ["all"]:
        return list(TABLE_ORDER)
    wanted = set()
    for item in spec if isinstance(spec, (list, tuple, set)) else [spec]:
        try:
            wanted.add(Method(item))
        except ValueError:
            raise InvalidConfig(f"unknown method {item!r}") from None
    return [m for m in TABLE_ORDER if m in wanted]


def evaluate(source: PredictionFile | LabeledDataset, target: PredictionFile | np.ndarray,
             methods="all", *, temperature_scale: bool = False,
             doc_signed: bool = False, cal_fraction: float = 1.0,
             renormalize: bool = False, seed: int = 0,
             true_target_accuracy: float | None = None) -> EvaluationReport:
    """Run the estimation pipeline on in-memory data and assemble a report.

    Logit inputs are converted to probabilities by a plain softmax, or by a
    temperature-scaled softmax when ``temperature_scale`` is set (the
    temperature is fitted on the source calibration split). Probability
    inputs under temperature scaling go through surrogate-logit recovery.
    """
    methods = resolve_methods(methods)

    def pieces(data):
        if isinstance(data, PredictionFile):
            return data.scores, data.labels, data.kind == "logits"
        if isinstance(data, LabeledDataset):
            return data.scores, data.labels, data.logits
        matrix = np.asarray(data, dtype=np.float64)
        return matrix, None, False

    src_scores, src_labels, src_is_logits = pieces(source)
    tgt_scores, tgt_labels, tgt_is_logits = pieces(target)

    temperature = None
    if temperature_scale:
        src_logits = src_scores if src_is_logits else recover_logits(
            validate_scores(src_scores, renormalize=renormalize))
        tgt_logits = tgt_scores if tgt_is_logits else recover_logits(
            validate_scores(tgt_scores, renormalize=renormalize))
        if src_labels is None:
            raise MissingLabels("temperature scaling needs a labeled source")
        cal_idx, _ = split_calibration(src_logits.shape[0], cal_fraction, seed)
        fit = fit_temperature(src_logits[cal_idx], np.asarray(src_labels)[cal_idx])
        temperature = fit.temperature
        src_probs = apply_temperature(src_logits, temperature)
        tgt_probs = apply_temperature(tgt_logits, temperature)
    else:
        src_probs = (apply_temperature(src_scores, 1.0) if src_is_logits
                     else validate_scores(src_scores, renormalize=renormalize))
        tgt_probs = (apply_temperature(tgt_scores, 1.0) if tgt_is_logits
                     else validate_scores(tgt_scores, renormalize=renormalize))

    if src_labels is not None:
        src_data = LabeledDataset(src_probs, src_labels)
    else:
        src_data = src_probs

    outputs = estimate_all(src_data, tgt_probs, methods, doc_signed=doc_signed,
                           cal_fraction=cal_fraction, seed=seed,
                           temperature=temperature)

    truth = true_target_accuracy
    if truth is None and tgt_labels is not None:
        truth = accuracy(LabeledDataset(tgt_probs, tgt_labels))
    errors = None
    if truth is not None:
        errors = {out.method.value: abs(out.estimate - truth) for out in outputs}

    fallbacks = sum(out.empty_set_fallbacks or 0 for out in outputs)
    return EvaluationReport(
        outputs=tuple(outputs), true_target_accuracy=truth,
        absolute_errors=errors, seed=seed, temperature=temperature,
        cal_fraction=cal_fraction, empty_set_fallbacks=fallbacks)


def run_estimate(source_path, target_path, methods="all", *,
                 temperature_scale: bool = False, doc_signed: bool = False,
                 cal_fraction: float = 1.0, renormalize: bool = False,
                 seed: int = 0) -> EvaluationReport:
    """Read prediction files and run the estimation pipeline on them."""
    source = read_predictions(source_path, renormalize=renormalize)
    target = read_predictions(target_path, renormalize=renormalize)
    return evaluate(source, target, methods, temperature_scale=temperature_scale,
                    doc_signed=doc_signed, cal_fraction=cal_fraction,
                    renormalize=renormalize, seed=seed)


def run_synth_estimate(cfg: SynthConfig, methods="all", runs: int = 1, *,
                       temperature_scale: bool = False, doc_signed: bool = False,
                       cal_fraction: float = 1.0) -> tuple[list[EvaluationReport], MultiRunReport]:
    """Generate-and-estimate over ``runs`` seeded replicates of a config.

    Run r uses seed ``cfg.seed + r``. Every replicate knows its true target
    accuracy, so the aggregate reports mean ± sample standard deviation of
    absolute error per method (std is 0 when ``runs == 1``).
    """
    if runs < 1:
        raise InvalidConfig(f"runs must be >= 1, got {runs}")
    method_list = resolve_methods(methods)
    reports = []
    for r in range(runs):
        out = generate(replace(cfg, seed=cfg.seed + r))
        report = evaluate(
            out.source, out.target, method_list,
            temperature_scale=temperature_scale, doc_signed=doc_signed,
            cal_fraction=cal_fraction, seed=cfg.seed + r,
            true_target_accuracy=out.true_target_accuracy)
        reports.append(report)

    names = [m.value for m in method_list]
    mean_err, std_err = {}, {}
    for name in names:
        errs = np.array([rep.absolute_errors[name] for rep in reports])
        mean_err[name] = float(np.mean(errs))
        std_err[name] = float(np.std(errs, ddof=1)) if runs > 1 else 0.0
    aggregate = MultiRunReport(
        methods=tuple(names), mean_absolute_error=mean_err,
        std_absolute_error=std_err, runs=runs, seed=cfg.seed,
        temperature_scale=temperature_scale)
    return reports, aggregate


def run_synth(cfg: SynthConfig, out_dir) -> dict:
    """Generate a synthetic pair and write source, target, and truth files.

    Returns the written paths. Output is byte-identical across runs with
    the same config.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = generate(cfg)
    paths = {
        "source": out_dir / "source.csv",
        "target": out_dir / "target.csv",
        "truth": out_dir / "truth.json",
    }
    write_predictions(paths["source"], out.source.scores, out.source.labels,
                      logits=True)
    write_predictions(paths["target"], out.target.scores, out.target.labels,
                      logits=True)
    write_truth(paths["truth"], cfg, out)
    return {key: str(value) for key, value in paths.items()}


def run_calibrate(source_path, recover: bool = False):
    """Fit a softmax temperature on a labeled prediction file.

    Logit files are fitted directly. Probability files require
    ``recover=True`` (surrogate-logit recovery); otherwise the request is a
    configuration error.
    """
    source = read_predictions(source_path)
    if source.kind == "probabilities":
        if not recover:
            raise InvalidConfig(
                f"{source_path} holds probabilities; pass --recover-logits to "
                "fit on log-recovered scores")
        logits = recover_logits(source.scores)
    else:
        logits = source.scores
    if source.labels is None:
        raise MissingLabels(f"{source_path} has no label column")
    return fit_temperature(logits, source.labels)
