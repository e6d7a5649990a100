"""Command-line interface.

Subcommands::

    targetacc estimate SOURCE TARGET [options]      # files in, report out
    targetacc estimate --synth [synth opts] [options]  # generate-and-estimate
    targetacc synth --out-dir DIR [synth opts]      # write prediction files
    targetacc calibrate SOURCE [--recover-logits]   # print fitted temperature

Exit codes: 0 success, 1 input error (missing/malformed files, invalid
scores or labels), 2 configuration error (bad flags or generator config).
Reports go to standard output; diagnostics to standard error.
"""

from __future__ import annotations

import argparse
import sys
import warnings

from . import io
from .calibration import DegenerateDataWarning
from .core import InvalidConfig, ValidationError
from .estimators import Method
from .synth import SynthConfig, shift_preset

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_CONFIG = 2

_METHOD_CHOICES = ["all"] + [m.value for m in Method]


def _add_synth_options(parser: argparse.ArgumentParser) -> None:
    preset = shift_preset()
    group = parser.add_argument_group("synthetic data")
    group.add_argument("--k", type=int, default=preset.k, help="class count")
    group.add_argument("--n-source", type=int, default=preset.n_source)
    group.add_argument("--n-target", type=int, default=preset.n_target)
    group.add_argument("--margin-source", type=float, default=preset.margin_source)
    group.add_argument("--margin-target", type=float, default=preset.margin_target)
    group.add_argument("--noise-source", type=float, default=preset.noise_source)
    group.add_argument("--noise-target", type=float, default=preset.noise_target)
    group.add_argument("--label-noise-source", type=float,
                       default=preset.label_noise_source)
    group.add_argument("--label-noise-target", type=float,
                       default=preset.label_noise_target)
    group.add_argument("--gen-temperature", type=float,
                       default=preset.gen_temperature)
    group.add_argument("--prior-source", type=str, default=None,
                       help="comma-separated class prior (default uniform)")
    group.add_argument("--prior-target", type=str, default=None)


def _parse_prior(text: str | None, flag: str) -> tuple[float, ...] | None:
    if text is None:
        return None
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError:
        raise InvalidConfig(f"{flag} must be comma-separated numbers") from None


def _synth_config(args) -> SynthConfig:
    return SynthConfig(
        k=args.k, n_source=args.n_source, n_target=args.n_target,
        prior_source=_parse_prior(args.prior_source, "--prior-source"),
        prior_target=_parse_prior(args.prior_target, "--prior-target"),
        margin_source=args.margin_source, margin_target=args.margin_target,
        noise_source=args.noise_source, noise_target=args.noise_target,
        label_noise_source=args.label_noise_source,
        label_noise_target=args.label_noise_target,
        gen_temperature=args.gen_temperature, seed=args.seed,
    )


def _render(report, output: str) -> str:
    if output == "json":
        return report.to_json() + "\n"
    if output == "csv":
        return report.to_csv()
    return report.to_table()


def _cmd_estimate(args) -> int:
    methods = args.method or ["all"]
    if args.synth:
        if args.source is not None or args.target is not None:
            raise InvalidConfig("--synth takes no SOURCE/TARGET paths")
        cfg = _synth_config(args)
        reports, aggregate = io.run_synth_estimate(
            cfg, methods, runs=args.runs,
            temperature_scale=args.temperature_scale,
            doc_signed=args.doc_signed, cal_fraction=args.cal_fraction)
        if args.runs == 1:
            sys.stdout.write(_render(reports[0], args.output))
        else:
            sys.stdout.write(_render(aggregate, args.output))
        return EXIT_OK
    if args.runs != 1:
        raise InvalidConfig("--runs requires --synth (file inputs are deterministic)")
    if args.source is None or args.target is None:
        raise InvalidConfig("estimate needs SOURCE and TARGET paths (or --synth)")
    report = io.run_estimate(
        args.source, args.target, methods,
        temperature_scale=args.temperature_scale, doc_signed=args.doc_signed,
        cal_fraction=args.cal_fraction, renormalize=args.renormalize,
        seed=args.seed)
    sys.stdout.write(_render(report, args.output))
    return EXIT_OK


def _cmd_synth(args) -> int:
    paths = io.run_synth(_synth_config(args), args.out_dir)
    truth = io.read_truth(paths["truth"])
    sys.stdout.write(
        f"wrote {paths['source']}, {paths['target']}, {paths['truth']}\n"
        f"true source accuracy: {truth['true_source_accuracy']}\n"
        f"true target accuracy: {truth['true_target_accuracy']}\n")
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DegenerateDataWarning)
        fit = io.run_calibrate(args.source, recover=args.recover_logits)
    for warning in caught:
        sys.stderr.write(f"warning: {warning.message}\n")
    sys.stdout.write(
        f"temperature: {fit.temperature:.6f}\n"
        f"nll: {fit.nll:.6f}\n"
        f"grid_best: {fit.grid_best:.6f}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="targetacc",
        description="Estimate a black-box classifier's accuracy on unlabeled "
                    "target data from prediction-score files.")
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="run accuracy estimators")
    est.add_argument("source", nargs="?", default=None,
                     help="labeled source prediction CSV")
    est.add_argument("target", nargs="?", default=None,
                     help="target prediction CSV (labels optional)")
    est.add_argument("--method", action="append", choices=_METHOD_CHOICES,
                     help="estimator to run (repeatable; default all)")
    est.add_argument("--temperature-scale", action="store_true",
                     help="fit a temperature on the source and rescale both sides")
    est.add_argument("--doc-signed", action="store_true",
                     help="use the signed confidence difference in DOC")
    est.add_argument("--cal-fraction", type=float, default=1.0,
                     help="fraction of the source used for calibration (default 1.0)")
    est.add_argument("--renormalize", action="store_true",
                     help="rescale probability rows to sum to 1")
    est.add_argument("--seed", type=int, default=0)
    est.add_argument("--output", choices=["table", "json", "csv"], default="table")
    est.add_argument("--synth", action="store_true",
                     help="estimate on generated data instead of files")
    est.add_argument("--runs", type=int, default=1,
                     help="with --synth: replicate count for mean ± std reporting")
    _add_synth_options(est)
    est.set_defaults(func=_cmd_estimate)

    syn = sub.add_parser("synth", help="write synthetic prediction files")
    syn.add_argument("--out-dir", required=True)
    syn.add_argument("--seed", type=int, default=0)
    _add_synth_options(syn)
    syn.set_defaults(func=_cmd_synth)

    cal = sub.add_parser("calibrate", help="fit a softmax temperature")
    cal.add_argument("source", help="labeled logits CSV")
    cal.add_argument("--recover-logits", action="store_true",
                     help="allow probability files via log-recovered logits")
    cal.set_defaults(func=_cmd_calibrate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvalidConfig as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except (ValidationError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
