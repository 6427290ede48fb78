"""Command-line front end.

Subcommands: ``check`` (schedule identifiability), ``fit`` (closed-form or
numerical MLE), ``simulate`` (seeded demand generation), ``compare``
(train/test model comparison), and ``gof`` (chi-square goodness of fit
with optional bootstrap p-values).

Every machine-readable report embeds the tool version, the fully resolved
configuration, the seed, and the SHA-256 of each input file, so any run
can be audited and reproduced.  Exit codes: 0 success, 1 usage or I/O
error, 2 analytic condition failure (schedule condition not met, zero
cell counts, degenerate likelihood, no matching periods), 3 a numerical
fit that did not converge.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import InvalidDatasetError, ParameterMask, TransactionDataset
from .dataio import (
    DataFormatError,
    load_dataset,
    read_parameter_file,
    read_schedule_csv,
    read_transactions_single_file,
    sha256_file,
    write_parameter_file,
    write_schedule_csv,
    write_transactions_csv,
)
from .estimation import (
    NonFiniteObjectiveError,
    NotC1Error,
    NotC2Error,
    OptimizerConfig,
    ZeroCellCountError,
    fit_closed_form_c1,
    fit_closed_form_c2_triangular,
    fit_mnl,
    fit_numerical,
    supported_mask,
)
from .evaluation import (
    NoMatchingPeriodsError,
    ZeroProbabilityChoiceError,
    aic,
    bic,
    bootstrap_pvalue,
    chi_square_gof,
    compare_models,
    reward_index,
    split_periods,
)
from .identifiability import NEITHER, classify_schedule
from .probability import log_likelihood
from .simulation import (
    SimulationPlan,
    appendix_fixture,
    c1_schedule_with_periods,
    make_c1_schedule,
    make_c2_schedule,
    simulate_halo,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONDITION = 2
EXIT_NO_CONVERGENCE = 3

_CONDITION_ERRORS = (
    NotC1Error,
    NotC2Error,
    ZeroCellCountError,
    NonFiniteObjectiveError,
    NoMatchingPeriodsError,
    InvalidDatasetError,
    ZeroProbabilityChoiceError,
)


class _Parser(argparse.ArgumentParser):
    """argparse that uses exit code 1 for usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit((EXIT_USAGE, f"{self.prog}: error: {message}"))


class _CliError(Exception):
    def __init__(self, code, message):
        self.code = code
        super().__init__(message)


def _envelope(command: str, config: dict, inputs: dict, results) -> dict:
    return {
        "tool": "halomnl",
        "version": __version__,
        "command": command,
        "config": config,
        "seed": config.get("seed"),
        "inputs": {str(p): sha256_file(p) for p in inputs if p is not None},
        "results": results,
    }


def _write_report(path, report: dict):
    if path:
        Path(path).write_text(json.dumps(report, indent=2) + "\n")


def _load_input_dataset(args):
    """Dataset plus the list of input files it came from."""
    if getattr(args, "single_file", None):
        ds, _ = read_transactions_single_file(args.single_file)
        return ds, [args.single_file]
    if not (getattr(args, "transactions", None) and getattr(args, "schedule", None)):
        raise _CliError(EXIT_USAGE, "give --transactions with --schedule, or --single-file")
    ds, _ = load_dataset(args.transactions, args.schedule)
    return ds, [args.transactions, args.schedule]


def _mask_summary(mask: ParameterMask) -> dict:
    n = mask.n
    return {
        "estimated": mask.count,
        "possible": n + n * (n - 1),
        "mu_estimated": int(mask.mu.sum()),
        "alpha_estimated": int(mask.alpha.sum()),
    }


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------


def _cmd_check(args) -> int:
    schedule, _ = read_schedule_csv(args.schedule)
    report = classify_schedule(schedule, strict=args.strict)
    counts = {
        "full": len(report.partition.full_periods),
        "single_missing": {i: len(v) for i, v in report.partition.single_missing.items()},
        "prefix_missing": {i: len(v) for i, v in report.partition.prefix_missing.items()},
        "other": len(report.partition.other),
    }
    print(f"classification: {report.classification}")
    print(f"periods: {schedule.m}  items: {schedule.n}")
    print(f"pattern multiplicities: {counts}")
    print(f"estimable parameters: {report.mask.count} of {schedule.n ** 2}")
    mu_flags = "".join("1" if v else "0" for v in report.mask.mu)
    print(f"mu mask:    {mu_flags}")
    for i in range(schedule.n):
        row = "".join("1" if v else "0" for v in report.mask.alpha[i])
        print(f"alpha[{i + 1},:] {row}")
    for note in report.witness:
        print(f"note: {note}")
    payload = {
        "classification": report.classification,
        "pattern_counts": {
            "full": counts["full"],
            "single_missing": {str(k): v for k, v in counts["single_missing"].items()},
            "prefix_missing": {str(k): v for k, v in counts["prefix_missing"].items()},
            "other": counts["other"],
        },
        "mask": {
            "mu": report.mask.mu.tolist(),
            "alpha": report.mask.alpha.tolist(),
        },
        "witness": list(report.witness),
    }
    config = {"schedule": args.schedule, "strict": args.strict, "seed": None}
    _write_report(args.out, _envelope("check", config, [args.schedule], payload))
    return EXIT_OK if report.classification != NEITHER else EXIT_CONDITION


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------


def _run_fit(ds: TransactionDataset, model: str, method: str, smoothing: float):
    """Returns (fit, method_used)."""
    config = OptimizerConfig(smoothing=smoothing)
    if model == "mnl":
        if method == "closed-form":
            raise _CliError(EXIT_USAGE, "no closed form exists for the plain MNL; use numerical")
        return fit_mnl(ds, config), "numerical"
    if method == "closed-form":
        try:
            return fit_closed_form_c1(ds, smoothing=smoothing), "closed-form-c1"
        except NotC1Error:
            return fit_closed_form_c2_triangular(ds, smoothing=smoothing), "closed-form-c2"
    if method == "numerical":
        return fit_numerical(ds, config=config), "numerical"
    # auto: closed form when the schedule allows it, else numerical warm start
    try:
        return fit_closed_form_c1(ds, smoothing=smoothing), "closed-form-c1"
    except (NotC1Error, ZeroCellCountError):
        pass
    try:
        return fit_closed_form_c2_triangular(ds, smoothing=smoothing), "closed-form-c2"
    except (NotC2Error, ZeroCellCountError):
        pass
    return fit_numerical(ds, config=config), "numerical"


def _cmd_fit(args) -> int:
    ds, inputs = _load_input_dataset(args)
    ds.require_valid()
    fit, method_used = _run_fit(ds, args.model, args.method, args.smoothing)
    write_parameter_file(args.out, fit.params, fit.mask)
    n_total = ds.total_transactions()
    summary = {
        "model": args.model,
        "method": method_used,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "loglik": fit.loglik,
        "d": fit.mask.count,
        "aic": aic(fit.loglik, fit.mask.count),
        "bic": bic(fit.loglik, fit.mask.count, max(n_total, 1)),
        "n_transactions": n_total,
        "mask": _mask_summary(fit.mask),
        "parameter_file": str(args.out),
    }
    config = {
        "model": args.model,
        "method": args.method,
        "smoothing": args.smoothing,
        "out": str(args.out),
        "seed": None,
    }
    report = _envelope("fit", config, inputs, summary)
    _write_report(args.summary, report)
    print(f"method: {method_used}  converged: {fit.converged}  loglik: {fit.loglik:.6f}")
    print(f"d: {summary['d']}  AIC: {summary['aic']:.4f}  BIC: {summary['bic']:.4f}")
    print(f"parameters written to {args.out}")
    if not fit.converged:
        print("warning: fit did not reach the gradient tolerance", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _resolve_params(spec: str):
    """'appendix:set1', 'appendix:set2', or a parameter file path."""
    if spec.startswith("appendix:"):
        return appendix_fixture(spec.split(":", 1)[1]), None
    params, _ = read_parameter_file(spec)
    return params, spec


def _parse_generator_spec(spec: str, periods: int | None):
    kind, _, rest = spec.partition(":")
    options = {}
    for token in filter(None, rest.split(",")):
        key, _, value = token.partition("=")
        options[key.strip()] = int(value)
    if "n" not in options:
        raise _CliError(EXIT_USAGE, f"schedule spec {spec!r} needs n=<items>")
    n = options["n"]
    if kind == "c1":
        if "full" in options or "single" in options:
            return make_c1_schedule(n, options.get("full", 2), options.get("single", 2))
        if periods is not None:
            return c1_schedule_with_periods(n, periods)
        return make_c1_schedule(n)
    if kind == "c2":
        return make_c2_schedule(n, options.get("full", 2), options.get("prefix", 2))
    raise _CliError(EXIT_USAGE, f"unknown schedule generator {kind!r}")


def _cmd_simulate(args) -> int:
    params, params_path = _resolve_params(args.params)
    inputs = [params_path] if params_path else []
    if args.schedule.startswith(("c1:", "c2:")):
        schedule = _parse_generator_spec(args.schedule, args.periods)
    else:
        schedule, _ = read_schedule_csv(args.schedule)
        inputs.append(args.schedule)
    if params.n != schedule.n:
        raise _CliError(
            EXIT_CONDITION, f"params have {params.n} items but the schedule has {schedule.n}"
        )
    plan = SimulationPlan(
        schedule=schedule,
        arrival_rate=args.arrivals,
        seed=args.seed,
        replicates=args.replicates,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    schedule_path = out_dir / "schedule.csv"
    write_schedule_csv(schedule_path, schedule)
    outputs = {"schedule": str(schedule_path)}
    transaction_files = []
    for replicate in range(plan.replicates):
        ds = simulate_halo(params, plan, replicate)
        path = out_dir / f"transactions_rep{replicate:03d}.csv"
        write_transactions_csv(path, ds)
        transaction_files.append(str(path))
    outputs["transactions"] = transaction_files
    config = {
        "params": args.params,
        "schedule": args.schedule,
        "periods": args.periods,
        "arrivals": args.arrivals,
        "replicates": args.replicates,
        "seed": args.seed,
        "out": str(out_dir),
    }
    results = {
        "periods": schedule.m,
        "items": schedule.n,
        "outputs": outputs,
        "output_checksums": {
            p: sha256_file(p) for p in [str(schedule_path)] + transaction_files
        },
    }
    _write_report(out_dir / "manifest.json", _envelope("simulate", config, inputs, results))
    print(f"wrote {plan.replicates} replicate(s) to {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------


def _fit_model_for_compare(train, model, smoothing):
    """Fit on the training periods, dropping parameters without support."""
    requested = ParameterMask.full(train.n) if model == "halo" else ParameterMask.mnl(train.n)
    usable = supported_mask(train, requested, smoothing=smoothing)
    dropped = requested.count - usable.count
    config = OptimizerConfig(smoothing=smoothing)
    fit = fit_numerical(train, mask=usable, config=config)
    return fit, dropped


def _cmd_compare(args) -> int:
    models = [m.strip() for m in args.models.split(",") if m.strip()]
    for model in models:
        if model not in ("mnl", "halo"):
            raise _CliError(EXIT_USAGE, f"unknown model {model!r}; choose mnl or halo")
    if args.train_transactions:
        if not all([args.train_schedule, args.test_transactions, args.test_schedule]):
            raise _CliError(
                EXIT_USAGE,
                "explicit split needs --train-transactions/--train-schedule "
                "and --test-transactions/--test-schedule",
            )
        train, _ = load_dataset(args.train_transactions, args.train_schedule)
        test, _ = load_dataset(args.test_transactions, args.test_schedule)
        inputs = [
            args.train_transactions,
            args.train_schedule,
            args.test_transactions,
            args.test_schedule,
        ]
        split_info = {"mode": "explicit"}
    else:
        ds, inputs = _load_input_dataset(args)
        if args.train_size is None and args.split is None:
            raise _CliError(EXIT_USAGE, "give --train-size or --split (or explicit files)")
        try:
            train, test, train_periods, test_periods = split_periods(
                ds,
                train_size=args.train_size,
                train_fraction=args.split,
                seed=args.seed,
            )
        except ValueError as exc:
            raise _CliError(EXIT_USAGE, str(exc)) from None
        split_info = {
            "mode": "random",
            "train_periods": list(train_periods),
            "test_periods": list(test_periods),
        }
    train.require_valid()
    test.require_valid()
    fits, labels, dropped_info = [], [], {}
    for model in models:
        fit, dropped = _fit_model_for_compare(train, model, args.smoothing)
        fits.append(fit)
        labels.append(model)
        dropped_info[model] = dropped
        if dropped:
            print(
                f"note: {model}: {dropped} parameter(s) without training support "
                "were dropped from the mask",
                file=sys.stderr,
            )
    report = compare_models(fits, test, labels=labels, role="test")
    rewards = {label: reward_index(fit.params, test) for label, fit in zip(labels, fits)}
    train_logliks = {label: fit.loglik for label, fit in zip(labels, fits)}
    print(f"test transactions: {report.n}")
    header = f"{'model':<8} {'train loglik':>14} {'test loglik':>14} {'d':>5} {'AIC':>12} {'BIC':>12} {'reward':>12}"
    print(header)
    for score in report.scores:
        print(
            f"{score.label:<8} {train_logliks[score.label]:>14.4f} {score.loglik:>14.4f} "
            f"{score.d:>5d} {score.aic:>12.4f} {score.bic:>12.4f} {rewards[score.label]:>12.4f}"
        )
    for delta in report.deltas:
        print(
            f"delta ({delta.first} - {delta.second}): "
            f"dL={delta.delta_loglik:.4f} dAIC={delta.delta_aic:.4f} dBIC={delta.delta_bic:.4f}"
        )
    payload = {
        "split": split_info,
        "n_test_transactions": report.n,
        "scores": [
            {
                "model": s.label,
                "train_loglik": train_logliks[s.label],
                "test_loglik": s.loglik,
                "d": s.d,
                "aic": s.aic,
                "bic": s.bic,
                "reward_index": rewards[s.label],
                "dropped_parameters": dropped_info[s.label],
            }
            for s in report.scores
        ],
        "deltas": [
            {
                "first": d.first,
                "second": d.second,
                "delta_loglik": d.delta_loglik,
                "delta_aic": d.delta_aic,
                "delta_bic": d.delta_bic,
            }
            for d in report.deltas
        ],
    }
    config = {
        "models": args.models,
        "train_size": args.train_size,
        "split": args.split,
        "smoothing": args.smoothing,
        "seed": args.seed,
    }
    _write_report(args.out, _envelope("compare", config, inputs, payload))
    if any(not fit.converged for fit in fits):
        print("warning: at least one fit did not converge", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


# ---------------------------------------------------------------------------
# gof
# ---------------------------------------------------------------------------


def _parse_signature(text: str, n: int):
    tokens = [t for t in text.replace(",", " ").split() if t]
    if len(tokens) == 1 and len(tokens[0]) == n:
        tokens = list(tokens[0])
    try:
        values = [int(t) for t in tokens]
    except ValueError:
        raise _CliError(EXIT_USAGE, f"bad signature {text!r}") from None
    if len(values) != n or any(v not in (0, 1) for v in values):
        raise _CliError(EXIT_USAGE, f"signature must be {n} binary values, got {text!r}")
    return values


def _cmd_gof(args) -> int:
    params, _ = read_parameter_file(args.params)
    ds, inputs = _load_input_dataset(args)
    ds.require_valid()
    inputs = [args.params] + inputs
    if args.all:
        signatures = [list(map(int, row)) for row in np.unique(ds.availability.q, axis=0)]
    elif args.signature:
        signatures = [_parse_signature(s, ds.n) for s in args.signature]
    else:
        raise _CliError(EXIT_USAGE, "give --signature (repeatable) or --all")
    rows = []
    for sig in signatures:
        try:
            if args.bootstrap > 0:
                result = bootstrap_pvalue(
                    params, ds, sig, resamples=args.bootstrap, seed=args.seed
                )
            else:
                result = chi_square_gof(params, ds, sig)
        except NoMatchingPeriodsError as exc:
            if args.all:
                print(f"warning: {exc}", file=sys.stderr)
                continue
            raise
        skipped = result.n_total == 0
        if skipped:
            print(
                "signature "
                + "".join(map(str, sig))
                + ": skipped (no transactions recorded)",
            )
        else:
            analytic = "n/a" if result.p_value is None else f"{result.p_value:.4f}"
            boot = (
                "n/a"
                if result.bootstrap_median_p is None
                else f"{result.bootstrap_median_p:.4f}"
            )
            print(
                f"signature {''.join(map(str, sig))}: chi2={result.statistic:.4f} "
                f"dof={result.dof} n={result.n_total} applicable={result.applicable} "
                f"p={analytic} bootstrap_median_p={boot}"
            )
        rows.append(
            {
                "signature": list(sig),
                "statistic": result.statistic,
                "dof": result.dof,
                "n_total": result.n_total,
                "applicable": result.applicable,
                "p_value": result.p_value,
                "bootstrap_median_p": result.bootstrap_median_p,
                "skipped": skipped,
            }
        )
    config = {
        "params": args.params,
        "bootstrap": args.bootstrap,
        "seed": args.seed,
        "all": args.all,
        "signatures": [ "".join(map(str, s)) for s in signatures],
    }
    _write_report(args.out, _envelope("gof", config, inputs, rows))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_dataset_arguments(parser):
    parser.add_argument("--transactions", help="transactions CSV (period_id,item_id,count)")
    parser.add_argument("--schedule", help="schedule CSV (period_id,a1,...,aN)")
    parser.add_argument(
        "--single-file",
        help="per-transaction CSV (period_id,offered_items,chosen_item), aggregated on load",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="halomnl", description=__doc__)
    parser.add_argument("--version", action="version", version=f"halomnl {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="classify a schedule against C1/C2")
    check.add_argument("--schedule", required=True)
    check.add_argument("--strict", action="store_true", help="require template rows only")
    check.add_argument("--out", help="write the machine-readable report here")
    check.set_defaults(func=_cmd_check)

    fit = sub.add_parser("fit", help="maximum-likelihood fit")
    _add_dataset_arguments(fit)
    fit.add_argument("--model", choices=("mnl", "halo"), default="halo")
    fit.add_argument("--method", choices=("auto", "closed-form", "numerical"), default="auto")
    fit.add_argument("--smoothing", type=float, default=0.0)
    fit.add_argument("--out", required=True, help="parameter file to write")
    fit.add_argument("--summary", help="fit summary JSON path")
    fit.set_defaults(func=_cmd_fit)

    simulate = sub.add_parser("simulate", help="generate synthetic demand")
    simulate.add_argument(
        "--params", required=True, help="parameter file, appendix:set1, or appendix:set2"
    )
    simulate.add_argument(
        "--schedule",
        required=True,
        help="schedule CSV, c1:n=10[,full=2,single=2], or c2:n=10[,full=2,prefix=2]",
    )
    simulate.add_argument("--periods", type=int, help="period count for generated c1 schedules")
    simulate.add_argument("--arrivals", type=float, required=True, help="mean arrivals per period")
    simulate.add_argument("--replicates", type=int, default=1)
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--out", required=True, help="output directory")
    simulate.set_defaults(func=_cmd_simulate)

    compare = sub.add_parser("compare", help="fit models on train, score on test")
    _add_dataset_arguments(compare)
    compare.add_argument("--train-transactions")
    compare.add_argument("--train-schedule")
    compare.add_argument("--test-transactions")
    compare.add_argument("--test-schedule")
    compare.add_argument("--train-size", type=int)
    compare.add_argument("--split", type=float, help="training fraction in (0, 1)")
    compare.add_argument("--models", default="mnl,halo")
    compare.add_argument("--smoothing", type=float, default=0.0)
    compare.add_argument("--seed", type=int, default=0)
    compare.add_argument("--out", help="comparison report JSON path")
    compare.set_defaults(func=_cmd_compare)

    gof = sub.add_parser("gof", help="goodness of fit per offer-set signature")
    gof.add_argument("--params", required=True)
    _add_dataset_arguments(gof)
    gof.add_argument("--signature", action="append", help="binary signature, e.g. 1,0,1")
    gof.add_argument("--all", action="store_true", help="every distinct signature in the data")
    gof.add_argument("--bootstrap", type=int, default=1000, help="bootstrap resamples (0 = off)")
    gof.add_argument("--seed", type=int, default=0)
    gof.add_argument("--out", help="report JSON path")
    gof.set_defaults(func=_cmd_gof)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if isinstance(exc.code, tuple):
            code, message = exc.code
            print(message, file=sys.stderr)
            return code
        return exc.code if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except DataFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _CONDITION_ERRORS as exc:
        hint = ""
        if isinstance(exc, ZeroCellCountError):
            hint = " (hint: retry with --smoothing 0.5)"
        print(f"error: {exc}{hint}", file=sys.stderr)
        return EXIT_CONDITION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
