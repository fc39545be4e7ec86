"""Command-line front end: CSV ingestion and the three workflows.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import drest, simulate
from .model import (DegenerateColumn, LINEAR, LOGIT, ModelSpec,
                    NonProbabilitySample, ProbabilitySample)
from .pee import DivergedUpdate
from .pipeline import estimate_population_mean
from .tuning import AllFitsFailed
from .numerics import SingularMatrix

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

NUMERICAL_ERRORS = (DivergedUpdate, AllFitsFailed, SingularMatrix,
                    drest.SingularJacobian, drest.MaxIterationsExceeded,
                    drest.UnsupportedDesign, DegenerateColumn)


class DataError(Exception):
    pass


class MissingColumn(DataError):
    pass


class ColumnMismatch(DataError):
    pass


class BadProbability(DataError):
    def __init__(self, line):
        super().__init__(f"inclusion probability outside (0, 1] on line {line}")
        self.line = line


class BadOutcome(DataError):
    def __init__(self, line):
        super().__init__(f"invalid outcome on line {line}")
        self.line = line


class EmptyFile(DataError):
    pass


def _read_table(path):
    """Return (header, rows, line_numbers); rejects ragged or missing cells."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile(f"{path} has no header")
        rows, lines = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header) or any(cell.strip() == "" for cell in row):
                raise DataError(f"{path}: missing value on line {lineno}")
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                raise DataError(f"{path}: non-numeric value on line {lineno}")
            lines.append(lineno)
    if not rows:
        raise EmptyFile(f"{path} has no data rows")
    return header, np.array(rows, dtype=float), lines


def ingest_sample_a(path):
    """Load the probability sample: column pi_a plus covariate columns."""
    header, data, lines = _read_table(path)
    if "pi_a" not in header:
        raise MissingColumn(f"{path}: column pi_a not found")
    idx = header.index("pi_a")
    pi = data[:, idx]
    for value, line in zip(pi, lines):
        if not (0.0 < value <= 1.0):
            raise BadProbability(line)
    cov_names = [h for h in header if h != "pi_a"]
    cov = data[:, [header.index(h) for h in cov_names]]
    x = np.column_stack([np.ones(cov.shape[0]), cov])
    return ProbabilitySample(x, pi), cov_names


def ingest_sample_b(path, expected_covariates=None, family=LINEAR):
    """Load the non-probability sample: column y plus covariate columns."""
    header, data, lines = _read_table(path)
    if "y" not in header:
        raise MissingColumn(f"{path}: column y not found")
    y = data[:, header.index("y")]
    cov_names = [h for h in header if h != "y"]
    if expected_covariates is not None and cov_names != list(expected_covariates):
        raise ColumnMismatch(
            f"{path}: covariates {cov_names} do not match sample A {list(expected_covariates)}")
    if family == LOGIT:
        for value, line in zip(y, lines):
            if value not in (0.0, 1.0):
                raise BadOutcome(line)
    cov = data[:, [header.index(h) for h in cov_names]]
    x = np.column_stack([np.ones(cov.shape[0]), cov])
    return NonProbabilitySample(x, y), cov_names


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_sample_a(path, sample: ProbabilitySample, cov_names):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pi_a", *cov_names])
        for i in range(sample.n):
            writer.writerow([_fmt(sample.inclusion_probs[i]),
                             *(_fmt(v) for v in sample.covariates[i, 1:])])


def write_sample_b(path, sample: NonProbabilitySample, cov_names):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y", *cov_names])
        for i in range(sample.n):
            writer.writerow([_fmt(sample.outcomes[i]),
                             *(_fmt(v) for v in sample.covariates[i, 1:])])


def _write_flat_record(path, record: dict):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(record.keys()))
        writer.writerow([_fmt(v) for v in record.values()])


def _write_selection(path, cov_names, alpha, beta, support_alpha, support_beta):
    union = set(support_alpha) | set(support_beta)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "alpha_coef", "beta_coef",
                         "in_M_alpha", "in_M_beta", "in_C"])
        writer.writerow(["intercept", _fmt(alpha[0]), _fmt(beta[0]), "", "", ""])
        for j, name in enumerate(cov_names, start=1):
            writer.writerow([name, _fmt(alpha[j]), _fmt(beta[j]),
                             int(j in support_alpha), int(j in support_beta),
                             int(j in union)])


def _load_config(path):
    values = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"bad config line: {raw!r}")
            key, _, value = line.partition("=")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def build_parser():
    parser = argparse.ArgumentParser(
        prog="drintegrate",
        description="Doubly robust finite-population inference combining a "
                    "probability sample with a non-probability sample.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--config", help="flat key=value config file")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--kfolds", type=int, default=None)
        sp.add_argument("--grid-size", type=int, default=None)
        sp.add_argument("--threads", type=int, default=None)
        sp.add_argument("--out", default=None, help="output directory")

    def add_data(sp):
        sp.add_argument("--sample-a", default=None, help="probability sample CSV")
        sp.add_argument("--sample-b", default=None, help="non-probability sample CSV")
        sp.add_argument("--population-size", type=int, default=None)
        sp.add_argument("--family", choices=[LINEAR, LOGIT], default=None)

    sp = sub.add_parser("estimate", help="full two-step pipeline")
    add_common(sp)
    add_data(sp)

    sp = sub.add_parser("select", help="step 1 only, emit selected supports")
    add_common(sp)
    add_data(sp)

    sp = sub.add_parser("simulate", help="Monte Carlo study")
    add_common(sp)
    sp.add_argument("--scenario", default=None,
                    help="om{1|2}xpsm{1|2}, e.g. om1xpsm1")
    sp.add_argument("--family", choices=[LINEAR, LOGIT], default=None)
    sp.add_argument("--runs", type=int, default=None)
    sp.add_argument("--population-size", type=int, default=None)
    sp.add_argument("--covariates", type=int, default=None,
                    help="number of covariate columns including intercept")
    return parser


_DEFAULTS = {
    "seed": 0, "kfolds": 10, "grid_size": 25, "threads": max(os.cpu_count() or 1, 1),
    "out": ".", "family": LINEAR, "runs": 500, "population_size": None,
    "scenario": "om1xpsm1", "covariates": 50,
    "sample_a": None, "sample_b": None,
}


def _resolve(args):
    """Merge flag values over config-file values over built-in defaults."""
    cfg = {}
    if getattr(args, "config", None):
        cfg = _load_config(args.config)
    merged = {}
    for key, default in _DEFAULTS.items():
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
        elif key in cfg:
            raw = cfg[key]
            merged[key] = type(default)(raw) if default is not None else raw
        else:
            merged[key] = default
    for key in ("runs", "kfolds", "grid_size", "threads", "seed",
                "population_size", "covariates"):
        if merged[key] is not None:
            merged[key] = int(merged[key])
    return merged


def _ingest_pair(opts):
    if not opts["sample_a"] or not opts["sample_b"]:
        raise ConfigError("--sample-a and --sample-b are required")
    if not opts["population_size"]:
        raise ConfigError("--population-size is required")
    sample_a, names = ingest_sample_a(opts["sample_a"])
    sample_b, _ = ingest_sample_b(opts["sample_b"], names, opts["family"])
    if opts["population_size"] < max(sample_a.n, sample_b.n):
        raise ConfigError("population size smaller than a sample size")
    return sample_a, sample_b, names


class ConfigError(Exception):
    pass


def cmd_estimate(opts) -> int:
    sample_a, sample_b, names = _ingest_pair(opts)
    spec = ModelSpec(opts["family"], opts["population_size"])
    report = estimate_population_mean(
        sample_a, sample_b, spec, kfolds=opts["kfolds"],
        grid_size=opts["grid_size"], seed=opts["seed"])

    scale = report.diagnostics["scale_info"]
    theta = report.theta_second_step
    alpha = scale.coefficients_to_original(theta.alpha)
    beta = scale.coefficients_to_original(theta.beta)

    os.makedirs(opts["out"], exist_ok=True)
    record = {
        "mu_hat": report.mu_hat, "se": report.se,
        "ci_low": report.ci_low, "ci_high": report.ci_high,
        "v1_hat": report.v1_hat, "v2_hat": report.v2_hat,
        "naive": report.baselines["naive"],
        "p_ipw": report.baselines["p-ipw"],
        "p_reg": report.baselines["p-reg"],
        "p_dr0": report.baselines["p-dr0"],
        "lambda_alpha": report.diagnostics["lambda_alpha"],
        "lambda_beta": report.diagnostics["lambda_beta"],
        "n_a": sample_a.n, "n_b": sample_b.n,
        "population_size": opts["population_size"],
        "family": opts["family"],
        "clip_events": report.diagnostics["clip_events"],
        "negative_variance": int(report.diagnostics["negative_variance"]),
    }
    _write_flat_record(os.path.join(opts["out"], "estimate.csv"), record)
    _write_selection(os.path.join(opts["out"], "selection.csv"), names,
                     alpha, beta, theta.support_alpha, theta.support_beta)
    print(f"mu_hat = {report.mu_hat:.4g}  se = {report.se:.3g}  "
          f"95% CI = ({report.ci_low:.4g}, {report.ci_high:.4g})")
    print(f"baselines: naive = {report.baselines['naive']:.4g}  "
          f"p-ipw = {report.baselines['p-ipw']:.4g}  "
          f"p-reg = {report.baselines['p-reg']:.4g}  "
          f"p-dr0 = {report.baselines['p-dr0']:.4g}")
    return EXIT_OK


def cmd_select(opts) -> int:
    from .estimator import PenalizedSelector

    sample_a, sample_b, names = _ingest_pair(opts)
    selector = PenalizedSelector(
        family=opts["family"], population_size=opts["population_size"],
        kfolds=opts["kfolds"], grid_size=opts["grid_size"], seed=opts["seed"])
    selector.fit(sample_a, sample_b)
    scale = selector.scale_info_
    alpha = scale.coefficients_to_original(selector.alpha_)
    beta = scale.coefficients_to_original(selector.beta_)
    os.makedirs(opts["out"], exist_ok=True)
    _write_selection(os.path.join(opts["out"], "selection.csv"), names,
                     alpha, beta, selector.support_alpha_, selector.support_beta_)
    print(f"selected sampling-score covariates: {selector.support_alpha_}")
    print(f"selected outcome covariates:        {selector.support_beta_}")
    return EXIT_OK


def _parse_scenario(text):
    value = text.lower().replace("-", "").replace("_", "")
    if (len(value) == 8 and value.startswith("om") and "xpsm" in value
            and value[2] in "12" and value[7] in "12"):
        return int(value[2]), int(value[7])
    raise ConfigError(f"unknown scenario {text!r}; expected om{{1,2}}xpsm{{1,2}}")


def cmd_simulate(opts) -> int:
    om, psm = _parse_scenario(opts["scenario"])
    cfg = simulate.ScenarioConfig(
        outcome_family=opts["family"], om=om, psm=psm,
        n_population=opts["population_size"] or 10_000,
        p=opts["covariates"], mc_runs=opts["runs"], seed=opts["seed"],
        kfolds=opts["kfolds"], grid_size=opts["grid_size"],
        threads=opts["threads"])
    metrics, records = simulate.run_mc(cfg)
    os.makedirs(opts["out"], exist_ok=True)
    simulate.write_metrics_csv(os.path.join(opts["out"], "mc_metrics.csv"),
                               cfg, metrics)
    simulate.write_runs_csv(os.path.join(opts["out"], "mc_runs.csv"), records)
    for block in ("alpha", "beta"):
        sel = metrics.selection.get(block)
        if sel:
            print(f"{block}: under {sel['under_pct']:.1f}%  over {sel['over_pct']:.1f}%  "
                  f"FN {sel['fn_avg']:.2f}  FP {sel['fp_avg']:.2f}")
    for name, ent in metrics.estimators.items():
        cov = (f"  coverage {ent['coverage_pct']:.1f}%"
               if ent["coverage_pct"] is not None else "")
        print(f"{name}: bias {ent['bias']:.4g}  sd {ent['sd']:.3g}{cov}")
    if metrics.failures:
        print(f"failed runs: {metrics.failures}/{metrics.n_runs}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        opts = _resolve(args)
        if args.command == "estimate":
            return cmd_estimate(opts)
        if args.command == "select":
            return cmd_select(opts)
        if args.command == "simulate":
            return cmd_simulate(opts)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError,) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
