"""Finite-population generation, sampling designs, and Monte Carlo replication.

Populations carry an intercept plus independent standard-normal
covariates.  Sample B is drawn by unit-level Bernoulli selection under a
linear-logit or nonlinear sampling-score model; Sample A is a Poisson
sample with size-proportional inclusion probabilities.  Each replicate
runs the full tuning/selection/estimation pipeline and records supports,
estimates and interval coverage.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from . import drest
from .model import LINEAR, LOGIT, ModelSpec, NonProbabilitySample, ProbabilitySample
from .numerics import expit
from .pee import SolverControls
from .pipeline import estimate_population_mean

ESTIMATORS = ("naive", "p-ipw", "p-reg", "p-dr0", "p-dr")

# nonzero covariate indices of the generating models
TRUE_BETA_SUPPORT = (3, 4, 5, 6)
TRUE_ALPHA_SUPPORT = {1: (1, 2, 3, 4), 2: (3, 4, 5, 6)}


@dataclass(frozen=True)
class ScenarioConfig:
    outcome_family: str = LINEAR
    om: int = 1
    psm: int = 1
    n_population: int = 10_000
    p: int = 50
    target_n_a: int = 500
    mc_runs: int = 500
    seed: int = 0
    kfolds: int = 10
    grid_size: int = 25
    threads: int = 1
    fixed_lambdas: tuple | None = None

    def __post_init__(self):
        if self.om not in (1, 2) or self.psm not in (1, 2):
            raise ValueError("om and psm must be 1 or 2")
        if self.outcome_family not in (LINEAR, LOGIT):
            raise ValueError("outcome family must be linear or logit")
        if self.p < 7:
            raise ValueError("p must be at least 7 to host the generating support")

    @property
    def label(self) -> str:
        return f"om{self.om}xpsm{self.psm}"


def _beta0(cfg: ScenarioConfig) -> np.ndarray:
    beta = np.zeros(cfg.p)
    beta[0] = 1.0
    beta[[3, 4, 5, 6]] = 1.0 if cfg.outcome_family == LINEAR else 3.0
    return beta


def _alpha0_psm1(p: int) -> np.ndarray:
    alpha = np.zeros(p)
    alpha[0] = -2.0
    alpha[[1, 2, 3, 4]] = 1.0
    return alpha


def _alpha0_psm2(p: int) -> np.ndarray:
    alpha = np.zeros(p)
    alpha[[3, 4, 5, 6]] = 3.0
    return alpha


def gen_population(cfg: ScenarioConfig, rng: np.random.Generator):
    """Generate covariates and outcomes for one finite population."""
    n, p = cfg.n_population, cfg.p
    x = np.empty((n, p))
    x[:, 0] = 1.0
    x[:, 1:] = rng.standard_normal((n, p - 1))
    beta0 = _beta0(cfg)
    lp = x @ beta0
    if cfg.outcome_family == LINEAR:
        if cfg.om == 1:
            y = lp + rng.standard_normal(n)
        else:
            y = 1.0 + np.exp(3.0 * np.sin(lp)) + x[:, 5] + x[:, 6] + rng.standard_normal(n)
    else:
        if cfg.om == 1:
            prob = np.asarray(expit(lp))
        else:
            logit = 2.0 - np.log(np.maximum(lp ** 2, 1e-12)) + 2.0 * x[:, 5] + 2.0 * x[:, 6]
            prob = np.asarray(expit(logit))
        y = (rng.random(n) < prob).astype(float)
    return x, y


def draw_sample_b(x: np.ndarray, cfg: ScenarioConfig, rng: np.random.Generator):
    """Bernoulli selection into Sample B; returns the sample, the true
    sampling-score support, and the logit-clamp count (nonlinear model only)."""
    p = x.shape[1]
    if cfg.psm == 1:
        logit = x @ _alpha0_psm1(p)
        clamped = 0
    else:
        logx2 = np.log(np.maximum(x ** 2, 1e-300))
        logx2[:, 0] = 0.0
        logit = (3.5 + logx2 @ _alpha0_psm2(p)
                 - np.sin(x[:, 3] + x[:, 4]) - x[:, 5] - x[:, 6])
        clamped = int(np.count_nonzero(np.abs(logit) > 30.0))
        logit = np.clip(logit, -30.0, 30.0)
    score = np.asarray(expit(logit))
    take = rng.random(x.shape[0]) < score
    return take, TRUE_ALPHA_SUPPORT[cfg.psm], clamped


def draw_sample_a(x: np.ndarray, y: np.ndarray, target_n_a: int,
                  rng: np.random.Generator):
    """Poisson sample with inclusion probability proportional to a size
    measure in |X_1| and |Y|, normalized to the target expected size."""
    size = 0.25 + np.abs(x[:, 1]) + 0.03 * np.abs(y)
    pi = size * (target_n_a / size.sum())
    clamped = int(np.count_nonzero(pi > 1.0))
    pi = np.minimum(pi, 1.0)
    take = rng.random(x.shape[0]) < pi
    return take, pi, clamped


def run_one(cfg: ScenarioConfig, run_index: int, seed_seq: np.random.SeedSequence) -> dict:
    """One Monte Carlo replicate: generate, sample, estimate."""
    data_seed, fold_seed = seed_seq.spawn(2)
    rng = np.random.default_rng(data_seed)
    cv_seed = int(fold_seed.generate_state(1, dtype=np.uint32)[0])
    record = {"run": run_index, "failure": None}
    try:
        x, y = gen_population(cfg, rng)
        record["mu_true"] = float(y.mean())
        in_b, alpha_truth, _ = draw_sample_b(x, cfg, rng)
        in_a, pi_a, _ = draw_sample_a(x, y, cfg.target_n_a, rng)
        sample_a = ProbabilitySample(x[in_a], pi_a[in_a])
        sample_b = NonProbabilitySample(x[in_b], y[in_b])
        spec = ModelSpec(cfg.outcome_family, cfg.n_population)
        report = estimate_population_mean(
            sample_a, sample_b, spec,
            kfolds=cfg.kfolds, grid_size=cfg.grid_size, seed=cv_seed,
            design=drest.POISSON_A, lambdas=cfg.fixed_lambdas)
        record["estimates"] = {
            "naive": report.baselines["naive"],
            "p-ipw": report.baselines["p-ipw"],
            "p-reg": report.baselines["p-reg"],
            "p-dr0": report.baselines["p-dr0"],
            "p-dr": report.mu_hat,
        }
        record["ci"] = (report.ci_low, report.ci_high)
        record["covered"] = bool(report.ci_low <= record["mu_true"] <= report.ci_high)
        step1 = report.diagnostics["theta_step1"]
        record["support_alpha"] = tuple(step1.support_alpha)
        record["support_beta"] = tuple(step1.support_beta)
        record["alpha_truth"] = tuple(alpha_truth)
        record["beta_truth"] = TRUE_BETA_SUPPORT
        record["lambda_alpha"] = report.diagnostics["lambda_alpha"]
        record["lambda_beta"] = report.diagnostics["lambda_beta"]
    except Exception as exc:
        record["failure"] = repr(exc)
    return record


@dataclass
class McMetrics:
    """Aggregate selection and estimation metrics over the replicates."""

    selection: dict = field(default_factory=dict)  # block -> metric dict
    estimators: dict = field(default_factory=dict)  # name -> metric dict
    n_runs: int = 0
    failures: int = 0


def _selection_metrics(records, key_support, key_truth):
    fns, fps = [], []
    for rec in records:
        truth = set(rec[key_truth])
        chosen = set(rec[key_support])
        fns.append(len(truth - chosen))
        fps.append(len(chosen - truth))
    fns = np.array(fns, dtype=float)
    fps = np.array(fps, dtype=float)
    return {
        "under_pct": float(100.0 * np.mean(fns > 0)),
        "over_pct": float(100.0 * np.mean(fps > 0)),
        "fn_avg": float(np.mean(fns)),
        "fp_avg": float(np.mean(fps)),
    }


def aggregate(records: list) -> McMetrics:
    """Reduce per-run records to selection/bias/coverage summaries.

    Runs that failed are excluded and counted; aggregation is computed
    from records sorted by run index so it is order-independent.
    """
    records = sorted(records, key=lambda r: r["run"])
    ok = [r for r in records if r["failure"] is None]
    out = McMetrics(n_runs=len(records), failures=len(records) - len(ok))
    if not ok:
        return out
    out.selection["alpha"] = _selection_metrics(ok, "support_alpha", "alpha_truth")
    out.selection["beta"] = _selection_metrics(ok, "support_beta", "beta_truth")
    mu = np.array([r["mu_true"] for r in ok])
    for name in ESTIMATORS:
        est = np.array([r["estimates"][name] for r in ok], dtype=float)
        valid = np.isfinite(est)
        err = est[valid] - mu[valid]
        entry = {
            "bias": float(np.mean(err)) if valid.any() else float("nan"),
            "sd": float(np.std(err, ddof=1)) if valid.sum() > 1 else float("nan"),
            "mcse": (float(np.std(err, ddof=1) / np.sqrt(valid.sum()))
                     if valid.sum() > 1 else float("nan")),
            "coverage_pct": None,
            "coverage_mcse": None,
        }
        if name == "p-dr":
            cov = np.array([r["covered"] for r in ok], dtype=float)
            chat = float(np.mean(cov))
            entry["coverage_pct"] = 100.0 * chat
            entry["coverage_mcse"] = 100.0 * float(np.sqrt(chat * (1 - chat) / len(cov)))
        out.estimators[name] = entry
    return out


def run_mc(cfg: ScenarioConfig):
    """Run all replicates (optionally in parallel) and aggregate.

    Per-run seeds are spawned from the master seed by run index, so the
    result is identical for any thread count.
    """
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.mc_runs)
    if cfg.threads > 1:
        records = Parallel(n_jobs=cfg.threads)(
            delayed(run_one)(cfg, i, s) for i, s in enumerate(seeds))
    else:
        records = [run_one(cfg, i, s) for i, s in enumerate(seeds)]
    return aggregate(records), sorted(records, key=lambda r: r["run"])


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_metrics_csv(path, cfg: ScenarioConfig, metrics: McMetrics):
    """One row per block-selection metric and per estimator."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "family", "kind", "name",
                         "under_pct", "over_pct", "fn_avg", "fp_avg",
                         "bias", "sd", "mcse", "coverage_pct", "coverage_mcse",
                         "runs", "failures"])
        for block in ("alpha", "beta"):
            sel = metrics.selection.get(block, {})
            writer.writerow([cfg.label, cfg.outcome_family, "selection", block,
                             _fmt(sel.get("under_pct")), _fmt(sel.get("over_pct")),
                             _fmt(sel.get("fn_avg")), _fmt(sel.get("fp_avg")),
                             "", "", "", "", "", metrics.n_runs, metrics.failures])
        for name in ESTIMATORS:
            ent = metrics.estimators.get(name, {})
            writer.writerow([cfg.label, cfg.outcome_family, "estimator", name,
                             "", "", "", "",
                             _fmt(ent.get("bias")), _fmt(ent.get("sd")),
                             _fmt(ent.get("mcse")),
                             _fmt(ent.get("coverage_pct")),
                             _fmt(ent.get("coverage_mcse")),
                             metrics.n_runs, metrics.failures])


def write_runs_csv(path, records: list):
    """Per-run estimates behind the aggregate metrics."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run", "estimator", "estimate", "ci_low", "ci_high",
                         "covered", "failure"])
        for rec in sorted(records, key=lambda r: r["run"]):
            if rec["failure"] is not None:
                writer.writerow([rec["run"], "", "", "", "", "", rec["failure"]])
                continue
            for name in ESTIMATORS:
                ci_low, ci_high, covered = "", "", ""
                if name == "p-dr":
                    ci_low = _fmt(rec["ci"][0])
                    ci_high = _fmt(rec["ci"][1])
                    covered = int(rec["covered"])
                writer.writerow([rec["run"], name, _fmt(rec["estimates"][name]),
                                 ci_low, ci_high, covered, ""])
