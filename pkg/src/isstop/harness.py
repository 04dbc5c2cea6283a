"""Replicated experiments: ESS-versus-n curves and stopping-rule studies.

Replication ``r`` always draws from ``make_rng(seed, r)``, so results do not
depend on how replications are scheduled across threads. The number of
worker threads is read from ``ISSTOP_THREADS`` (default 1).
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, IsStopError
from .estimators import EstimatorKind, ess_report
from .gaussian import identity_problem, make_setting
from .numerics import make_rng
from .samples import LogWeightOffset, SuffStats, accumulate
from .stopping import (
    DEFAULT_CHECK_EVERY,
    DEFAULT_MAX_N,
    StopConfig,
    in_region,
    run_until_stop,
)
from .weibull import StepStressModel

THREADS_ENV = "ISSTOP_THREADS"


@dataclass(frozen=True)
class ExperimentConfig:
    """What to simulate and how often.

    ``problem`` is ``"gaussian"``, ``"gaussian-identity"`` (proposal equal to
    the target) or ``"weibull"``; ``integrand`` selects ``h1``/``h2`` for the
    Weibull model.
    """

    problem: str = "gaussian"
    setting: int = 1
    dim: int = 2
    integrand: str = "h1"
    estimator: str = "SNIS"
    alpha: float = 0.05
    epsilon: float = 0.1
    n_star: int | None = None
    check_every: int = DEFAULT_CHECK_EVERY
    max_n: int = DEFAULT_MAX_N
    grid: tuple = ()
    replications: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.problem not in ("gaussian", "gaussian-identity", "weibull"):
            raise DataError(f"unknown problem {self.problem!r}")
        kind = EstimatorKind.parse(self.estimator)
        object.__setattr__(self, "estimator", kind.value)
        if self.problem == "weibull" and kind is not EstimatorKind.SNIS:
            raise DataError("the Weibull posterior has an unknown normalizing constant; use SNIS")
        if self.replications < 1:
            raise DataError("replications must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise DataError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "grid", tuple(sorted(int(g) for g in self.grid)))
        if any(g < 1 for g in self.grid):
            raise DataError("grid sizes must be positive")

    def stop_config(self, p):
        return StopConfig(self.alpha, self.epsilon, p, self.n_star, self.check_every, self.max_n)

    def manifest(self):
        d = asdict(self)
        d["grid"] = ",".join(str(g) for g in self.grid)
        return d


@dataclass
class Problem:
    sampler: object
    h: object
    p: int
    truth: np.ndarray | None = None


def build_problem(cfg: ExperimentConfig) -> Problem:
    if cfg.problem == "weibull":
        model = StepStressModel(h=cfg.integrand)
        return Problem(model.sample, model.h, model.p)
    if cfg.problem == "gaussian-identity":
        prob = identity_problem(cfg.setting, cfg.dim)
    else:
        prob = make_setting(cfg.setting, cfg.dim)
    return Problem(prob.sample, prob.h, prob.p, prob.truth)


def thread_count():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _map_reps(fn, reps):
    workers = min(thread_count(), reps)
    if workers <= 1:
        return [fn(r) for r in range(reps)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(reps)))


# -- ESS curves --------------------------------------------------------------

@dataclass
class CurveResult:
    header: list
    rows: list
    summary_header: list
    summary: list


def _curve_rep(cfg, problem, rep):
    rng = make_rng(cfg.seed, rep)
    stats = SuffStats.empty(problem.p)
    offset = LogWeightOffset(enabled=cfg.estimator == "SNIS")
    rows = []
    for n in cfg.grid:
        m = n - stats.n
        if m > 0:
            draws, logw = problem.sampler(rng, m)
            stats, batch = offset.batch(stats, problem.h(draws), logw)
            stats = accumulate(stats, batch)
        try:
            rows.append((rep, ess_report(stats, cfg.estimator), ""))
        except IsStopError as exc:
            rows.append((rep, None, f"{type(exc).__name__}: {exc}"))
    return rows


def run_ess_curve(cfg: ExperimentConfig) -> CurveResult:
    """ESS estimates on a fixed grid of sample sizes for every replication."""
    if not cfg.grid:
        raise DataError("run_ess_curve needs a grid of sample sizes")
    problem = build_problem(cfg)
    p = problem.p
    per_rep = _map_reps(lambda r: _curve_rep(cfg, problem, r), cfg.replications)
    header = ["rep", "n", "kong", "mess"] + [f"uni_ess_{j}" for j in range(1, p + 1)] \
        + [f"oess_{j}" for j in range(1, p + 1)] + ["error"]
    rows = []
    nan_tail = ["nan"] * (2 + 2 * p)
    for rep_rows in per_rep:
        for (rep, report, err), n_grid in zip(rep_rows, cfg.grid):
            if report is None:
                rows.append([str(rep), str(n_grid)] + nan_tail + [err])
            else:
                rows.append([str(rep), str(report.n), repr(report.kong), repr(report.mess)]
                            + [repr(float(v)) for v in report.uni_ess]
                            + [repr(float(v)) for v in report.oess] + [""])

    # mean and two-standard-deviation band of ESS/n per grid point
    metrics = ["kong", "mess"] + [f"uni_ess_{j}" for j in range(1, p + 1)] \
        + [f"oess_{j}" for j in range(1, p + 1)]
    summary_header = ["n", "reps_ok"]
    for name in metrics:
        summary_header += [f"{name}_per_n_mean", f"{name}_per_n_lo", f"{name}_per_n_hi"]
    summary = []
    for gi, n in enumerate(cfg.grid):
        vals = np.array([
            [float(x) for x in rows[r * len(cfg.grid) + gi][2:2 + len(metrics)]]
            for r in range(cfg.replications)
        ]) / n
        ok = vals[np.all(np.isfinite(vals), axis=1)]
        line = [str(n), str(ok.shape[0])]
        for k in range(len(metrics)):
            if ok.shape[0]:
                mean = float(ok[:, k].mean())
                sd = float(ok[:, k].std(ddof=1)) if ok.shape[0] > 1 else 0.0
            else:
                mean = sd = math.nan
            line += [repr(mean), repr(mean - 2 * sd), repr(mean + 2 * sd)]
        summary.append(line)
    return CurveResult(header, rows, summary_header, summary)


# -- stopping studies ----------------------------------------------------------

@dataclass
class StudyRow:
    rep: int
    terminated: bool
    n_final: int
    mess_final: float
    l2_error: float
    covered: bool | None
    singular_checks: int


@dataclass
class StudyResult:
    rows: list
    summary: dict = field(default_factory=dict)
    outcomes: list = field(default_factory=list)

    HEADER = ("rep", "terminated", "n_final", "mess_final", "l2_error", "covered", "singular_checks")

    def termination_n(self):
        return np.array([r.n_final for r in self.rows if r.terminated])


def _study_rep(cfg, problem, stop_cfg, rep, keep_outcome):
    rng = make_rng(cfg.seed, rep)
    out = run_until_stop(problem.sampler, problem.h, cfg.estimator, stop_cfg, rng,
                         keep_checks=keep_outcome)
    l2 = covered = None
    if problem.truth is not None:
        l2 = float(np.linalg.norm(out.mu_star - problem.truth))
        if out.terminated:
            covered = in_region(problem.truth, out.mu_star, out.omega_hat, out.n_final, cfg.alpha)
    row = StudyRow(rep, out.terminated, out.n_final, out.mess_final,
                   math.nan if l2 is None else l2, covered, out.singular_checks)
    return row, (out if keep_outcome else None)


def run_stopping_study(cfg: ExperimentConfig, keep_outcomes=False) -> StudyResult:
    """Run the stopping rule in every replication and summarize termination and coverage."""
    problem = build_problem(cfg)
    stop_cfg = cfg.stop_config(problem.p)
    res = _map_reps(lambda r: _study_rep(cfg, problem, stop_cfg, r, keep_outcomes),
                    cfg.replications)
    rows = [r for r, _ in res]
    outcomes = [o for _, o in res] if keep_outcomes else []
    done = [r for r in rows if r.terminated]
    nfin = np.array([r.n_final for r in done], dtype=float)
    cov = [r.covered for r in done if r.covered is not None]
    summary = {
        "replications": len(rows),
        "terminated": len(done),
        "not_terminated": len(rows) - len(done),
        "threshold_L": stop_cfg.threshold,
        "mean_n": float(nfin.mean()) if nfin.size else math.nan,
        "median_n": float(np.median(nfin)) if nfin.size else math.nan,
        "coverage": float(np.mean(cov)) if cov else math.nan,
        "mean_l2_error": float(np.mean([r.l2_error for r in done])) if done and problem.truth is not None else math.nan,
    }
    return StudyResult(rows, summary, outcomes)


# -- output ------------------------------------------------------------------

def _comment_block(cfg, extra=None):
    lines = [f"# {k}={v}" for k, v in cfg.manifest().items()]
    for k, v in (extra or {}).items():
        lines.append(f"# {k}={v}")
    return "\n".join(lines) + "\n"


def _fmt(v):
    if isinstance(v, bool):
        return str(int(v))
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, header, rows, cfg, extra=None):
    """CSV preceded by a ``# key=value`` block recording the configuration."""
    buf = io.StringIO()
    buf.write(_comment_block(cfg, extra))
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def write_manifest(path, cfg, extra=None):
    lines = [f"{k}={v}" for k, v in cfg.manifest().items()]
    lines += [f"{k}={_fmt(v)}" for k, v in (extra or {}).items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_curve(result: CurveResult, cfg, out):
    out = Path(out)
    write_csv(out, result.header, result.rows, cfg)
    summary = out.with_name(out.stem + "_summary" + out.suffix)
    write_csv(summary, result.summary_header, result.summary, cfg)
    write_manifest(out.with_suffix(".manifest"), cfg, {"kind": "ess-curve", "summary": summary.name})
    return summary


def write_study(result: StudyResult, cfg, out):
    out = Path(out)
    rows = [[getattr(r, f) for f in StudyResult.HEADER] for r in result.rows]
    write_csv(out, StudyResult.HEADER, rows, cfg, result.summary)
    write_manifest(out.with_suffix(".manifest"), cfg, {"kind": "stop-study", **result.summary})
