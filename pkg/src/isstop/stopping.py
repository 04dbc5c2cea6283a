"""Confidence regions and the sequential relative-volume stopping rule.

The controller draws in increments of ``check_every`` and stops at the first
check where

    Vol(C_alpha(n))^(1/p) + s(n) <= epsilon * R_n,

with ``R_n = |Sigma_hat|^(1/2p)`` and ``s(n) = epsilon R_n 1{n < n_star} + 1/n``.
Ignoring ``1/n`` this is the same as ``M-ESS_hat >= L(alpha, epsilon, p)``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import (
    DataError,
    DegenerateTargetWarning,
    DegenerateWeightsError,
    SingularCovarianceError,
)
from .estimators import (
    EstimatorKind,
    kong_ess,
    log_det_checked,
    mess_from_covariances,
    omega_hat,
    point_estimate,
    sigma_hat,
)
from .numerics import chisq_quantile, cholesky
from .samples import LogWeightOffset, SuffStats, accumulate

DEFAULT_CHECK_EVERY = 500
DEFAULT_MAX_N = 10_000_000


def _log_unit_ball(p):
    # log of 2 pi^(p/2) / (p Gamma(p/2)), the volume of the unit p-ball.
    return math.log(2.0) + 0.5 * p * math.log(math.pi) - math.log(p) - math.lgamma(p / 2.0)


def threshold_L(alpha, epsilon, p):
    """Minimum M-ESS equivalent to the relative-volume rule."""
    _check_alpha(alpha)
    if not epsilon > 0:
        raise DataError(f"epsilon must be positive, got {epsilon}")
    # 2^(2/p) pi / (p Gamma(p/2))^(2/p) is the unit-ball volume to the power 2/p.
    log_c = (2.0 / p) * _log_unit_ball(p)
    return math.exp(log_c) * chisq_quantile(1.0 - alpha, p) / epsilon**2


def _check_alpha(alpha):
    if not (0.0 < alpha < 1.0):
        raise DataError(f"alpha must be in (0, 1), got {alpha}")


def log_region_volume(omega_hat, n, alpha):
    omega_hat = np.asarray(omega_hat, dtype=np.float64)
    _check_alpha(alpha)
    if n < 1:
        raise DataError(f"n must be at least 1, got {n}")
    p = omega_hat.shape[0]
    chi2 = chisq_quantile(1.0 - alpha, p)
    log_det = log_det_checked(omega_hat, "omega_hat")
    return _log_unit_ball(p) + 0.5 * p * (math.log(chi2) - math.log(n)) + 0.5 * log_det


def region_volume(omega_hat, n, alpha):
    """Volume of the ellipsoidal ``100(1 - alpha)%`` confidence region."""
    return math.exp(log_region_volume(omega_hat, n, alpha))


def in_region(mu, mu_star, omega_hat, n, alpha):
    """Whether ``mu`` lies strictly inside the confidence region around ``mu_star``."""
    _check_alpha(alpha)
    omega_hat = np.asarray(omega_hat, dtype=np.float64)
    p = omega_hat.shape[0]
    try:
        factor = cholesky(omega_hat)
    except Exception as exc:
        raise SingularCovarianceError("omega_hat", str(exc)) from None
    d = np.asarray(mu_star, dtype=np.float64) - np.asarray(mu, dtype=np.float64)
    return bool(n * factor.inv_quad(d) < chisq_quantile(1.0 - alpha, p))


def padding_s(n, epsilon, r_n, n_star):
    """``epsilon r_n 1{n < n_star} + 1/n``; blocks stopping before ``n_star``."""
    if n < 1:
        raise DataError(f"n must be at least 1, got {n}")
    if r_n < 0:
        raise DataError(f"r_n must be nonnegative, got {r_n}")
    return (epsilon * r_n if n < n_star else 0.0) + 1.0 / n


@dataclass(frozen=True)
class StopConfig:
    alpha: float
    epsilon: float
    p: int
    n_star: int | None = None
    check_every: int = DEFAULT_CHECK_EVERY
    max_n: int = DEFAULT_MAX_N

    def __post_init__(self):
        if self.n_star is None:
            object.__setattr__(self, "n_star", max(1000, 10 * self.p))
        _check_alpha(self.alpha)
        if not self.epsilon > 0:
            raise DataError(f"epsilon must be positive, got {self.epsilon}")
        if self.p < 1:
            raise DataError(f"p must be at least 1, got {self.p}")
        if self.n_star < self.p + 1:
            raise DataError(f"n_star must be at least p + 1 = {self.p + 1}")
        if self.check_every < 1:
            raise DataError("check_every must be at least 1")
        if self.max_n < self.n_star:
            raise DataError("max_n must be at least n_star")

    @property
    def threshold(self):
        return threshold_L(self.alpha, self.epsilon, self.p)


@dataclass(frozen=True)
class CheckRecord:
    """State of the controller at one stopping check."""

    n: int
    volume: float
    mess: float
    kong: float
    threshold_L: float
    stopped: bool
    r_n: float = math.nan
    padding: float = math.nan
    # vol^(1/p) / (epsilon R_n) and sqrt(L / mess): equal when R_n is the default.
    volume_ratio: float = math.nan
    mess_ratio: float = math.nan
    singular: bool = False

    TRACE_FIELDS = ("n", "volume", "mess", "kong", "threshold_L", "stopped")


@dataclass
class StopOutcome:
    terminated: bool
    n_final: int
    mess_final: float
    mu_star: np.ndarray
    omega_hat: np.ndarray
    volume: float
    threshold_L: float
    stats: SuffStats | None = None
    checks: list = field(default_factory=list)
    singular_checks: int = 0

    @property
    def mess_per_n(self):
        """M-ESS/n at every check; drifts toward 0 when the variance is infinite."""
        return np.array([c.mess / c.n for c in self.checks])


def default_r_n(sigma, p):
    """``|Sigma_hat|^(1/2p)``."""
    return math.exp(log_det_checked(sigma, "sigma_hat") / (2.0 * p))


Sampler = Callable[[np.random.Generator, int], tuple]


def run_until_stop(
    sampler: Sampler,
    h: Callable[[np.ndarray], np.ndarray],
    kind,
    cfg: StopConfig,
    rng: np.random.Generator,
    *,
    r_hook=None,
    keep_checks=True,
) -> StopOutcome:
    """Sample until the relative-volume rule is met or ``cfg.max_n`` is reached.

    Parameters
    ----------
    sampler
        ``sampler(rng, m)`` returns ``(draws, log_weights)`` for ``m`` iid
        proposal draws.
    h
        Maps the draws to an ``(m, p)`` array.
    kind
        ``"SNIS"`` or ``"UIS"``. UIS needs weights with the true normalizing
        constant, so its log-weights are used without any offset.
    r_hook
        Optional ``r_hook(sigma_hat, stats)`` replacing ``|Sigma_hat|^(1/2p)``.

    A singular covariance at a check means the region cannot be certified;
    sampling continues and the check is counted in ``singular_checks``.
    """
    kind = EstimatorKind.parse(kind)
    p = cfg.p
    L = cfg.threshold
    stats = SuffStats.empty(p)
    offset = LogWeightOffset(enabled=kind is EstimatorKind.SNIS)
    checks = []
    singular = 0
    last = None
    stopped = False

    while stats.n < cfg.max_n:
        m = min(cfg.check_every, cfg.max_n - stats.n)
        draws, logw = sampler(rng, m)
        hv = np.asarray(h(draws), dtype=np.float64).reshape(m, p)
        stats, batch = offset.batch(stats, hv, logw)
        stats = accumulate(stats, batch)
        n = stats.n

        if not stats.Sw > 0:
            raise DegenerateWeightsError(f"all weights are zero after {n} draws")

        try:
            sig = sigma_hat(stats, kind)
            om = omega_hat(stats, kind)
            with warnings.catch_warnings():
                # A singular sigma_hat is reported through r_n below.
                warnings.simplefilter("ignore", DegenerateTargetWarning)
                mess = mess_from_covariances(n, sig, om)
            vol = region_volume(om, n, cfg.alpha)
            r_n = r_hook(sig, stats) if r_hook is not None else default_r_n(sig, p)
        except SingularCovarianceError:
            singular += 1
            rec = CheckRecord(n, math.nan, math.nan, kong_ess(stats), L, False, singular=True)
            if keep_checks:
                checks.append(rec)
            continue

        pad = padding_s(n, cfg.epsilon, r_n, cfg.n_star)
        stop = vol ** (1.0 / p) + pad <= cfg.epsilon * r_n
        with np.errstate(divide="ignore"):
            vratio = vol ** (1.0 / p) / (cfg.epsilon * r_n) if r_n > 0 else math.inf
            mratio = math.sqrt(L / mess) if mess > 0 else math.inf
        rec = CheckRecord(n, vol, mess, kong_ess(stats), L, bool(stop), r_n, pad, vratio, mratio)
        if keep_checks:
            checks.append(rec)
        last = (mess, om, vol)
        if stop:
            stopped = True
            break

    if last is None:
        mess_f, om_f, vol_f = math.nan, np.full((p, p), math.nan), math.nan
    else:
        mess_f, om_f, vol_f = last
    mu_star = point_estimate(stats, kind)
    return StopOutcome(
        terminated=stopped,
        n_final=stats.n,
        mess_final=mess_f,
        mu_star=mu_star,
        omega_hat=om_f,
        volume=vol_f,
        threshold_L=L,
        stats=stats,
        checks=checks,
        singular_checks=singular,
    )


def write_trace_csv(checks, path):
    """Write the per-check trace ``n,volume,mess,kong,threshold_L,stopped``."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CheckRecord.TRACE_FIELDS)
        for c in checks:
            writer.writerow([c.n, repr(c.volume), repr(c.mess), repr(c.kong),
                             repr(c.threshold_L), int(c.stopped)])
