"""Point estimators, covariance plug-ins and effective sample sizes.

Everything here is a pure function of :class:`~isstop.samples.SuffStats`,
except :func:`owen_oess_samples`, which works on stored per-sample values.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateTargetWarning,
    DegenerateWeightsError,
    EmptyStatsError,
    NotPositiveDefiniteError,
    SingularCovarianceError,
    UndefinedOESSError,
)
from .numerics import cholesky
from .samples import SuffStats

# Smallest eigenvalue below this fraction of the largest counts as singular.
SINGULAR_RTOL = 1e-12


class EstimatorKind(str, enum.Enum):
    """Unnormalized (requires a known normalizing constant) or self-normalized."""

    UIS = "UIS"
    SNIS = "SNIS"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"unknown estimator {value!r}; use UIS or SNIS") from None


def _need_weight(stats):
    if not stats.Sw > 0:
        raise DegenerateWeightsError("sum of weights is zero")


def _need_samples(stats):
    if stats.n == 0:
        raise EmptyStatsError("no samples accumulated")


def _sym(m):
    return 0.5 * (m + m.T)


def snis_mean(stats: SuffStats) -> np.ndarray:
    _need_weight(stats)
    return stats.Swh / stats.Sw


def uis_mean(stats: SuffStats) -> np.ndarray:
    _need_samples(stats)
    return stats.Swh / stats.n


def sigma_hat_snis(stats: SuffStats) -> np.ndarray:
    """Self-normalized weighted covariance of ``h`` (target covariance estimate)."""
    mu = snis_mean(stats)
    return _sym(stats.Swhh / stats.Sw - np.outer(mu, mu))


def omega_hat_snis(stats: SuffStats) -> np.ndarray:
    """Plug-in asymptotic covariance of the self-normalized estimator.

    ``n * sum_i wbar_i^2 (h_i - mu)(h_i - mu)^T`` expanded in terms of the
    running sums.
    """
    mu = snis_mean(stats)
    cross = np.outer(stats.Sw2h, mu)
    inner = stats.Sw2hh - cross - cross.T + stats.Sw2 * np.outer(mu, mu)
    return _sym(stats.n * inner / stats.Sw**2)


def sigma_hat_uis(stats: SuffStats) -> np.ndarray:
    mu = uis_mean(stats)
    n = stats.n
    cross = np.outer(stats.Swh / n, mu)
    return _sym(stats.Swhh / n - cross - cross.T + (stats.Sw / n) * np.outer(mu, mu))


def omega_hat_uis(stats: SuffStats) -> np.ndarray:
    """Sample covariance of ``w_i h_i`` with denominator ``n``."""
    mu = uis_mean(stats)
    return _sym(stats.Sw2hh / stats.n - np.outer(mu, mu))


def point_estimate(stats, kind):
    return snis_mean(stats) if EstimatorKind.parse(kind) is EstimatorKind.SNIS else uis_mean(stats)


def sigma_hat(stats, kind):
    if EstimatorKind.parse(kind) is EstimatorKind.SNIS:
        return sigma_hat_snis(stats)
    return sigma_hat_uis(stats)


def omega_hat(stats, kind):
    if EstimatorKind.parse(kind) is EstimatorKind.SNIS:
        return omega_hat_snis(stats)
    return omega_hat_uis(stats)


def kong_ess(stats: SuffStats) -> float:
    """Weight-only ESS ``1 / sum wbar_i^2``."""
    _need_weight(stats)
    k = stats.Sw**2 / stats.Sw2
    # Rounding can push the ratio a few ulps outside its exact range.
    return float(min(max(k, 1.0), stats.n))


def owen_oess(stats: SuffStats, j=None):
    """Owen's ESS for coordinate ``j`` (or all coordinates when ``j`` is None).

    Uses the identity ``sum_i (|h_ij| w_i)^2 = (Sw2hh)_jj``.
    """
    a = stats.Sawh
    b = np.diag(stats.Sw2hh)
    idx = range(stats.p) if j is None else [j]
    out = []
    for k in idx:
        if not a[k] > 0:
            raise UndefinedOESSError(f"all |h_{k + 1}| w are zero")
        out.append(min(max(a[k] ** 2 / b[k], 1.0), float(stats.n)))
    return np.array(out) if j is None else out[0]


def owen_oess_samples(hvals, weights, j):
    """Owen's ESS computed directly from per-sample values."""
    aw = np.abs(np.asarray(hvals, dtype=np.float64)[:, j]) * np.asarray(weights, dtype=np.float64)
    total = aw.sum()
    if not total > 0:
        raise UndefinedOESSError(f"all |h_{j + 1}| w are zero")
    wt = aw / total
    return float(1.0 / np.sum(wt**2))


def _checked_logdet(m, which):
    """Log-determinant, or raise if ``m`` is (numerically) singular."""
    eig = np.linalg.eigvalsh(m)
    top = eig[-1]
    if not top > 0 or eig[0] < SINGULAR_RTOL * top:
        raise SingularCovarianceError(
            which, f"eigenvalue range [{eig[0]:.3g}, {top:.3g}]"
        )
    try:
        return cholesky(m).log_det()
    except NotPositiveDefiniteError as exc:
        raise SingularCovarianceError(which, str(exc)) from None


def log_det_checked(m, which="matrix"):
    return _checked_logdet(m, which)


def mess_from_covariances(n, sigma, omega, omega_name="omega_hat"):
    """``n (|sigma| / |omega|)^(1/p)`` computed with log-determinants."""
    p = sigma.shape[0]
    log_omega = _checked_logdet(omega, omega_name)
    try:
        log_sigma = _checked_logdet(sigma, "sigma_hat")
    except SingularCovarianceError:
        warnings.warn("target covariance estimate is singular; M-ESS set to 0",
                      DegenerateTargetWarning, stacklevel=3)
        return 0.0
    return float(n * np.exp((log_sigma - log_omega) / p))


def mess_hat(stats: SuffStats, kind=EstimatorKind.SNIS) -> float:
    """Plug-in multivariate ESS for the chosen estimator."""
    kind = EstimatorKind.parse(kind)
    name = "omega_hat_snis" if kind is EstimatorKind.SNIS else "omega_hat_uis"
    return mess_from_covariances(stats.n, sigma_hat(stats, kind), omega_hat(stats, kind), name)


def univariate_ess(stats: SuffStats, kind=EstimatorKind.SNIS) -> np.ndarray:
    """Per-coordinate ESS ``n * sigma_jj / omega_jj``."""
    kind = EstimatorKind.parse(kind)
    s = np.diag(sigma_hat(stats, kind))
    o = np.diag(omega_hat(stats, kind))
    with np.errstate(divide="ignore", invalid="ignore"):
        return stats.n * s / o


@dataclass(frozen=True)
class EssReport:
    n: int
    mess: float
    kong: float
    uni_ess: np.ndarray
    oess: np.ndarray

    @staticmethod
    def csv_header(p):
        return (["n", "mess", "kong"]
                + [f"uni_ess_{j}" for j in range(1, p + 1)]
                + [f"oess_{j}" for j in range(1, p + 1)])

    def csv_row(self):
        vals = [self.n, self.mess, self.kong, *self.uni_ess, *self.oess]
        return [str(v) if isinstance(v, (int, np.integer)) else repr(float(v)) for v in vals]


def ess_report(stats: SuffStats, kind=EstimatorKind.SNIS) -> EssReport:
    return EssReport(
        n=stats.n,
        mess=mess_hat(stats, kind),
        kong=kong_ess(stats),
        uni_ess=univariate_ess(stats, kind),
        oess=owen_oess(stats),
    )
