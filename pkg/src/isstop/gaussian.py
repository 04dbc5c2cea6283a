"""Gaussian target and proposal with closed-form asymptotic covariances.

Target ``N(mu, Lambda)``, proposal ``N(mu, Upsilon)`` and ``h(x) = x``. Both
densities are normalized, so the weights carry the true normalizing
constant and the unnormalized estimator is available too.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    DataError,
    InfiniteVarianceError,
    InfiniteVarianceWarning,
    NotPositiveDefiniteError,
)
from .estimators import EstimatorKind
from .numerics import cholesky, mvn_sample

# (target correlation, proposal correlation) for the three settings.
SETTINGS = {1: (0.1, 0.1), 2: (0.5, 0.5), 3: (0.8, 0.7)}
TARGET_SCALES = (2.0, 1.0)
PROPOSAL_SCALES = (2.0, 2.0)


def block_covariance(p, s1, s2, corr):
    """Two equicorrelated blocks of size ``p/2`` with variances ``s1`` and ``s2``.

    Within a block the covariance is ``corr * s``; across blocks every entry
    is ``corr * sqrt(s1 s2)``.
    """
    if p < 2 or p % 2:
        raise DataError(f"dimension must be even and at least 2, got {p}")
    k = p // 2
    equi = corr * np.ones((k, k)) + (1.0 - corr) * np.eye(k)
    cross = corr * math.sqrt(s1 * s2) * np.ones((k, k))
    return np.block([[s1 * equi, cross], [cross, s2 * equi]])


class GaussianProblem:
    """Gaussian importance sampling problem with known ground truth.

    Parameters
    ----------
    mu : array_like, shape (p,)
        Common mean of target and proposal.
    lam : array_like, shape (p, p)
        Target covariance.
    upsilon : array_like, shape (p, p)
        Proposal covariance.
    """

    def __init__(self, mu, lam, upsilon):
        self.mu = np.asarray(mu, dtype=np.float64).reshape(-1)
        self.lam = np.asarray(lam, dtype=np.float64)
        self.upsilon = np.asarray(upsilon, dtype=np.float64)
        p = self.mu.shape[0]
        if self.lam.shape != (p, p) or self.upsilon.shape != (p, p):
            raise DataError("mean and covariance dimensions differ")
        self._lam_f = cholesky(self.lam)
        self._ups_f = cholesky(self.upsilon)
        self._lam_inv = self._lam_f.solve(np.eye(p))
        self._ups_inv = self._ups_f.solve(np.eye(p))
        self._lam_inv = 0.5 * (self._lam_inv + self._lam_inv.T)
        self._ups_inv = 0.5 * (self._ups_inv + self._ups_inv.T)
        m = 2.0 * self._lam_inv - self._ups_inv
        self._m = 0.5 * (m + m.T)
        try:
            self._m_f = cholesky(self._m)
        except NotPositiveDefiniteError:
            self._m_f = None
            warnings.warn(
                "2 Lambda^-1 - Upsilon^-1 is not positive definite; the importance "
                "sampling estimators have infinite variance",
                InfiniteVarianceWarning,
                stacklevel=2,
            )

    @property
    def p(self):
        return self.mu.shape[0]

    @property
    def finite_variance(self):
        return self._m_f is not None

    def _require_finite(self):
        if self._m_f is None:
            raise InfiniteVarianceError("2 Lambda^-1 - Upsilon^-1 is not positive definite")
        return self._m_f

    def _log_prefactor(self):
        mf = self._require_finite()
        return 0.5 * self._ups_f.log_det() - self._lam_f.log_det() - 0.5 * mf.log_det()

    def _m_inv(self):
        inv = self._require_finite().solve(np.eye(self.p))
        return 0.5 * (inv + inv.T)

    def true_omega_snis(self):
        """Limiting covariance of the self-normalized estimator."""
        return math.exp(self._log_prefactor()) * self._m_inv()

    def true_omega_uis(self):
        """Limiting covariance of the unnormalized estimator."""
        c = math.exp(self._log_prefactor())
        mm = np.outer(self.mu, self.mu)
        return c * (self._m_inv() + mm) - mm

    def true_omega(self, kind):
        if EstimatorKind.parse(kind) is EstimatorKind.SNIS:
            return self.true_omega_snis()
        return self.true_omega_uis()

    def true_mess_ratio(self, kind=EstimatorKind.SNIS):
        """True M-ESS/n, ``(|Lambda| / |Omega|)^(1/p)``."""
        return math.exp((self._lam_f.log_det() - cholesky(self.true_omega(kind)).log_det()) / self.p)

    def true_univariate_ratio(self, kind=EstimatorKind.SNIS):
        return np.diag(self.lam) / np.diag(self.true_omega(kind))

    def _log_density(self, x, factor):
        d = np.atleast_2d(x) - self.mu
        z = solve_triangular(factor.L, d.T, lower=True)
        quad = np.sum(z * z, axis=0)
        return -0.5 * quad - 0.5 * factor.log_det() - 0.5 * self.p * math.log(2.0 * math.pi)

    def log_target(self, x):
        return self._log_density(x, self._lam_f)

    def log_proposal(self, x):
        return self._log_density(x, self._ups_f)

    def log_weight(self, x):
        return self.log_target(x) - self.log_proposal(x)

    def weight(self, x):
        """Importance weight ``pi(x) / q(x)``; scalar for a single point."""
        w = np.exp(self.log_weight(x))
        return float(w[0]) if np.ndim(x) == 1 else w

    def sample(self, rng, m):
        """``m`` proposal draws and their log-weights."""
        x = mvn_sample(self.mu, self._ups_f, rng, size=m)
        return x, self.log_weight(x)

    @staticmethod
    def h(x):
        return x

    @property
    def truth(self):
        return self.mu


def make_setting(setting, p=2):
    """One of the three reference problems (low, medium, high correlation), ``mu = 1_p``."""
    if setting not in SETTINGS:
        raise DataError(f"setting must be 1, 2 or 3, got {setting}")
    if p < 2 or p % 2:
        raise DataError(f"dimension must be even and at least 2, got {p}")
    lam_corr, ups_corr = SETTINGS[setting]
    lam = block_covariance(p, *TARGET_SCALES, lam_corr)
    ups = block_covariance(p, *PROPOSAL_SCALES, ups_corr)
    return GaussianProblem(np.ones(p), lam, ups)


def identity_problem(setting=1, p=2):
    """Proposal equal to the target, so every weight is exactly one."""
    base = make_setting(setting, p)
    return GaussianProblem(base.mu, base.lam, base.lam.copy())
