"""Small dense linear algebra, chi-squared quantiles and random variates.

Gamma variates use the shape/rate convention everywhere in this package
(mean = shape / rate).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DataError, NotPositiveDefiniteError

_SYM_TOL = 1e-10


class SpdMatrix:
    """Cholesky factor ``L`` (lower triangular) of a symmetric positive definite matrix."""

    __slots__ = ("L",)

    def __init__(self, L):
        self.L = L

    @property
    def dim(self):
        return self.L.shape[0]

    def log_det(self):
        return 2.0 * float(np.sum(np.log(np.diag(self.L))))

    def solve(self, v):
        y = solve_triangular(self.L, v, lower=True)
        return solve_triangular(self.L.T, y, lower=False)

    def reconstruct(self):
        return self.L @ self.L.T

    def inv_quad(self, v):
        """Return ``v^T M^{-1} v``."""
        y = solve_triangular(self.L, v, lower=True)
        return float(np.dot(y, y))


def cholesky(m) -> SpdMatrix:
    """Factor ``m = L L^T``.

    Raises
    ------
    NotPositiveDefiniteError
        With the index of the first non-positive pivot.
    """
    a = np.array(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DataError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DataError("matrix has non-finite entries")
    p = a.shape[0]
    scale = max(1.0, float(np.max(np.abs(a)))) if p else 1.0
    if np.max(np.abs(a - a.T), initial=0.0) > _SYM_TOL * scale:
        raise DataError("matrix is not symmetric")
    L = np.zeros_like(a)
    for j in range(p):
        d = a[j, j] - np.dot(L[j, :j], L[j, :j])
        if not d > 0.0:
            raise NotPositiveDefiniteError(j, d)
        L[j, j] = math.sqrt(d)
        if j + 1 < p:
            L[j + 1:, j] = (a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return SpdMatrix(L)


def log_det(m) -> float:
    f = m if isinstance(m, SpdMatrix) else cholesky(m)
    return f.log_det()


def solve(m, v):
    f = m if isinstance(m, SpdMatrix) else cholesky(m)
    return f.solve(np.asarray(v, dtype=np.float64))


# -- regularized incomplete gamma -------------------------------------------

_EPS = 1e-16
_MAX_ITER = 10_000
_TINY = 1e-300


def _log_p_series(a, x):
    # log of P(a, x) by the power series; converges quickly for x < a + 1.
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return math.log(total) - x + a * math.log(x) - math.lgamma(a)


def _log_q_cf(a, x):
    # log of Q(a, x) by the Legendre continued fraction (modified Lentz).
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.log(h) - x + a * math.log(x) - math.lgamma(a)


def _log1mexp(v):
    # log(1 - exp(v)) for v <= 0.
    if v > -math.log(2.0):
        return math.log(-math.expm1(v))
    return math.log1p(-math.exp(v))


def log_gamma_pq(a, x):
    """Return ``(log P(a, x), log Q(a, x))`` for the regularized incomplete gamma."""
    if a <= 0:
        raise DataError(f"shape must be positive, got {a}")
    if x < 0:
        raise DataError(f"x must be nonnegative, got {x}")
    if x == 0:
        return -math.inf, 0.0
    if x < a + 1.0:
        lp = _log_p_series(a, x)
        return lp, _log1mexp(min(lp, 0.0))
    lq = _log_q_cf(a, x)
    return _log1mexp(min(lq, 0.0)), lq


def gamma_p(a, x):
    """Regularized lower incomplete gamma ``P(a, x)``."""
    return math.exp(log_gamma_pq(a, x)[0])


def gamma_q(a, x):
    return math.exp(log_gamma_pq(a, x)[1])


def chisq_cdf(x, dof):
    return gamma_p(dof / 2.0, x / 2.0)


def chisq_sf(x, dof):
    return gamma_q(dof / 2.0, x / 2.0)


def _chisq_log_pdf(x, dof):
    k = dof / 2.0
    return (k - 1.0) * math.log(x) - x / 2.0 - k * math.log(2.0) - math.lgamma(k)


def chisq_quantile(prob, dof):
    """Quantile of the chi-squared distribution with ``dof`` degrees of freedom.

    Safeguarded Newton iteration in ``log x`` on the log of whichever tail is
    smaller, so very small and very large probabilities keep full relative
    accuracy.
    """
    if not (0.0 < prob < 1.0):
        raise DataError(f"probability must be in (0, 1), got {prob}")
    if int(dof) != dof or dof < 1:
        raise DataError(f"degrees of freedom must be a positive integer, got {dof}")
    dof = int(dof)
    if dof == 2:
        return -2.0 * math.log1p(-prob)
    a = dof / 2.0
    lower_tail = prob <= 0.5
    target = math.log(prob) if lower_tail else math.log1p(-prob)

    def resid(x):
        lp, lq = log_gamma_pq(a, x / 2.0)
        return (lp - target) if lower_tail else (target - lq), lp, lq

    lo, hi = 0.0, max(1.0, float(dof))
    while resid(hi)[0] < 0.0:
        lo, hi = hi, 2.0 * hi
    x = 0.5 * hi
    for _ in range(200):
        r, lp, lq = resid(x)
        if r == 0.0:
            return x
        if r < 0.0:
            lo = x
        else:
            hi = x
        # Newton in log x: d/dlog(x) of log P is x pdf / P (of -log Q, x pdf / Q).
        lpdf = _chisq_log_pdf(x, dof)
        slope = math.exp(math.log(x) + lpdf - (lp if lower_tail else lq))
        nxt = x * math.exp(-r / slope) if slope > 0 and abs(r / slope) < 700 else -1.0
        if not (lo < nxt < hi):
            nxt = math.sqrt(lo * hi) if lo > 0.0 else hi / 16.0
        if abs(nxt - x) <= 1e-15 * x:
            return nxt
        x = nxt
    return x


# -- random variates ---------------------------------------------------------

def make_rng(seed, *keys):
    """Counter-based generator for the substream identified by ``keys``.

    ``make_rng(seed, rep)`` gives one independent stream per replication;
    the same ``(seed, keys)`` always reproduces the same stream.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def mvn_sample(mean, cov, rng, size=None):
    """Multivariate normal draws via the Cholesky factor of ``cov``."""
    mean = np.asarray(mean, dtype=np.float64)
    L = cov.L if isinstance(cov, SpdMatrix) else cholesky(cov).L
    if L.shape[0] != mean.shape[0]:
        raise DataError("mean and covariance dimensions differ")
    shape = (mean.shape[0],) if size is None else (int(size), mean.shape[0])
    z = rng.standard_normal(shape)
    return mean + z @ L.T


def gamma_sample(shape, rate, rng, size=None):
    shape = np.asarray(shape, dtype=np.float64)
    rate = np.asarray(rate, dtype=np.float64)
    if np.any(shape <= 0) or np.any(rate <= 0):
        raise DataError("gamma shape and rate must be positive")
    return rng.gamma(shape, 1.0 / rate, size=size)


def dirichlet_sample(alphas, rng, size=None):
    alphas = np.asarray(alphas, dtype=np.float64)
    if alphas.ndim != 1 or alphas.size < 2 or np.any(alphas <= 0):
        raise DataError("dirichlet parameters must be a vector of positive values")
    shape = alphas.shape if size is None else (int(size),) + alphas.shape
    g = rng.gamma(np.broadcast_to(alphas, shape), 1.0)
    return g / g.sum(axis=-1, keepdims=True)
