"""Bayesian Weibull multi-step step-stress model for the fish swimming data.

Lifetimes at stress level ``k`` follow Weibull(alpha, lambda_k) with density
``lambda_k alpha t^(alpha-1) exp(-lambda_k t^alpha)`` and ordered rates
``lambda_1 <= ... <= lambda_4``. Priors are ``alpha ~ Gamma(a, b)`` and
``lambda ~ ODG(a0, b0, a_vec)``.

ODG here is the law of ``G * P`` restricted to ordered vectors, with
``G ~ Gamma(a0, b0)`` the total rate and ``P ~ Dirichlet(a_vec)`` the
proportions. Its density is proportional to

    T^(a0 - sum(a_vec)) exp(-b0 T) prod_j lambda_j^(a_j - 1),  T = sum_j lambda_j,

on the ordered cone. With this law the conditional posterior of ``lambda``
factors exactly into an ODG density times the weight ``g`` below.

Parameter vectors are stored as rows ``theta = (alpha, lambda_1, ..., lambda_4)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import gammaln

from .errors import DataError, DomainError
from .numerics import dirichlet_sample, gamma_sample

# Failure times in minutes at each stress level.
FISH_TIMES = (
    (83.50, 91.00, 91.00, 97.00, 107.00, 109.50),
    (114.00, 115.41, 128.61),
    (133.53, 138.58, 140.00),
    (152.08, 155.10),
)
# Minutes at which the flow rate was increased.
FISH_CHANGE_MINUTES = (110.0, 130.0, 150.0)
TIME_CENTER = 80.0
TIME_SCALE = 100.0


@dataclass(frozen=True)
class StepStressData:
    """Ordered failure times split by stress level, on the modelling time scale."""

    times: tuple
    tau: tuple

    def __post_init__(self):
        flat = [t for level in self.times for t in level]
        if not flat:
            raise DataError("no failure times")
        if any(t <= 0 for t in flat):
            raise DataError("scaled failure times must be positive")
        if any(b < a for a, b in zip(flat, flat[1:])):
            raise DataError("failure times must be non-decreasing across levels")
        if len(self.tau) != len(self.times) - 1:
            raise DataError("need one change time between each pair of levels")
        edges = (0.0,) + tuple(self.tau)
        for k, level in enumerate(self.times):
            lo = edges[k]
            hi = self.tau[k] if k < len(self.tau) else math.inf
            if any(not (lo < t <= hi) for t in level):
                raise DataError(f"a failure time at level {k + 1} lies outside ({lo}, {hi}]")

    @classmethod
    def from_minutes(cls, times_by_level, change_minutes, center=TIME_CENTER, scale=TIME_SCALE):
        times = tuple(tuple((t - center) / scale for t in level) for level in times_by_level)
        tau = tuple((c - center) / scale for c in change_minutes)
        return cls(times, tau)

    @classmethod
    def fish(cls):
        return cls.from_minutes(FISH_TIMES, FISH_CHANGE_MINUTES)

    @classmethod
    def from_csv(cls, path, change_minutes=FISH_CHANGE_MINUTES):
        """Load ``level,time_minutes`` rows (levels numbered from 1)."""
        levels = {}
        with Path(path).open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["level", "time_minutes"]:
                raise DataError("header must be 'level,time_minutes'")
            for row in reader:
                levels.setdefault(int(row["level"]), []).append(float(row["time_minutes"]))
        k = len(change_minutes) + 1
        if sorted(levels) != list(range(1, k + 1)):
            raise DataError(f"expected levels 1..{k}, got {sorted(levels)}")
        return cls.from_minutes([sorted(levels[j]) for j in range(1, k + 1)], change_minutes)

    @property
    def counts(self):
        return np.array([len(level) for level in self.times])

    @property
    def cum_counts(self):
        return np.cumsum(self.counts)

    @property
    def n(self):
        return int(self.counts.sum())

    @property
    def t(self):
        return np.array([x for level in self.times for x in level])

    @property
    def levels(self):
        return len(self.times)

    @property
    def J(self):
        return int(self.counts.min())


@dataclass(frozen=True)
class Hyper:
    a: float = 0.5
    b: float = 0.5
    a0: float = 0.5
    b0: float = 0.5
    a_vec: tuple = field(default=(1.0, 1.0, 1.0, 1.0))

    def __post_init__(self):
        if min(self.a, self.b, self.a0, self.b0, *self.a_vec) <= 0:
            raise DataError("hyperparameters must be positive")


@dataclass(frozen=True)
class StepStressParams:
    alpha: float
    lambdas: tuple

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError("alpha must be positive")
        lam = self.lambdas
        if any(x <= 0 for x in lam) or any(b < a for a, b in zip(lam, lam[1:])):
            raise DomainError("rates must be positive and non-decreasing")

    @property
    def theta(self):
        return np.array((self.alpha, *self.lambdas))

    @classmethod
    def from_theta(cls, theta):
        theta = np.asarray(theta, dtype=np.float64)
        return cls(float(theta[0]), tuple(float(x) for x in theta[1:]))


def d_all(alpha, data: StepStressData):
    """``D_j(alpha)`` for every level; shape ``alpha.shape + (levels,)``.

    ``D_j`` is the total Weibull-scale exposure accumulated during level j:
    failures in the level contribute ``t_i^alpha - tau_{j-1}^alpha`` and the
    units surviving it contribute ``tau_j^alpha - tau_{j-1}^alpha`` each.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    if np.any(alpha <= 0):
        raise DomainError("alpha must be positive")
    a = alpha[..., None]
    n = data.n
    out = []
    start = 0
    prev_tau = None
    cum = data.cum_counts
    for j, level in enumerate(data.times):
        tl = np.asarray(level)
        total = np.sum(tl ** a, axis=-1)
        if j < len(data.tau):
            total = total + (n - cum[j]) * data.tau[j] ** alpha
        if prev_tau is not None:
            total = total - (n - start) * prev_tau ** alpha
        out.append(total)
        start = cum[j]
        prev_tau = data.tau[j] if j < len(data.tau) else None
    return np.stack(out, axis=-1)


def d_j(alpha, j, data: StepStressData):
    """``D_j(alpha)`` for level ``j`` (numbered from 1)."""
    if not 1 <= j <= data.levels:
        raise DataError(f"level must be in 1..{data.levels}, got {j}")
    return d_all(alpha, data)[..., j - 1]


def s_alpha(alpha, data: StepStressData):
    """``S(alpha) = min_j D_j(alpha)``."""
    return d_all(alpha, data).min(axis=-1)


def alpha_proposal_params(data: StepStressData, hyper: Hyper):
    """Shape and rate of the Gamma proposal for ``alpha``."""
    rate = hyper.b - float(np.sum(np.log(data.t)))
    if not rate > 0:
        raise DataError("b - sum(log t) must be positive")
    return data.n + hyper.a, rate


def lambda_proposal_params(alpha, data: StepStressData, hyper: Hyper):
    """ODG parameters ``(a0 + kJ, b0 + S(alpha), a_vec + J)`` given ``alpha``."""
    J = data.J
    k = data.levels
    return hyper.a0 + k * J, hyper.b0 + s_alpha(alpha, data), np.asarray(hyper.a_vec) + J


def sample_ordered_dirichlet(alphas, rng, size):
    """Dirichlet draws conditioned on non-decreasing components."""
    alphas = np.asarray(alphas, dtype=np.float64)
    if np.all(alphas == alphas[0]):
        # Exchangeable: sorting gives exactly the ordered conditional law.
        return np.sort(dirichlet_sample(alphas, rng, size), axis=1)
    out = np.empty((size, alphas.size))
    filled = 0
    while filled < size:
        d = dirichlet_sample(alphas, rng, max(64, 2 * (size - filled)))
        ok = d[np.all(np.diff(d, axis=1) >= 0, axis=1)]
        take = min(ok.shape[0], size - filled)
        out[filled:filled + take] = ok[:take]
        filled += take
    return out


def sample_odg(shape, rate, alphas, rng, size):
    """Ordered Dirichlet-Gamma draws: total ``~Gamma(shape, rate)`` times ordered proportions."""
    total = gamma_sample(shape, rate, rng, size=None if np.ndim(rate) else size)
    props = sample_ordered_dirichlet(alphas, rng, size)
    return np.asarray(total).reshape(-1, 1) * props


def sample_proposal(rng, data: StepStressData, hyper: Hyper, size):
    """Draw ``size`` parameter rows from the Gamma x ODG proposal."""
    shape, rate = alpha_proposal_params(data, hyper)
    alpha = gamma_sample(shape, rate, rng, size=size)
    s0, s1, avec = lambda_proposal_params(alpha, data, hyper)
    lam = sample_odg(s0, s1, avec, rng, size)
    return np.column_stack([alpha, lam])


def log_weight(theta, data: StepStressData, hyper: Hyper):
    """Log of the importance weight ``g(alpha, lambda | D)`` up to a constant."""
    theta = np.atleast_2d(np.asarray(theta, dtype=np.float64))
    alpha, lam = theta[:, 0], theta[:, 1:]
    if np.any(lam <= 0):
        raise DomainError("rates must be positive")
    if np.any(alpha <= 0):
        raise DomainError("alpha must be positive")
    D = d_all(alpha, data)
    S = D.min(axis=1)
    J = data.J
    k = data.levels
    expo = np.sum((data.counts - J) * np.log(lam) - lam * (D - S[:, None]), axis=1)
    return expo - (hyper.a0 + k * J) * np.log(hyper.b0 + S)


def h1(theta):
    """The parameters themselves."""
    return np.atleast_2d(np.asarray(theta, dtype=np.float64)).copy()


def h2(theta):
    """Mean lifetime at each stress level, ``lambda_k^(-1/alpha) Gamma(1 + 1/alpha)``."""
    theta = np.atleast_2d(np.asarray(theta, dtype=np.float64))
    alpha, lam = theta[:, 0], theta[:, 1:]
    if np.any(alpha <= 0):
        raise DomainError("alpha must be positive")
    inv = 1.0 / alpha
    return np.exp(-inv[:, None] * np.log(lam) + gammaln(1.0 + inv)[:, None])


class StepStressModel:
    """Proposal sampler plus weight function, in the form the stopping controller expects."""

    def __init__(self, data: StepStressData | None = None, hyper: Hyper | None = None, h="h1"):
        self.data = data or StepStressData.fish()
        self.hyper = hyper or Hyper()
        if len(self.hyper.a_vec) != self.data.levels:
            raise DataError("a_vec length must equal the number of stress levels")
        alpha_proposal_params(self.data, self.hyper)
        if h not in ("h1", "h2"):
            raise DataError(f"h must be 'h1' or 'h2', got {h!r}")
        self.h_name = h
        self.h = h1 if h == "h1" else h2

    @property
    def p(self):
        return self.data.levels + 1 if self.h_name == "h1" else self.data.levels

    def sample(self, rng, m):
        theta = sample_proposal(rng, self.data, self.hyper, m)
        return theta, log_weight(theta, self.data, self.hyper)
