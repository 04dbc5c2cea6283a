"""Importance sampling estimators, multivariate effective sample size and a
sequential stopping rule with an asymptotically valid confidence region."""

from ._backend import BACKEND
from .errors import (
    DataError,
    DegenerateWeightsError,
    DimensionMismatchError,
    DomainError,
    EmptyStatsError,
    InfiniteVarianceError,
    IsStopError,
    NotPositiveDefiniteError,
    SingularCovarianceError,
    UndefinedOESSError,
)
from .estimators import (
    EssReport,
    EstimatorKind,
    ess_report,
    kong_ess,
    mess_hat,
    omega_hat_snis,
    omega_hat_uis,
    owen_oess,
    owen_oess_samples,
    sigma_hat_snis,
    sigma_hat_uis,
    snis_mean,
    uis_mean,
    univariate_ess,
)
from .gaussian import GaussianProblem, make_setting
from .numerics import chisq_quantile, cholesky, make_rng
from .samples import SuffStats, WeightedBatch, accumulate, merge, read_batch_csv
from .stopping import (
    StopConfig,
    StopOutcome,
    in_region,
    padding_s,
    region_volume,
    run_until_stop,
    threshold_L,
)
from .weibull import StepStressData, StepStressModel

__version__ = "0.1.0"
