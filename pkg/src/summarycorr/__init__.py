"""Estimate a bivariate normal correlation from study-level marginal summaries."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    DegenerateInputError,
    DomainError,
    InputFormatError,
    NumericalError,
    SummaryCorrError,
    ValidationError,
)
from .model import (  # noqa: E402
    PooledParams,
    StudySummary,
    log_integrated_likelihood,
    mle_mu,
    mle_sigma,
)
from .estimator import RhoEstimate, estimate_full, estimate_rho  # noqa: E402
from .baselines import naive_pearson, weighted_pearson  # noqa: E402
