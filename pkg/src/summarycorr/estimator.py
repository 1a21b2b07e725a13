"""Maximum likelihood estimation of the correlation and its confidence intervals.

The means and standard deviations are fixed at their closed-form estimates;
``ρ`` is then found by a coarse grid search followed by bounded Brent
refinement on ``[-1+ε, 1-ε]``.  Two intervals are offered: a Wald interval
from the observed information and a likelihood-ratio interval obtained by
root finding on each side of the maximum.

Functions that need the profile accept either a list of
:class:`~summarycorr.model.StudySummary` or any callable ``ρ -> ℓ(ρ)``; the
latter is the test seam.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
from scipy import optimize

from .errors import DomainError, NumericalError
from .model import IntegratedLikelihood, PooledParams, StudySummary, mle_mu, mle_sigma
from .special import chi2_quantile_df1, normal_quantile

__all__ = [
    "BOUNDARY_EPS",
    "INIT_GRID",
    "Interval",
    "RhoEstimate",
    "profile_likelihood",
    "estimate_rho",
    "observed_information",
    "wald_ci",
    "lrt_ci",
    "estimate_full",
]

BOUNDARY_EPS = 1e-6
RHO_LOWER = -1.0 + BOUNDARY_EPS
RHO_UPPER = 1.0 - BOUNDARY_EPS
INIT_GRID = np.linspace(-0.975, 0.975, 41)
RHO_XTOL = 1e-8
ROOT_XTOL = 1e-10

LogLik = Callable[[float], float]


@dataclass(frozen=True)
class Interval:
    """Confidence interval with flags for bounds that hit the domain edge.

    Unpacks as ``lo, hi``.
    """

    lo: float
    hi: float
    lo_truncated: bool = False
    hi_truncated: bool = False

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, value: float) -> bool:
        return self.lo <= value <= self.hi

    def __iter__(self):
        yield self.lo
        yield self.hi


@dataclass
class RhoEstimate:
    rho_hat: float
    loglik_at_max: float
    grid_start: float
    converged: bool
    at_boundary: bool
    se: float | None = None
    information: float | None = None
    ci_wald: Interval | None = None
    ci_lrt: Interval | None = None
    alpha: float | None = None
    warnings: list[str] = field(default_factory=list)


def profile_likelihood(studies: Sequence[StudySummary]) -> IntegratedLikelihood:
    """``ℓ(ρ)`` with the means and SDs at their closed-form estimates."""
    mu_x, mu_y = mle_mu(studies)
    sigma_x, sigma_y = mle_sigma(studies, mu_x, mu_y)
    return IntegratedLikelihood(studies, mu_x, mu_y, sigma_x, sigma_y)


def _as_loglik(source) -> LogLik:
    if callable(source):
        return source
    return profile_likelihood(source)


def _grid_values(loglik: LogLik, grid: np.ndarray) -> np.ndarray:
    if isinstance(loglik, IntegratedLikelihood):
        return np.asarray(loglik(grid), dtype=float)
    return np.array([loglik(float(r)) for r in grid], dtype=float)


def estimate_rho(source: Union[Sequence[StudySummary], LogLik]) -> RhoEstimate:
    """Point estimate of ``ρ`` (no standard error, no intervals)."""
    loglik = _as_loglik(source)
    values = _grid_values(loglik, INIT_GRID)
    finite = np.isfinite(values)
    if not finite.any():
        raise NumericalError("log-likelihood is not finite anywhere on the initial grid")
    best = int(np.argmax(np.where(finite, values, -np.inf)))
    lo = INIT_GRID[best - 1] if best > 0 else RHO_LOWER
    hi = INIT_GRID[best + 1] if best < INIT_GRID.size - 1 else RHO_UPPER

    def objective(r):
        v = loglik(r)
        return -v if math.isfinite(v) else math.inf

    res = optimize.minimize_scalar(
        objective, bounds=(lo, hi), method="bounded", options={"xatol": RHO_XTOL, "maxiter": 500}
    )
    rho_hat, loglik_max = float(res.x), float(-res.fun)
    if not loglik_max >= values[best]:
        rho_hat, loglik_max = float(INIT_GRID[best]), float(values[best])
    at_boundary = rho_hat <= RHO_LOWER + 10 * BOUNDARY_EPS or rho_hat >= RHO_UPPER - 10 * BOUNDARY_EPS
    return RhoEstimate(
        rho_hat=rho_hat,
        loglik_at_max=loglik_max,
        grid_start=float(INIT_GRID[best]),
        converged=bool(res.success),
        at_boundary=at_boundary,
    )


def _second_difference(loglik: LogLik, x: float, h: float) -> float:
    return (loglik(x + h) - 2.0 * loglik(x) + loglik(x - h)) / (h * h)


def observed_information(source, rho_hat: float) -> float:
    """``-ℓ''(ρ̂)`` from central second differences.

    The step is ``h = max(1e-4, 1e-4 (1 - ρ̂²))``, shrunk if ``ρ̂ ± h`` would
    leave the domain.  The estimate is repeated with ``h/2`` and the two
    must agree within 5%.

    Raises NumericalError for non-positive or unstable curvature.
    """
    loglik = _as_loglik(source)
    if not RHO_LOWER < rho_hat < RHO_UPPER:
        raise DomainError(f"rho_hat must be interior, got {rho_hat!r}")
    h = max(1e-4, 1e-4 * (1.0 - rho_hat * rho_hat))
    room = min(rho_hat - RHO_LOWER, RHO_UPPER - rho_hat)
    h = min(h, 0.5 * room)
    if h <= 0:
        raise NumericalError("no room for a finite-difference step", rho_hat=rho_hat)
    info = -_second_difference(loglik, rho_hat, h)
    info_half = -_second_difference(loglik, rho_hat, 0.5 * h)
    if not (math.isfinite(info) and info > 0 and info_half > 0):
        raise NumericalError(
            "observed information is not positive", information=info, step=h, rho_hat=rho_hat
        )
    if abs(info - info_half) > 0.05 * info_half:
        raise NumericalError(
            "finite-difference curvature is unstable",
            information=info,
            information_half_step=info_half,
            step=h,
        )
    return info


def wald_ci(rho_hat: float, se: float, alpha: float = 0.05) -> Interval:
    """Normal-approximation interval ``ρ̂ ∓ z se``, clamped to ``[-1, 1]``."""
    if not se >= 0:
        raise DomainError(f"se must be non-negative, got {se!r}")
    z = normal_quantile(1.0 - alpha / 2.0)
    lo, hi = rho_hat - z * se, rho_hat + z * se
    return Interval(max(lo, -1.0), min(hi, 1.0), lo < -1.0, hi > 1.0)


def lrt_ci(source, rho_hat: float, loglik_at_max: float, alpha: float = 0.05) -> Interval:
    """Likelihood-ratio interval ``{ρ : -2[ℓ(ρ) - ℓ(ρ̂)] ≤ χ²₁(α)}``.

    Each bound is a root of the statistic minus the critical value, found by
    bracketing between ``ρ̂`` and the domain edge.  If the statistic stays
    below the critical value up to the edge, the edge is returned and the
    side is marked truncated.
    """
    loglik = _as_loglik(source)
    crit = chi2_quantile_df1(alpha)

    def excess(r):
        v = loglik(r)
        stat = -2.0 * (v - loglik_at_max) if math.isfinite(v) else math.inf
        return min(stat, 1e300) - crit

    if excess(rho_hat) > 0:
        raise NumericalError(
            "likelihood-ratio statistic exceeds the critical value at the estimate",
            rho_hat=rho_hat,
            loglik_at_max=loglik_at_max,
        )

    def bound(edge):
        if excess(edge) <= 0:
            return edge, True
        a, b = sorted((edge, rho_hat))
        try:
            return optimize.brentq(excess, a, b, xtol=ROOT_XTOL), False
        except (ValueError, RuntimeError) as exc:
            raise NumericalError(
                "could not bracket the likelihood-ratio bound", edge=edge, rho_hat=rho_hat
            ) from exc

    lo, lo_trunc = bound(RHO_LOWER)
    hi, hi_trunc = bound(RHO_UPPER)
    return Interval(float(lo), float(hi), lo_trunc, hi_trunc)


def estimate_full(
    studies: Sequence[StudySummary], alpha: float = 0.05
) -> tuple[PooledParams, RhoEstimate]:
    """All five parameter estimates plus standard error and both intervals."""
    studies = list(studies)
    if not studies:
        raise DomainError("at least one study is required")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    loglik = profile_likelihood(studies)
    est = estimate_rho(loglik)
    est.alpha = alpha
    params = PooledParams(*loglik.params_without_rho, est.rho_hat)

    if len(studies) < 2:
        est.warnings.append("single study: no between-study information; SE and intervals omitted")
        return params, est

    if est.at_boundary:
        est.warnings.append("estimate at the boundary; Wald interval omitted")
    else:
        try:
            est.information = observed_information(loglik, est.rho_hat)
        except NumericalError as exc:
            est.warnings.append(f"standard error unavailable: {exc}")
        else:
            est.se = 1.0 / math.sqrt(est.information)
            est.ci_wald = wald_ci(est.rho_hat, est.se, alpha)
    est.ci_lrt = lrt_ci(loglik, est.rho_hat, est.loglik_at_max, alpha)
    return params, est
