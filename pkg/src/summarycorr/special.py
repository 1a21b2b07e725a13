"""Scalar special functions used by the likelihood code.

Everything here works on the natural-log scale.  The modified Bessel
function of the first kind is evaluated directly (exponentially scaled
AMOS routine, with a log-domain power series where the scaled value
underflows) and falls back to the leading term of Olver's uniform
large-order expansion when the order is large or the direct value is not
representable.

Array variants (suffix ``_array``) exist for the hot likelihood path; the
scalar functions are thin wrappers that validate their arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import special as sc

from .errors import DegenerateInputError, DomainError

__all__ = [
    "OLVER_ORDER_THRESHOLD",
    "BesselMethod",
    "BesselEvalReport",
    "log_gamma",
    "log_multigamma2",
    "log_bessel_i_direct",
    "log_bessel_i_olver",
    "log_bessel_i",
    "log_bessel_i_array",
    "normal_quantile",
    "chi2_quantile_df1",
    "one_sided_t_test_mean_lt_zero",
]

#: Orders above this always use the Olver approximation.
OLVER_ORDER_THRESHOLD = 500.0

_HALF_LOG_PI = 0.5 * math.log(math.pi)
_LOG_2PI = math.log(2.0 * math.pi)
# below this the scaled Bessel value has lost (or is about to lose) precision
_IVE_TINY = 1e-290
_SERIES_MAX_TERMS = 20_000


class BesselMethod(str, Enum):
    DIRECT = "direct"
    OLVER = "olver"


@dataclass(frozen=True)
class BesselEvalReport:
    """Result of :func:`log_bessel_i`.

    ``log_value`` is ``ln I_order(argument)``; ``method_used`` records which
    evaluation path produced it.
    """

    log_value: float
    method_used: BesselMethod
    order: float
    argument: float


def log_gamma(a: float) -> float:
    """Natural log of the gamma function for ``a > 0``."""
    if not a > 0:
        raise DomainError(f"log_gamma requires a > 0, got {a!r}")
    return float(sc.gammaln(a))


def log_multigamma2(a: float) -> float:
    """Log of the bivariate gamma function ``Γ₂(a) = √π Γ(a) Γ(a - ½)``."""
    if not a > 0.5:
        raise DomainError(f"log_multigamma2 requires a > 1/2, got {a!r}")
    return _HALF_LOG_PI + float(sc.gammaln(a)) + float(sc.gammaln(a - 0.5))


def _log_bessel_series(nu: np.ndarray, x: np.ndarray) -> np.ndarray:
    # ln I_nu(x) = nu ln(x/2) - lnΓ(nu+1) + ln Σ_k t_k,
    # t_0 = 1, t_k = t_{k-1} (x/2)^2 / (k (k + nu))
    q = 0.25 * x * x
    total = np.ones_like(x)
    term = np.ones_like(x)
    active = np.ones(x.shape, dtype=bool)
    for k in range(1, _SERIES_MAX_TERMS):
        term = np.where(active, term * q / (k * (k + nu)), 0.0)
        total += term
        active &= term >= 1e-17 * total
        if not active.any():
            break
    with np.errstate(divide="ignore", invalid="ignore"):
        out = nu * np.log(0.5 * x) - sc.gammaln(nu + 1.0) + np.log(total)
    return np.where(active | ~np.isfinite(total), np.nan, out)


def _direct_array(nu: np.ndarray, x: np.ndarray) -> np.ndarray:
    scaled = sc.ive(nu, x)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(scaled) + x
    out = np.where(x == 0.0, np.where(nu == 0.0, 0.0, -np.inf), out)
    redo = (x > 0.0) & ~(np.isfinite(scaled) & (scaled > _IVE_TINY))
    if redo.any():
        out[redo] = _log_bessel_series(nu[redo], x[redo])
    return out


def _olver_array(nu: np.ndarray, x: np.ndarray) -> np.ndarray:
    kappa = np.hypot(x, nu)
    with np.errstate(divide="ignore"):
        return kappa + nu * np.log(x / (nu + kappa)) - 0.5 * np.log(2.0 * math.pi * kappa)


def _check_bessel_args(nu, x):
    if not (nu >= 0 and x >= 0):
        raise DomainError(f"Bessel I needs nu >= 0 and x >= 0, got nu={nu!r}, x={x!r}")


def log_bessel_i_direct(nu: float, x: float) -> float:
    """``ln I_nu(x)`` by direct (non-asymptotic) evaluation.

    Returns ``nan`` when the value cannot be represented, and ``-inf`` for
    ``x = 0`` with ``nu > 0``.
    """
    _check_bessel_args(nu, x)
    return float(_direct_array(np.array([nu], float), np.array([x], float))[0])


def log_bessel_i_olver(nu: float, x: float) -> float:
    """Leading-order Olver approximation of ``ln I_nu(x)``.

    With ``κ = √(x² + ν²)`` this is ``κ + ν ln(x / (ν + κ)) - ½ ln(2πκ)``.
    The neglected first correction is ``U₁(p)/ν`` with ``|U₁| ≤ 1/12``.
    """
    if not (nu > 0 and x > 0):
        raise DomainError(f"Olver approximation needs nu > 0 and x > 0, got nu={nu!r}, x={x!r}")
    kappa = math.hypot(x, nu)
    return kappa + nu * math.log(x / (nu + kappa)) - 0.5 * math.log(2.0 * math.pi * kappa)


def log_bessel_i_array(nu, x):
    """Vectorised ``ln I_nu(x)`` with automatic Olver fallback.

    Returns ``(values, used_olver)`` where ``used_olver`` is a boolean array
    of the broadcast shape.  Arguments are assumed valid (``nu, x >= 0``).
    """
    nu, x = np.broadcast_arrays(np.asarray(nu, float), np.asarray(x, float))
    values = np.empty(nu.shape)
    olver = (nu > OLVER_ORDER_THRESHOLD) & (x > 0.0)
    direct = ~olver
    if direct.any():
        values[direct] = _direct_array(nu[direct], x[direct])
        failed = direct & ~np.isfinite(values) & (x > 0.0) & (nu > 0.0)
        olver |= failed
    if olver.any():
        values[olver] = _olver_array(nu[olver], x[olver])
    return values, olver


def log_bessel_i(nu: float, x: float) -> BesselEvalReport:
    """``ln I_nu(x)`` with the method that produced it.

    The direct path is used unless ``nu`` exceeds
    :data:`OLVER_ORDER_THRESHOLD` or the direct value is not finite.
    """
    _check_bessel_args(nu, x)
    values, olver = log_bessel_i_array(nu, x)
    method = BesselMethod.OLVER if bool(olver) else BesselMethod.DIRECT
    return BesselEvalReport(float(values), method, float(nu), float(x))


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"normal_quantile requires 0 < p < 1, got {p!r}")
    return float(sc.ndtri(p))


def chi2_quantile_df1(alpha: float) -> float:
    """Upper ``alpha`` critical value of the chi-square distribution with 1 df."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"chi2_quantile_df1 requires 0 < alpha < 1, got {alpha!r}")
    z = normal_quantile(1.0 - alpha / 2.0)
    return z * z


def one_sided_t_test_mean_lt_zero(samples) -> tuple[float, float]:
    """One-sample t-test of ``H0: mean = 0`` against ``H1: mean < 0``.

    Returns ``(t_stat, p_value)`` with the lower-tail p-value.
    """
    values = np.asarray(samples, dtype=float)
    m = values.size
    if m < 2:
        raise DegenerateInputError("t-test needs at least two samples")
    sd = float(np.std(values, ddof=1))
    if not sd > 0.0:
        raise DegenerateInputError("t-test samples have zero variance")
    t_stat = float(np.mean(values)) / (sd / math.sqrt(m))
    return t_stat, float(sc.stdtr(m - 1, t_stat))
