"""Summary-level data model and the integrated likelihood in the correlation.

A study contributes ``(n, x̄, ȳ, s²_X, s²_Y)``.  The means follow a
bivariate normal with covariance ``Σ/n`` and the sample covariance matrix a
Wishart ``W₂(n-1, Σ/(n-1))``.  The unobserved sample correlation ``r`` is
integrated out of the joint density, which leaves

    ∫₋₁¹ (1 - r²)^a e^{b r} dr = √π (2/|b|)^{a+½} Γ(a+1) I_{a+½}(|b|)

with ``a = (n-4)/2`` and ``b = (n-1) ρ s_X s_Y / ((1-ρ²) σ_X σ_Y)``.

Every density here is on the log scale.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .errors import DomainError, NumericalError
from .special import OLVER_ORDER_THRESHOLD, _direct_array, log_bessel_i_array, log_multigamma2

__all__ = [
    "MIN_STUDY_SIZE",
    "StudySummary",
    "PooledParams",
    "TiltCoefficients",
    "StudyArrays",
    "IntegratedLikelihood",
    "mle_mu",
    "mle_sigma",
    "tilt_coefficients",
    "log_shape_integral",
    "log_shape_integral_array",
    "log_shape_integral_quadrature",
    "log_integrated_likelihood_study",
    "log_integrated_likelihood",
    "log_full_joint_pdf",
]

MIN_STUDY_SIZE = 3
# |b| below this uses the analytic b -> 0 limit of the shape integral
ZERO_TILT = 1e-12

_HALF_LOG_PI = 0.5 * math.log(math.pi)
_LOG_2 = math.log(2.0)
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class StudySummary:
    """Marginal summary of one study.

    ``var_x`` and ``var_y`` are unbiased (``n - 1`` denominator) sample
    variances.
    """

    n: int
    mean_x: float
    mean_y: float
    var_x: float
    var_y: float

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n:
            raise DomainError(f"n must be an integer, got {self.n!r}")
        if self.n < MIN_STUDY_SIZE:
            raise DomainError(f"n must be >= {MIN_STUDY_SIZE}, got {self.n}")
        for name in ("mean_x", "mean_y", "var_x", "var_y"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite, got {getattr(self, name)!r}")
        if not (self.var_x > 0 and self.var_y > 0):
            raise DomainError(
                f"variances must be positive, got var_x={self.var_x!r}, var_y={self.var_y!r}"
            )
        object.__setattr__(self, "n", int(self.n))


@dataclass(frozen=True)
class PooledParams:
    """Common population parameters ``(μ_X, μ_Y, σ_X, σ_Y, ρ)``."""

    mu_x: float
    mu_y: float
    sigma_x: float
    sigma_y: float
    rho: float

    def __post_init__(self):
        if not (math.isfinite(self.mu_x) and math.isfinite(self.mu_y)):
            raise DomainError("means must be finite")
        if not (self.sigma_x > 0 and self.sigma_y > 0):
            raise DomainError(
                f"standard deviations must be positive, got {self.sigma_x!r}, {self.sigma_y!r}"
            )
        if not -1.0 < self.rho < 1.0:
            raise DomainError(f"rho must lie in (-1, 1), got {self.rho!r}")

    def with_rho(self, rho: float) -> "PooledParams":
        return PooledParams(self.mu_x, self.mu_y, self.sigma_x, self.sigma_y, rho)


@dataclass(frozen=True)
class TiltCoefficients:
    """Shape exponent ``a`` and signed tilt ``b`` of the latent-correlation integral."""

    a: float
    b: float


@dataclass(frozen=True)
class StudyArrays:
    """Column view of a list of studies, used by the vectorised likelihood."""

    n: np.ndarray
    mean_x: np.ndarray
    mean_y: np.ndarray
    var_x: np.ndarray
    var_y: np.ndarray

    @classmethod
    def from_studies(cls, studies: Sequence[StudySummary]) -> "StudyArrays":
        studies = list(studies)
        if not studies:
            raise DomainError("at least one study is required")
        return cls(
            n=np.array([s.n for s in studies], dtype=float),
            mean_x=np.array([s.mean_x for s in studies], dtype=float),
            mean_y=np.array([s.mean_y for s in studies], dtype=float),
            var_x=np.array([s.var_x for s in studies], dtype=float),
            var_y=np.array([s.var_y for s in studies], dtype=float),
        )

    def __len__(self):
        return self.n.size


def _as_arrays(studies) -> StudyArrays:
    if isinstance(studies, StudyArrays):
        return studies
    return StudyArrays.from_studies(studies)


def mle_mu(studies: Sequence[StudySummary]) -> tuple[float, float]:
    """Sample-size weighted means ``Σ n_i x̄_i / Σ n_i`` (and likewise for y)."""
    arr = _as_arrays(studies)
    total = arr.n.sum()
    return float(arr.n @ arr.mean_x / total), float(arr.n @ arr.mean_y / total)


def mle_sigma(studies: Sequence[StudySummary], mu_x: float, mu_y: float) -> tuple[float, float]:
    """Closed-form standard deviations from between- and within-study spread."""
    arr = _as_arrays(studies)
    total = arr.n.sum()
    ssx = arr.n @ (arr.mean_x - mu_x) ** 2 + (arr.n - 1.0) @ arr.var_x
    ssy = arr.n @ (arr.mean_y - mu_y) ** 2 + (arr.n - 1.0) @ arr.var_y
    return math.sqrt(ssx / total), math.sqrt(ssy / total)


def tilt_coefficients(study: StudySummary, params: PooledParams) -> TiltCoefficients:
    a = (study.n - 4) / 2.0
    rho = params.rho
    b = (
        (study.n - 1)
        * rho
        * math.sqrt(study.var_x * study.var_y)
        / ((1.0 - rho * rho) * params.sigma_x * params.sigma_y)
    )
    return TiltCoefficients(a, b)


def log_shape_integral_array(a, b):
    """Vectorised ``ln ∫₋₁¹ (1-r²)^a e^{br} dr`` via the Bessel closed form."""
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    absb = np.abs(b)
    nu = a + 0.5
    zero = absb < ZERO_TILT
    safe_b = np.where(zero, 1.0, absb)
    log_bessel, _ = log_bessel_i_array(nu, safe_b)
    out = _HALF_LOG_PI + nu * np.log(2.0 / safe_b) + gammaln(a + 1.0) + log_bessel
    if zero.any():
        beta_limit = _HALF_LOG_PI + gammaln(a + 1.0) - gammaln(a + 1.5)
        out = np.where(zero, beta_limit, out)
    return out


def log_shape_integral(t: TiltCoefficients) -> float:
    """``ln ∫₋₁¹ (1-r²)^a e^{br} dr``.

    At ``b = 0`` this is ``ln B(½, a+1)``.
    """
    if not t.a >= -0.5:
        raise DomainError(f"shape exponent must be >= -1/2, got {t.a!r}")
    return float(log_shape_integral_array(t.a, t.b))


def log_shape_integral_quadrature(t: TiltCoefficients) -> float:
    """Adaptive-quadrature evaluation of the same integral, for testing.

    For ``a < 1`` the endpoint factor ``(1+r)^a (1-r)^a`` goes into
    QUADPACK's algebraic weight and ``e^{|b|}`` is factored out.  For larger
    ``a`` the integrand is a narrow bump, so its log is shifted by the value
    at the mode and the mode is passed as a breakpoint.
    """
    a, b = float(t.a), float(t.b)
    if not a >= -0.5:
        raise DomainError(f"shape exponent must be >= -1/2, got {a!r}")
    opts = dict(epsabs=0.0, epsrel=1e-12, limit=1000)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if a < 1.0:
            shift = abs(b)
            value, err = integrate.quad(
                lambda r: math.exp(b * r - shift), -1.0, 1.0, weight="alg", wvar=(a, a), **opts
            )
        else:
            mode = 0.0 if b == 0.0 else b / (a + math.hypot(a, b))
            shift = a * math.log1p(-mode * mode) + b * mode
            value, err = integrate.quad(
                lambda r: math.exp(a * math.log1p(-r * r) + b * r - shift),
                -1.0,
                1.0,
                points=[mode],
                **opts,
            )
    if not (value > 0 and math.isfinite(value)) or err > 1e-10 * value:
        raise NumericalError(
            "shape-integral quadrature did not converge", a=a, b=b, value=value, error=err
        )
    return math.log(value) + shift


class IntegratedLikelihood:
    """Total log-integrated likelihood as a function of ``ρ`` alone.

    The means and standard deviations are held fixed.  Calling the object
    with a scalar returns a float; with an array it returns an array of the
    same shape (one total per ``ρ`` value).
    """

    def __init__(self, studies, mu_x: float, mu_y: float, sigma_x: float, sigma_y: float):
        if not (sigma_x > 0 and sigma_y > 0):
            raise DomainError("standard deviations must be positive")
        arr = _as_arrays(studies)
        self.studies = arr
        self.mu_x, self.mu_y = float(mu_x), float(mu_y)
        self.sigma_x, self.sigma_y = float(sigma_x), float(sigma_y)

        n = arr.n
        dx = (arr.mean_x - mu_x) / sigma_x
        dy = (arr.mean_y - mu_y) / sigma_y
        ux = arr.var_x / sigma_x**2
        uy = arr.var_y / sigma_y**2
        log_sxsy = math.log(sigma_x * sigma_y)
        # pieces that do not depend on rho
        self._const = (
            np.log(n)
            - _LOG_2PI
            - log_sxsy
            + 0.5 * (n - 4.0) * np.log(arr.var_x * arr.var_y)
            - (n - 1.0) * (_LOG_2 + log_sxsy - np.log(n - 1.0))
            - np.array([log_multigamma2((m - 1.0) / 2.0) for m in n])
        )
        self._n = n
        self._quad_diag = n * (dx * dx + dy * dy) + (n - 1.0) * (ux + uy)
        self._quad_cross = n * dx * dy
        self._half_log_det_coeff = 0.5 * n  # (1-ρ²)^{-1/2} from the means, ^{-(n-1)/2} from the Wishart
        self._a = 0.5 * (n - 4.0)
        self._b_unit = (n - 1.0) * np.sqrt(ux * uy)
        # scalar fast path
        self._nu = self._a + 0.5
        self._shape_const = _HALF_LOG_PI + gammaln(self._a + 1.0)
        self._direct_only = bool(np.all(self._nu <= OLVER_ORDER_THRESHOLD))
        self._const_total = float(self._const.sum())
        self._half_n_total = float(0.5 * n.sum())
        self._quad_diag_total = float(self._quad_diag.sum())
        self._quad_cross_total = float(self._quad_cross.sum())

    @property
    def params_without_rho(self) -> tuple[float, float, float, float]:
        return self.mu_x, self.mu_y, self.sigma_x, self.sigma_y

    def per_study(self, rho):
        """Per-study log densities, shape ``(*rho.shape, k)``."""
        rho = np.asarray(rho, dtype=float)[..., None]
        one_m = 1.0 - rho * rho
        if np.any(~(one_m > 0)):
            raise DomainError("rho must lie in (-1, 1)")
        quad = (self._quad_diag - 2.0 * rho * self._quad_cross) / (2.0 * one_m)
        b = rho * self._b_unit / one_m
        return (
            self._const
            - self._half_log_det_coeff * np.log(one_m)
            - quad
            + log_shape_integral_array(self._a, b)
        )

    def olver_mask(self, rho: float) -> np.ndarray:
        """Which studies take the Olver path when evaluated at ``rho``."""
        b = rho * self._b_unit / (1.0 - rho * rho)
        absb = np.abs(b)
        _, olver = log_bessel_i_array(self._a + 0.5, np.where(absb < ZERO_TILT, 1.0, absb))
        return olver & (absb >= ZERO_TILT)

    def _log_shape(self, b: np.ndarray) -> np.ndarray:
        absb = np.abs(b)
        if self._direct_only and absb.min() >= ZERO_TILT:
            log_bessel = _direct_array(self._nu, absb)
            if np.isfinite(log_bessel).all():
                return self._shape_const + self._nu * np.log(2.0 / absb) + log_bessel
        return log_shape_integral_array(self._a, b)

    def __call__(self, rho):
        if np.ndim(rho) == 0:
            r = float(rho)
            one_m = 1.0 - r * r
            if not one_m > 0:
                raise DomainError("rho must lie in (-1, 1)")
            quad = (self._quad_diag_total - 2.0 * r * self._quad_cross_total) / (2.0 * one_m)
            shape = self._log_shape((r / one_m) * self._b_unit).sum()
            return float(self._const_total - self._half_n_total * math.log(one_m) - quad + shape)
        return self.per_study(rho).sum(axis=-1)


def _likelihood_for(studies, params: PooledParams) -> IntegratedLikelihood:
    return IntegratedLikelihood(studies, params.mu_x, params.mu_y, params.sigma_x, params.sigma_y)


def log_integrated_likelihood_study(study: StudySummary, params: PooledParams) -> float:
    """Log density of one study's summary with ``r`` integrated out."""
    return float(_likelihood_for([study], params).per_study(params.rho)[0])


def log_integrated_likelihood(studies: Sequence[StudySummary], params: PooledParams) -> float:
    """Sum of :func:`log_integrated_likelihood_study` over studies."""
    return float(_likelihood_for(studies, params).per_study(params.rho).sum())


def log_full_joint_pdf(study: StudySummary, r: float, params: PooledParams) -> float:
    """Log joint density of means, variances and sample correlation ``r``.

    The Wishart part is written in the ``(s²_X, s²_Y, r s_X s_Y)``
    coordinates, so integrating over ``r`` reproduces
    :func:`log_integrated_likelihood_study`.
    """
    if not -1.0 < r < 1.0:
        raise DomainError(f"r must lie in (-1, 1), got {r!r}")
    n = study.n
    mx, my, sx, sy, rho = (
        params.mu_x,
        params.mu_y,
        params.sigma_x,
        params.sigma_y,
        params.rho,
    )
    one_m = 1.0 - rho * rho
    dx = study.mean_x - mx
    dy = study.mean_y - my
    s_x = math.sqrt(study.var_x)
    s_y = math.sqrt(study.var_y)

    log_means = (
        math.log(n / (2.0 * math.pi * sx * sy * math.sqrt(one_m)))
        - n / (2.0 * one_m) * (dx * dx / sx**2 - 2.0 * rho * dx * dy / (sx * sy) + dy * dy / sy**2)
    )
    log_wishart = (
        0.5 * (n - 4) * math.log(study.var_x * study.var_y * (1.0 - r * r))
        - (n - 1) / (2.0 * one_m)
        * (study.var_x / sx**2 + study.var_y / sy**2 - 2.0 * rho * r * s_x * s_y / (sx * sy))
        - (n - 1) * math.log(2.0 * math.sqrt(sx * sx * sy * sy * one_m) / (n - 1))
        - log_multigamma2((n - 1) / 2.0)
    )
    return log_means + log_wishart
