import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from summarycorr.errors import DomainError, NumericalError
from summarycorr.estimator import (
    BOUNDARY_EPS,
    Interval,
    estimate_full,
    estimate_rho,
    lrt_ci,
    observed_information,
    profile_likelihood,
    wald_ci,
)
from summarycorr.model import PooledParams, StudySummary, mle_mu, mle_sigma
from summarycorr.simulation import generate_studies, replicate_rng
from summarycorr.special import chi2_quantile_df1, normal_quantile

CRIT = chi2_quantile_df1(0.05)


def seeded(k=50, rho=0.5, seed=7, idx=0, n_min=100, n_max=200):
    return generate_studies(k, n_min, n_max, PooledParams(0, 0, 1, 1, rho), replicate_rng(seed, idx))


def quadratic(center, curvature, offset=0.0):
    return lambda r: offset - 0.5 * curvature * (r - center) ** 2


# --- point estimate -----------------------------------------------------


def test_estimate_rho_on_quadratic_seam():
    est = estimate_rho(quadratic(0.3217, 400.0))
    assert est.rho_hat == pytest.approx(0.3217, abs=1e-7)
    assert est.converged and not est.at_boundary


def test_estimate_rho_boundary_flag():
    est = estimate_rho(lambda r: 10 * r)
    assert est.at_boundary
    assert est.rho_hat > 1 - 20 * BOUNDARY_EPS


def test_estimate_rho_all_nonfinite_raises():
    with pytest.raises(NumericalError):
        estimate_rho(lambda r: math.nan)


@pytest.mark.parametrize("idx", range(5))
def test_argmax_beats_audit_grid(idx):
    studies = seeded(k=20, rho=0.5, idx=idx)
    lik = profile_likelihood(studies)
    est = estimate_rho(lik)
    audit = np.arange(-0.999, 0.9995, 1e-3)
    assert est.loglik_at_max >= np.max(lik(audit)) - 1e-6


def test_small_instance_matches_fine_grid():
    studies = seeded(k=3, rho=0.6, seed=21)
    lik = profile_likelihood(studies)
    est = estimate_rho(lik)
    grid = np.arange(-0.99999, 0.99999, 1e-5)
    best = grid[np.argmax(lik(grid))]
    assert est.rho_hat == pytest.approx(best, abs=1e-4)


def test_identical_studies_give_even_profile_with_edge_maximum():
    # no mean or variance mismatch between x and y, so nothing penalises |ρ| → 1
    s = StudySummary(50, 0.0, 0.0, 1.0, 1.0)
    lik = profile_likelihood([s, s])
    grid = np.linspace(-0.9, 0.9, 19)
    np.testing.assert_allclose(lik(grid), lik(-grid), rtol=1e-13)
    assert lik(0.9) > lik(0.5) > lik(0.0)
    assert estimate_rho([s, s]).at_boundary


def test_symmetric_profile_gives_zero():
    # x-means spread symmetrically, y-means equal: no cross term, even profile
    studies = [StudySummary(50, 0.2, 0.0, 1.0, 1.0), StudySummary(50, -0.2, 0.0, 1.0, 1.0)]
    lik = profile_likelihood(studies)
    grid = np.linspace(-0.95, 0.95, 39)
    np.testing.assert_allclose(lik(grid), lik(-grid), rtol=1e-13)
    assert abs(estimate_rho(lik).rho_hat) < 1e-4


def test_reflection_equivariance():
    studies = seeded(k=30, rho=0.6, seed=4)
    flipped = [StudySummary(s.n, s.mean_x, -s.mean_y, s.var_x, s.var_y) for s in studies]
    _, a = estimate_full(studies)
    _, b = estimate_full(flipped)
    assert b.rho_hat == pytest.approx(-a.rho_hat, abs=1e-6)
    assert b.ci_wald.width == pytest.approx(a.ci_wald.width, abs=1e-6)
    assert b.ci_lrt.width == pytest.approx(a.ci_lrt.width, abs=1e-6)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), rho=st.floats(-0.9, 0.9), k=st.integers(2, 15))
def test_estimate_is_grid_optimal_property(seed, rho, k):
    studies = seeded(k=k, rho=rho, seed=seed, n_min=10, n_max=60)
    lik = profile_likelihood(studies)
    est = estimate_rho(lik)
    assert -1 < est.rho_hat < 1
    assert est.loglik_at_max >= np.max(lik(np.linspace(-0.99, 0.99, 199))) - 1e-6


# --- information and Wald interval --------------------------------------


def test_information_exact_for_quadratic():
    assert observed_information(quadratic(0.2, 321.0), 0.2) == pytest.approx(321.0, rel=1e-6)
    assert observed_information(quadratic(0.9999, 5e4), 0.9999) == pytest.approx(5e4, rel=1e-6)


def test_information_rejects_nonpositive_curvature():
    with pytest.raises(NumericalError):
        observed_information(lambda r: r * r, 0.0)
    with pytest.raises(DomainError):
        observed_information(quadratic(0.0, 1.0), 1.0)


def test_information_symmetric_under_reflection():
    s1 = StudySummary(50, 0.1, 0.2, 1.0, 1.1)
    s2 = StudySummary(70, -0.1, -0.15, 0.9, 1.0)
    flip = lambda s: StudySummary(s.n, s.mean_x, -s.mean_y, s.var_x, s.var_y)  # noqa: E731
    a = estimate_rho([s1, s2])
    b = estimate_rho([flip(s1), flip(s2)])
    ia = observed_information([s1, s2], a.rho_hat)
    ib = observed_information([flip(s1), flip(s2)], b.rho_hat)
    assert ib == pytest.approx(ia, rel=1e-5)


def test_wald_examples():
    z = normal_quantile(0.975)
    ci = wald_ci(0.5, 0.1)
    assert (ci.lo, ci.hi) == pytest.approx((0.5 - 0.1 * z, 0.5 + 0.1 * z), abs=1e-15)
    assert (round(ci.lo, 3), round(ci.hi, 3)) == (0.304, 0.696)
    clamped = wald_ci(0.99, 0.1)
    assert clamped.hi == 1.0 and clamped.hi_truncated and not clamped.lo_truncated
    assert wald_ci(0.5, 0.1, 0.32).width < ci.width


@settings(max_examples=100, deadline=None)
@given(rho=st.floats(-0.5, 0.5), se=st.floats(1e-4, 0.2), alpha=st.floats(0.01, 0.5))
def test_wald_width_exact_property(rho, se, alpha):
    ci = wald_ci(rho, se, alpha)
    assert ci.width == pytest.approx(2 * normal_quantile(1 - alpha / 2) * se, rel=1e-12)


# --- LRT interval -----------------------------------------------------


def test_lrt_on_quadratic_is_exact():
    curv = 900.0
    ci = lrt_ci(quadratic(0.4, curv), 0.4, 0.0)
    half = math.sqrt(CRIT / curv)
    assert (ci.lo, ci.hi) == pytest.approx((0.4 - half, 0.4 + half), abs=1e-9)


def test_lrt_invariant_to_constant_offset():
    studies = seeded(k=20, rho=0.3)
    lik = profile_likelihood(studies)
    est = estimate_rho(lik)
    a = lrt_ci(lik, est.rho_hat, est.loglik_at_max)
    b = lrt_ci(lambda r: lik(r) + 1234.5, est.rho_hat, est.loglik_at_max + 1234.5)
    assert (b.lo, b.hi) == pytest.approx((a.lo, a.hi), abs=1e-8)


def test_lrt_statistic_at_bounds():
    studies = seeded(k=50, rho=0.5)
    lik = profile_likelihood(studies)
    est = estimate_rho(lik)
    ci = lrt_ci(lik, est.rho_hat, est.loglik_at_max)
    for r in ci:
        assert -2 * (lik(r) - est.loglik_at_max) == pytest.approx(CRIT, abs=1e-4)
    assert -2 * (lik(est.rho_hat) - est.loglik_at_max) == pytest.approx(0.0, abs=1e-9)
    assert ci.lo < est.rho_hat < ci.hi


def test_lrt_truncated_at_edge():
    ci = lrt_ci(quadratic(0.0, 1.0), 0.0, 0.0)
    assert ci.lo_truncated and ci.hi_truncated
    assert ci.width == pytest.approx(2 - 2 * BOUNDARY_EPS)


def test_lrt_rejects_bad_maximum():
    with pytest.raises(NumericalError):
        lrt_ci(quadratic(0.0, 100.0), 0.5, 0.0)


def test_interval_helpers():
    ci = Interval(-0.2, 0.4)
    assert ci.width == pytest.approx(0.6)
    assert ci.contains(0.0) and not ci.contains(0.5)
    assert tuple(ci) == (-0.2, 0.4)


# --- composition ------------------------------------------------------


def test_estimate_full_matches_components():
    studies = seeded(k=40, rho=0.9)
    params, est = estimate_full(studies)
    mu = mle_mu(studies)
    sig = mle_sigma(studies, *mu)
    assert (params.mu_x, params.mu_y) == mu
    assert (params.sigma_x, params.sigma_y) == sig
    lone = estimate_rho(studies)
    assert est.rho_hat == lone.rho_hat
    info = observed_information(studies, est.rho_hat)
    assert est.information == info
    assert est.se == 1 / math.sqrt(info)
    assert est.ci_wald == wald_ci(est.rho_hat, est.se)
    assert est.ci_lrt == lrt_ci(studies, est.rho_hat, est.loglik_at_max)
    assert params.rho == est.rho_hat
    assert est.warnings == []


def test_single_study_warns_and_omits_intervals():
    params, est = estimate_full([StudySummary(100, 0.1, 0.2, 1.0, 1.0)])
    assert est.warnings and "single study" in est.warnings[0]
    assert est.se is None and est.ci_wald is None and est.ci_lrt is None
    assert params.mu_x == 0.1


def test_weak_signal_gives_wider_intervals():
    _, weak = estimate_full(seeded(k=10, rho=0.1, seed=3))
    _, strong = estimate_full(seeded(k=50, rho=0.9, seed=3))
    assert weak.ci_lrt.width > strong.ci_lrt.width
    assert weak.ci_wald.width > strong.ci_wald.width


def test_estimate_full_validates():
    with pytest.raises(DomainError):
        estimate_full([])
    with pytest.raises(DomainError):
        estimate_full([StudySummary(10, 0, 0, 1, 1)] * 2, alpha=1.5)
