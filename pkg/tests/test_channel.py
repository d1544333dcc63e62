import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from ospc.channel import (
    BoundedUniform,
    ConditionalChannelLaw,
    DegeneratePolicyError,
    ExpUnitMean,
    ParetoTail,
    PathLossLaw,
    UnattainableDelayError,
    conditional_fading_cdf,
    gamma_of,
    kappa_for_delay,
    pathloss_cdf,
    sample_conditional_fading,
    sample_pathloss,
)

PL = PathLossLaw(2.0, 0.01)


def test_pathloss_cdf_endpoints():
    assert pathloss_cdf(PL, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert pathloss_cdf(PL, PL.s_max) == pytest.approx(1.0)
    assert pathloss_cdf(PL, 0.5) == 0.0
    assert pathloss_cdf(PL, 1e5) == 1.0
    assert pathloss_cdf(PL, 2.0) == pytest.approx(0.5 / (1 - 1e-4), rel=1e-12)


def test_pathloss_samples_match_cdf(rng):
    s = sample_pathloss(PL, rng, 10**6)
    assert s.min() >= 1.0 and s.max() <= PL.s_max
    assert stats.kstest(s, lambda x: pathloss_cdf(PL, x)).statistic < 0.005


@pytest.mark.parametrize("alpha,delta", [(2.0, 0.01), (3.0, 0.1), (4.0, 0.5)])
def test_mean_inverse_closed_form(alpha, delta):
    law = PathLossLaw(alpha, delta)
    # E[r^alpha] with r uniform in area over the annulus
    ref, _ = integrate.quad(lambda r: r**alpha * 2 * r / (1 - delta**2), delta, 1.0)
    assert law.mean_inverse() == pytest.approx(ref, rel=1e-12)
    assert law.expect(lambda s: 1.0 / s) == pytest.approx(ref, rel=1e-8)


def test_pathloss_rejects_bad_parameters():
    with pytest.raises(ValueError):
        PathLossLaw(2.0, 1.0)
    with pytest.raises(ValueError):
        PathLossLaw(0.0, 0.1)


@given(st.integers(1, 20), st.floats(0.0, 30.0))
def test_best_cdf_and_sf_sum_to_one(m, x):
    law = ExpUnitMean(m)
    assert law.best_cdf(x) + law.best_sf(x) == pytest.approx(1.0, abs=1e-12)
    assert law.best_cdf(x) == pytest.approx((1 - math.exp(-x)) ** m, abs=1e-14)


def test_best_cdf_even_band_count_is_positive():
    assert ExpUnitMean(10).best_cdf(1.0) == pytest.approx((1 - math.exp(-1)) ** 10)


@given(st.integers(1, 20), st.floats(1.0, 200.0))
def test_kappa_for_delay_inverts_gamma(m, d):
    law = ExpUnitMean(m)
    k = kappa_for_delay(law, d)
    assert 1.0 / gamma_of(law, k) == pytest.approx(d, rel=1e-10)


@pytest.mark.parametrize("law", [ExpUnitMean(10), ParetoTail(2.0), BoundedUniform(1.0, 3)])
def test_delay_one_gives_infimum(law):
    assert kappa_for_delay(law, 1.0) == law.infimum
    assert gamma_of(law, kappa_for_delay(law, 1.0)) == 1.0


def test_delay_below_one_is_unattainable():
    with pytest.raises(UnattainableDelayError):
        kappa_for_delay(ExpUnitMean(10), 0.5)


def test_threshold_above_bounded_support_is_degenerate():
    with pytest.raises(DegeneratePolicyError):
        gamma_of(BoundedUniform(1.0), 1.0)
    with pytest.raises(DegeneratePolicyError):
        ConditionalChannelLaw(PL, BoundedUniform(1.0), 2.0)


@pytest.mark.parametrize("kappa", [2.0, 5.0, 10.0])
def test_pareto_delay_equals_threshold(kappa):
    assert 1.0 / gamma_of(ParetoTail(2.0), kappa) == pytest.approx(kappa, rel=1e-14)


@pytest.mark.parametrize("law,kappa", [(ExpUnitMean(10), 1.5), (ExpUnitMean(1), 2.0), (BoundedUniform(2.0, 2), 0.7), (ParetoTail(3.0), 2.0)])
def test_conditional_fading_samples(law, kappa, rng):
    x = sample_conditional_fading(law, kappa, rng, 100_000)
    assert x.min() > kappa
    assert stats.kstest(x, lambda v: conditional_fading_cdf(law, kappa, v)).statistic < 0.01


@pytest.mark.parametrize("kappa,m", [(0.0, 10), (0.5, 10), (1.0, 1), (3.0, 4)])
def test_closed_form_matches_radius_quadrature(kappa, m):
    law = ConditionalChannelLaw(PL, ExpUnitMean(m), kappa)
    x = np.geomspace(max(kappa, 1e-3), 1e6, 60)
    assert np.max(np.abs(law.cdf_closed_form(x) - law.cdf_numeric(x))) < 1e-7


def test_closed_form_needs_exponential_and_square_law():
    with pytest.raises(ValueError):
        ConditionalChannelLaw(PathLossLaw(3.0, 0.01), ExpUnitMean(1)).cdf_closed_form(1.0)


@pytest.mark.parametrize("law", [ConditionalChannelLaw(PL, ExpUnitMean(10), 1.0), ConditionalChannelLaw(PL, BoundedUniform(1.0, 2), 0.3)])
def test_conditional_cdf_is_a_cdf(law):
    x = np.geomspace(1e-3, 1e7, 80)
    f = law.cdf(x)
    assert np.all(np.diff(f) >= -1e-12)
    assert f[0] == pytest.approx(0.0, abs=1e-12) and f[-1] == pytest.approx(1.0, abs=1e-9)
    assert law.cdf(law.support_min) == pytest.approx(0.0, abs=1e-12)


@given(st.floats(0.001, 0.999))
def test_quantile_inverts_cdf(u):
    law = ConditionalChannelLaw(PL, ExpUnitMean(10), 1.0)
    assert law.cdf(law.quantile(u)) == pytest.approx(u, abs=1e-10)


def test_bounded_uniform_channel_support():
    law = ConditionalChannelLaw(PL, BoundedUniform(1.0), 0.5)
    rng = np.random.default_rng(3)
    d = law.sample(rng, 10_000)
    assert d.min() > 0.5 and d.max() <= PL.s_max * 1.0
    assert law.cdf(PL.s_max * 1.0) == pytest.approx(1.0, abs=1e-9)
