import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from ospc.analysis import (
    LN2,
    AnalysisConfig,
    EnergyResult,
    UnboundedSupportError,
    energy_diverges,
    energy_efficiency,
    energy_efficiency_by_parts,
    energy_efficiency_mc,
    energy_lower_bound,
    energy_upper_bound,
    expected_inverse_gain,
    pfs_capacity,
    pfs_channel_cdf,
    pfs_curve,
    single_user_limit,
    system_energy_classes,
    to_db,
    tradeoff_table,
)
from ospc.channel import BoundedUniform, ExpUnitMean, ParetoTail, PathLossLaw, kappa_for_delay

PL = PathLossLaw(2.0, 0.01)
FAD = ExpUnitMean(10)


def _inv_best_fading(m, kappa):
    """E[1/f* | f* > kappa] for the max of m unit exponentials, by direct quadrature."""
    dens = lambda x: m * (-math.expm1(-x)) ** (m - 1) * math.exp(-x)
    num, _ = integrate.quad(lambda x: dens(x) / x, kappa, math.inf, epsabs=1e-13, limit=200)
    den, _ = integrate.quad(dens, kappa, math.inf, epsabs=1e-14, limit=200)
    return num / den


@pytest.mark.parametrize("kappa", [0.0, 1.0, 3.0])
@pytest.mark.parametrize("load", [0.5, 4.0])
def test_three_routes_agree(kappa, load):
    cfg = AnalysisConfig(load, PL, FAD, kappa)
    q = energy_efficiency(cfg).value
    assert energy_efficiency_by_parts(cfg).value == pytest.approx(q, rel=1e-7)
    mc = energy_efficiency_mc(cfg, n=400_000, seed=1)
    assert abs(mc.value - q) < 5 * mc.estimated_error


def test_routes_agree_for_bounded_fading():
    cfg = AnalysisConfig(1.0, PL, BoundedUniform(1.0, 2), 0.4)
    q = energy_efficiency(cfg).value
    assert energy_efficiency_by_parts(cfg).value == pytest.approx(q, rel=1e-6)
    mc = energy_efficiency_mc(cfg, n=200_000, seed=2)
    assert abs(mc.value - q) < 5 * mc.estimated_error


@pytest.mark.parametrize("kappa", [0.0, 2.0])
def test_small_load_limit_is_mean_inverse_gain(kappa):
    cfg = AnalysisConfig(1e-7, PL, FAD, kappa)
    ref = PL.mean_inverse() * _inv_best_fading(10, kappa)
    assert energy_efficiency(cfg).value == pytest.approx(ref, rel=1e-6)
    assert expected_inverse_gain(cfg) == pytest.approx(ref, rel=1e-7)


def test_delay_three_saving_is_about_two_and_a_quarter_db():
    # the ratio of conditional inverse fading means fixes the small-load gap
    k3 = kappa_for_delay(FAD, 3.0)
    oracle = 10 * math.log10(_inv_best_fading(10, 0.0) / _inv_best_fading(10, k3))
    assert oracle == pytest.approx(2.2346, abs=5e-4)
    cfg = AnalysisConfig(1e-6, PL, FAD)
    gap = to_db(energy_efficiency(cfg).value) - to_db(energy_efficiency(cfg.with_kappa(k3)).value)
    assert gap == pytest.approx(oracle, abs=1e-6)


def test_delay_gap_similar_across_loads():
    k3 = kappa_for_delay(FAD, 3.0)
    gaps = []
    for g in (0.5, 8.0):
        cfg = AnalysisConfig(g, PL, FAD)
        gaps.append(to_db(energy_efficiency(cfg).value) - to_db(energy_efficiency(cfg.with_kappa(k3)).value))
    assert abs(gaps[0] - gaps[1]) < 1.0


@pytest.mark.parametrize("m", [1, 10])
def test_energy_non_increasing_in_threshold(m):
    law = ExpUnitMean(m)
    ks = np.linspace(0.1, kappa_for_delay(law, 15.0), 12)
    e = [energy_efficiency(AnalysisConfig(1.0, PL, law, k)).value for k in ks]
    assert np.all(np.diff(e) <= 1e-6 * np.array(e[:-1]))


@given(st.floats(0.05, 6.0), st.floats(0.1, 8.0))
def test_upper_bounds_hold(kappa, load):
    cfg = AnalysisConfig(load, PL, FAD, kappa)
    b1, b2 = energy_upper_bound(cfg)
    assert energy_efficiency(cfg).value <= b1 * (1 + 1e-9)
    assert b1 <= b2 * (1 + 1e-12)


def test_upper_bound_needs_positive_threshold():
    with pytest.raises(ValueError):
        energy_upper_bound(AnalysisConfig(1.0, PL, FAD, 0.0))


def test_lower_bound_and_limit():
    cfg = AnalysisConfig(1.0, PL, BoundedUniform(1.0))
    lb = energy_lower_bound(cfg).value
    c = 1.0
    assert single_user_limit(cfg) == pytest.approx(math.expm1(c) / c * PL.mean_inverse())
    assert single_user_limit(cfg) >= lb
    for k in (0.2, 0.6, 0.99):
        assert energy_efficiency(cfg.with_kappa(k)).value >= lb
    assert energy_efficiency(cfg.with_kappa(0.99)).value / lb < 1.05
    with pytest.raises(UnboundedSupportError):
        energy_lower_bound(AnalysisConfig(1.0, PL, FAD))


def test_single_band_zero_threshold_diverges():
    cfg = AnalysisConfig(1.0, PL, ExpUnitMean(1))
    assert energy_diverges(cfg)
    assert energy_efficiency(cfg).value == math.inf
    assert not energy_diverges(cfg.with_kappa(0.1))
    assert not energy_diverges(AnalysisConfig(1.0, PL, ParetoTail(2.0)))


def test_tradeoff_table_rows():
    rows = tradeoff_table([3, 1, 2], AnalysisConfig(1.0, PL, FAD))
    assert [r.delay for r in rows] == [1.0, 2.0, 3.0]
    assert rows[0].kappa == 0.0 and rows[0].gamma == 1.0
    assert all(a.energy >= b.energy for a, b in zip(rows, rows[1:]))
    assert rows[1].gamma == pytest.approx(0.5)


def test_class_weighted_energy():
    cfg = AnalysisConfig(1.0, PL, FAD)
    k = kappa_for_delay(FAD, 4.0)
    e = system_energy_classes(cfg, [0.0, k], [0.25, 0.75])
    assert e == pytest.approx(0.25 * energy_efficiency(cfg).value + 0.75 * energy_efficiency(cfg.with_kappa(k)).value)
    with pytest.raises(ValueError):
        system_energy_classes(cfg, [0.0], [0.5])


def test_units():
    r = EnergyResult(2.0)
    assert r.in_unit("bits") == pytest.approx(2.0 * LN2)
    assert r.value_db == pytest.approx(10 * math.log10(2.0))


def test_pfs_cdf_matches_sampling(rng):
    n, k = 400_000, 8
    s = PL.sample(rng, n)
    d = s * rng.exponential(size=(n, k)).max(axis=1)
    x = np.geomspace(1.0, 1e4, 25)
    emp = (d[:, None] <= x).mean(axis=0)
    assert np.max(np.abs(emp - pfs_channel_cdf(x, k, PL.delta))) < 0.004


def test_pfs_capacity_matches_direct_expectation(rng):
    n, k, snr = 400_000, 10, 3.0
    d = PL.sample(rng, n) * rng.exponential(size=(n, k)).max(axis=1)
    mc = np.log2(1 + d * snr)
    assert pfs_capacity(snr, k, PL.delta) == pytest.approx(mc.mean(), abs=4 * mc.std() / math.sqrt(n))


def test_pfs_curve_monotone():
    pts = pfs_curve(n_users=20)
    cap = [p.capacity_bits for p in pts]
    assert np.all(np.diff(cap) > 0)
    assert pts[0].energy("nats") == pytest.approx(pts[0].energy_per_bit / LN2)
    with pytest.raises(ValueError):
        pfs_curve(n_users=0)
    with pytest.raises(ValueError):
        pfs_curve(pathloss=PathLossLaw(3.0, 0.01))


def test_ospc_beats_pfs_only_at_high_spectral_efficiency():
    grid = 10 ** (np.linspace(-30, 40, 50) / 10)
    pts = pfs_curve(grid, n_users=50)
    cap_bits = np.array([p.capacity_bits for p in pts])
    pfs_db = to_db(np.array([p.energy_per_bit for p in pts]))

    def ospc_db(bits):
        return to_db(energy_efficiency(AnalysisConfig(bits * LN2, PL, FAD)).value * LN2)

    assert ospc_db(0.5) > float(np.interp(0.5, cap_bits, pfs_db))
    assert ospc_db(8.0) < float(np.interp(8.0, cap_bits, pfs_db))


def test_higher_threshold_shifts_curve_down():
    k = kappa_for_delay(FAD, 3.0)
    for g in (0.5, 2.0, 8.0):
        cfg = AnalysisConfig(g, PL, FAD)
        assert energy_efficiency(cfg.with_kappa(k)).value < energy_efficiency(cfg).value


def test_config_validation():
    with pytest.raises(ValueError):
        AnalysisConfig(0.0)
    with pytest.raises(ValueError):
        AnalysisConfig(1.0, rate_unit="bytes")
