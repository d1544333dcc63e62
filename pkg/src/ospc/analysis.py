"""Mean-field (K -> infinity) delay and energy of the threshold policy, and the PFS baseline.

Energies are ``(Eb/N0)_sys`` in linear units per nat unless stated otherwise.
With ``M`` bands each band carries ``Gamma / M`` of the load, so the exponent
uses ``c = Gamma / M`` everywhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from .channel import (
    ConditionalChannelLaw,
    ExpUnitMean,
    FadingLaw,
    PathLossLaw,
    gamma_of,
    kappa_for_delay,
)

LN2 = math.log(2.0)


class UnboundedSupportError(ValueError):
    pass


def to_db(x):
    return 10.0 * np.log10(x)


@dataclass(frozen=True)
class AnalysisConfig:
    spectral_efficiency: float = 1.0  # nats per channel use
    pathloss: PathLossLaw = PathLossLaw()
    fading: FadingLaw = ExpUnitMean(10)
    kappa: float = 0.0
    rate_unit: str = "nats"

    def __post_init__(self):
        if not self.spectral_efficiency > 0:
            raise ValueError("spectral efficiency must be positive")
        if self.rate_unit not in ("nats", "bits"):
            raise ValueError("rate_unit is 'nats' or 'bits'")

    @property
    def bands(self) -> int:
        return self.fading.bands

    @property
    def channel(self) -> ConditionalChannelLaw:
        return ConditionalChannelLaw(self.pathloss, self.fading, self.kappa)

    @property
    def load_per_band(self) -> float:
        return self.spectral_efficiency / self.bands

    def with_kappa(self, kappa: float) -> "AnalysisConfig":
        return AnalysisConfig(self.spectral_efficiency, self.pathloss, self.fading, float(kappa), self.rate_unit)


@dataclass(frozen=True)
class EnergyResult:
    value: float
    method: str = "quadrature"
    estimated_error: float = 0.0

    @property
    def value_db(self) -> float:
        return float(to_db(self.value))

    def in_unit(self, unit: str) -> float:
        """Energy per nat (as computed) or per bit."""
        return self.value * LN2 if unit == "bits" else self.value


def delay_of_kappa(channel: ConditionalChannelLaw) -> float:
    return 1.0 / channel.gamma


def energy_efficiency(config: AnalysisConfig, epsabs: float = 1e-8) -> EnergyResult:
    """Mean-field system energy of the threshold policy.

    Integrates ``exp(c u) / Q(u)`` over ``u`` in ``[0, 1]``, ``Q`` being the
    quantile of the conditional channel, which equals the expectation of
    ``exp(c F(d)) / d`` over selected users.
    """
    law = config.channel
    c = config.load_per_band
    q = law.quantile
    if energy_diverges(config):
        return EnergyResult(math.inf, "quadrature", 0.0)

    def integrand(u):
        if u >= 1.0:
            return 0.0
        x = q(u)
        return math.exp(c * u) / x if x > 0 else math.inf

    # the quantile climbs steeply right after u = 0 and has a kink where the
    # nearest users reach the threshold; integrate piecewise around both
    edges = [0.0, 1e-12, 1e-9, 1e-6, 1e-3, 1.0]
    if law.support_min > 0:
        kink = float(law.cdf(law.support_min / config.pathloss.delta**2))
        if 1e-3 < kink < 1.0:
            edges.insert(-1, kink)
    val, err = 0.0, 0.0
    for a, b in zip(edges, edges[1:]):
        v, e = integrate.quad(integrand, a, b, epsabs=max(epsabs * (b - a), 1e-14), epsrel=1e-10, limit=400)
        val += v
        err += e
    if not math.isfinite(val):
        raise ArithmeticError("energy integral diverged")
    return EnergyResult(val, "quadrature", err)


def energy_diverges(config: AnalysisConfig) -> bool:
    """``E[1/f]`` is infinite for a single band whose fading density is positive at 0."""
    f = config.fading
    return config.kappa <= 0.0 and f.infimum == 0.0 and f.bands == 1


def energy_efficiency_by_parts(config: AnalysisConfig, epsabs: float = 1e-10) -> EnergyResult:
    """Same quantity via integration by parts in channel-gain space.

    ``int (1/x) exp(c F) dF = int H(F(x)) / x**2 dx`` with
    ``H(u) = (exp(c u) - 1) / c``; no quantile or density is needed.
    """
    law = config.channel
    c = config.load_per_band
    lo = law.support_min

    def cdf(x):
        # the radius-quadrature CDF has no cancellation near x = 0
        return law._cdf_numeric_scalar(x, 1e-15)

    def h(u):
        return math.expm1(c * u) / c

    def integrand(y):
        x = math.exp(y)
        return h(cdf(x)) / x

    y_lo = math.log(lo) if lo > 0 else math.log(1e-6)
    # F reaches 1 well before this for every law used here
    y_hi = math.log(1e9)
    pts = [math.log(lo / config.pathloss.delta**2)] if lo > 0 else None
    val, err = integrate.quad(integrand, y_lo, y_hi, points=pts, epsabs=epsabs, epsrel=1e-11, limit=400)
    # tail beyond y_hi, where F == 1
    val += h(1.0) / 1e9
    return EnergyResult(val, "by-parts", err)


def energy_efficiency_mc(config: AnalysisConfig, n: int = 10**6, seed: int = 0) -> EnergyResult:
    """Monte Carlo estimate: sample selected-user channels, average ``exp(c F(d)) / d``."""
    law = config.channel
    rng = np.random.default_rng(seed)
    d = law.sample(rng, n)
    if law.has_closed_form:
        f = law.cdf(d)
    else:
        # quadrature per sample is too slow; interpolate a dense table in log x
        grid = np.geomspace(d.min(), d.max(), 4000)
        f = np.interp(np.log(d), np.log(grid), law.cdf(grid))
    y = np.exp(config.load_per_band * f) / d
    return EnergyResult(float(y.mean()), "monte-carlo", float(y.std(ddof=1) / math.sqrt(n)))


def energy_upper_bound(config: AnalysisConfig):
    """``(bound1, bound2)``: worst case where every selected fading equals the threshold."""
    if config.kappa <= 0:
        raise ValueError("the bound needs kappa > 0")
    c = config.load_per_band
    pl = config.pathloss
    b1 = pl.expect(lambda s: math.exp(c * float(pl.cdf(s))) / s) / config.kappa
    b2 = math.exp(c) * pl.mean_inverse() / config.kappa
    return b1, b2


def _supremum(fading: FadingLaw, B: Optional[float]) -> float:
    if B is None:
        B = fading.supremum
    if not math.isfinite(B):
        raise UnboundedSupportError("fading law has no finite supremum")
    return float(B)


def energy_lower_bound(config: AnalysisConfig, B: Optional[float] = None) -> EnergyResult:
    """Energy of any policy when every user could always use fading ``B``."""
    B = _supremum(config.fading, B)
    c = config.load_per_band
    pl = config.pathloss
    val = pl.expect(lambda s: math.exp(c * float(pl.cdf(s))) / s) / B
    return EnergyResult(val, "quadrature")


def single_user_limit(config: AnalysisConfig, B: Optional[float] = None) -> float:
    """Energy when exactly one user, at fading ``B``, is served each slot."""
    B = _supremum(config.fading, B)
    c = config.load_per_band
    return math.expm1(c) / (c * B) * config.pathloss.mean_inverse()


def expected_inverse_gain(config: AnalysisConfig) -> float:
    """``E[1/d]`` for selected users: the small-load limit of the energy."""
    law = config.channel
    val, _ = integrate.quad(lambda u: 1.0 / law.quantile(u) if u < 1 else 0.0, 0.0, 1.0, epsabs=1e-10, limit=400)
    return val


def system_energy_classes(config: AnalysisConfig, kappas: Sequence[float], fractions: Sequence[float]) -> float:
    """Class-weighted mean-field energy for per-class thresholds."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    return float(sum(a * energy_efficiency(config.with_kappa(k)).value for k, a in zip(kappas, fractions)))


# --------------------------------------------------------------------------
# delay-energy table
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TradeoffRow:
    delay: float
    kappa: float
    gamma: float
    energy: float

    @property
    def energy_db(self) -> float:
        return float(to_db(self.energy))


def tradeoff_table(delays: Sequence[float], config: AnalysisConfig) -> list[TradeoffRow]:
    rows = []
    for d in sorted(float(x) for x in delays):
        k = kappa_for_delay(config.fading, d)
        cfg = config.with_kappa(k)
        rows.append(TradeoffRow(d, k, gamma_of(config.fading, k), energy_efficiency(cfg).value))
    return rows


# --------------------------------------------------------------------------
# proportional fair baseline
# --------------------------------------------------------------------------


def pfs_channel_cdf(x, n_users: int, delta: float):
    """CDF of path loss times the best of ``n_users`` unit exponentials (``alpha = 2``)."""
    x = np.asarray(x, dtype=float)
    pos = np.maximum(x, np.finfo(float).tiny)
    d2 = delta * delta
    ex = -np.expm1(-pos)
    ed = -np.expm1(-pos * d2)
    acc = np.zeros_like(pos)
    pe, pd = np.ones_like(pos), np.ones_like(pos)
    for i in range(1, n_users + 1):
        pe = pe * ex
        pd = pd * ed
        acc += (pe - pd) / i
    out = np.clip(1.0 - acc / (pos * (1.0 - d2)), 0.0, 1.0)
    out = np.where(x <= 0.0, 0.0, out)
    return out if out.ndim else float(out)


def pfs_capacity(snr: float, n_users: int, delta: float) -> float:
    """Mean spectral efficiency in bits of serving the best user at transmit SNR ``snr``."""
    # E[log2(1 + x snr)] = int (1 - F(x)) snr / ((1 + x snr) ln 2) dx, on a log grid
    d2 = delta * delta

    def sf(x):
        ex, ed = -math.expm1(-x), -math.expm1(-x * d2)
        acc, pe, pd = 0.0, 1.0, 1.0
        for i in range(1, n_users + 1):
            pe *= ex
            pd *= ed
            acc += (pe - pd) / i
        return min(1.0, acc / (x * (1.0 - d2)))

    def integrand(y):
        x = math.exp(y)
        return sf(x) * snr * x / ((1.0 + x * snr) * LN2)

    upper = math.log(800.0 / delta**2)
    val, _ = integrate.quad(integrand, math.log(1e-14), upper, points=[0.0, math.log(1 / delta**2)], epsabs=1e-12, epsrel=1e-10, limit=400)
    return val


def default_snr_grid() -> np.ndarray:
    return 10.0 ** (np.linspace(-10.0, 30.0, 60) / 10.0)


@dataclass(frozen=True)
class PfsPoint:
    snr: float
    capacity_bits: float
    energy_per_bit: float

    def spectral_efficiency(self, unit: str = "bits") -> float:
        return self.capacity_bits * LN2 if unit == "nats" else self.capacity_bits

    def energy(self, unit: str = "bits") -> float:
        return self.energy_per_bit / LN2 if unit == "nats" else self.energy_per_bit


def pfs_curve(snr_grid: Optional[Sequence[float]] = None, n_users: int = 50, pathloss: PathLossLaw = PathLossLaw()) -> list[PfsPoint]:
    if n_users < 1:
        raise ValueError("need at least one user")
    if pathloss.alpha != 2.0:
        raise ValueError("the closed-form best-user channel needs alpha = 2")
    grid = default_snr_grid() if snr_grid is None else np.asarray(snr_grid, dtype=float)
    out = []
    for snr in grid:
        if snr <= 0:
            raise ValueError("SNR must be positive")
        cap = pfs_capacity(float(snr), n_users, pathloss.delta)
        out.append(PfsPoint(float(snr), cap, float(snr) / cap))
    return out
