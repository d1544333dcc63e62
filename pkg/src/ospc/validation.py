"""Acceptance checks, shared by ``ospc validate`` and the test suite.

Each check returns a :class:`CheckResult`; a failing check is a result, not an
exception.  Sizes and tolerances are fixed here so that every caller runs the
same experiment.
"""
from __future__ import annotations

import functools
import time
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy import stats

from . import power
from .analysis import (
    AnalysisConfig,
    energy_efficiency,
    energy_lower_bound,
    energy_upper_bound,
    pfs_channel_cdf,
    single_user_limit,
    to_db,
)
from .channel import (
    BoundedUniform,
    ConditionalChannelLaw,
    ExpUnitMean,
    ParetoTail,
    PathLossLaw,
    gamma_of,
    kappa_for_delay,
)
from .scheduler import ClassThresholds
from .simulator import BernoulliScaled, Constant, SimConfig, UniformDiscrete, run, run_ensemble

REFERENCE_PATHLOSS = PathLossLaw(2.0, 0.01)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail} ({self.seconds:.1f} s)"


def _timed(name: str, fn: Callable[[], tuple]) -> CheckResult:
    t0 = time.perf_counter()
    passed, detail = fn()
    return CheckResult(name, bool(passed), detail, time.perf_counter() - t0)


# --------------------------------------------------------------------------
# analysis
# --------------------------------------------------------------------------


def _delay3_saving():
    fading = ExpUnitMean(10)
    k3 = kappa_for_delay(fading, 3.0)
    gaps = []
    for g in (0.5, 1.0, 2.0, 4.0, 8.0):
        cfg = AnalysisConfig(g, REFERENCE_PATHLOSS, fading, 0.0)
        e0 = energy_efficiency(cfg).value
        e3 = energy_efficiency(cfg.with_kappa(k3)).value
        gaps.append(float(to_db(e0) - to_db(e3)))
    ok = all(x > 3.0 for x in gaps)
    return ok, "dB saving D=1 -> D=3 at Gamma 0.5..8: " + ", ".join(f"{x:.3f}" for x in gaps) + " (need > 3)"


def kappa_grid(fading, n: int = 50, lo_gamma: float = 0.05, start: float = 0.0) -> np.ndarray:
    return np.linspace(start, kappa_for_delay(fading, 1.0 / lo_gamma), n)


@functools.lru_cache(maxsize=None)
def _monotone_grid(bands: int):
    fading = ExpUnitMean(bands)
    # the single-band energy is infinite at kappa = 0, start just above it
    start = 0.0 if bands > 1 else 0.05
    ks = kappa_grid(fading, start=start)
    cfg = AnalysisConfig(1.0, REFERENCE_PATHLOSS, fading)
    return ks, np.array([energy_efficiency(cfg.with_kappa(k)).value for k in ks]), cfg


def _monotonicity():
    worst = []
    for m in (1, 10):
        _, e, _ = _monotone_grid(m)
        rel = np.max(np.diff(e) / e[:-1])
        worst.append(rel)
    ok = all(w <= 1e-6 for w in worst)
    return ok, "largest relative increase over 50 kappas, M=1: %.2e, M=10: %.2e" % tuple(worst)


def _upper_bounds():
    bad, n = 0, 0
    for m in (1, 10):
        ks, e, cfg = _monotone_grid(m)
        for k, v in zip(ks, e):
            if k <= 0:
                continue
            b1, b2 = energy_upper_bound(cfg.with_kappa(k))
            n += 1
            if not (v <= b1 * (1 + 1e-9) and b1 <= b2 * (1 + 1e-12)):
                bad += 1
    return bad == 0, f"{n - bad}/{n} grid points satisfy energy <= bound1 <= bound2"


def _pareto_delay():
    law = ParetoTail(2.0)
    errs = [abs(1.0 / gamma_of(law, k) - k) / k for k in (2.0, 5.0, 10.0)]
    return max(errs) <= 1e-12, "max relative error of delay vs kappa: %.1e" % max(errs)


def _sandwich():
    law = BoundedUniform(1.0, 1)
    cfg = AnalysisConfig(1.0, REFERENCE_PATHLOSS, law)
    lb = energy_lower_bound(cfg).value
    ks = np.linspace(0.1, 0.99, 8)
    es = np.array([energy_efficiency(cfg.with_kappa(k)).value for k in ks])
    above = bool(np.all(es >= lb * (1 - 1e-9)))
    ratio = es[-1] / lb
    limit = single_user_limit(cfg)
    ok = above and ratio <= 1.05
    return ok, f"energy >= lower bound on {ks.size} kappas: {above}; ratio at 0.99B {ratio:.4f}; single-user limit {limit:.4f} vs bound {lb:.4f}"


# --------------------------------------------------------------------------
# power allocation
# --------------------------------------------------------------------------


def _random_instance(rng, kmax):
    k = int(rng.integers(1, kmax + 1))
    gains = np.exp(rng.normal(0.0, 2.0, k))
    rates = rng.exponential(0.7, k)
    return gains, rates


def _optimality(n: int = 1000, seed: int = 11):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        d, r = _random_instance(rng, 6)
        mine = float(power.optimal_allocation(d, r).sum())
        _, best = power.decode_order_oracle(d, r)
        worst = max(worst, abs(mine - best) / best if best > 0 else abs(mine))
    return worst <= 1e-10, f"max relative gap to brute force over {n} instances: {worst:.2e}"


def _capacity(n: int = 1000, seed: int = 12):
    rng = np.random.default_rng(seed)
    inside, gap = True, 0.0
    for _ in range(n):
        d, r = _random_instance(rng, 12)
        e = power.optimal_allocation(d, r)
        inside &= power.capacity_region_check(d, e, r)
        gap = max(gap, abs(power.full_set_gap(d, e, r)))
    ident = 0.0
    for _ in range(n):
        a = rng.exponential(1.0, int(rng.integers(0, 12)))
        left, right = power.sum_rate_identity(a, float(rng.uniform(0.1, 5.0)))
        ident = max(ident, abs(left - right))
    ok = inside and gap <= 1e-9 and ident <= 1e-12
    return ok, f"all inside region: {inside}; max full-set gap {gap:.1e}; max log-identity error {ident:.1e}"


def dominating_pair(rng, k: int):
    """Random ``(rho, rho_prime)`` with ``rho``'s prefix sums above ``rho_prime``'s."""
    tgt = rng.exponential(0.7, k)
    prefix = np.maximum.accumulate(np.cumsum(tgt) + rng.exponential(0.5, k) * (rng.random(k) < 0.7))
    rho = np.diff(np.concatenate(([0.0], prefix)))
    return rho, tgt


def _transform(n: int = 1000, seed: int = 13):
    rng = np.random.default_rng(seed)
    rise, end = 0.0, 0.0
    for _ in range(n):
        k = int(rng.integers(1, 9))
        rho, tgt = dominating_pair(rng, k)
        d = np.sort(np.exp(rng.normal(0.0, 2.0, k)))
        tr = power.rate_transform_trace(rho, tgt, d)
        scale = tr[0]
        rise = max(rise, float(np.max(np.diff(tr), initial=0.0)) / scale)
        end = max(end, abs(tr[-1] - power.optimal_allocation(d, tgt).sum()) / max(tr[-1], 1e-300))
    ok = rise <= 1e-12 and end <= 1e-12
    return ok, f"max relative rise {rise:.1e}; max relative end mismatch {end:.1e}"


# --------------------------------------------------------------------------
# channel
# --------------------------------------------------------------------------


def _rejection_channel(law: ConditionalChannelLaw, n: int, rng) -> np.ndarray:
    """Draw ``s * max fading`` from scratch and keep draws above the threshold."""
    out, have = [], 0
    m = law.fading.bands
    while have < n:
        batch = max(1000, int(1.2 * (n - have) / law.gamma))
        f = rng.exponential(1.0, (batch, m)).max(axis=1)
        f = f[f > law.kappa]
        r = np.sqrt(rng.uniform(law.pathloss.delta**2, 1.0, f.size))
        out.append(r ** -law.pathloss.alpha * f)
        have += f.size
    return np.concatenate(out)[:n]


def _ks(n: int = 10**6, seed: int = 14):
    rng = np.random.default_rng(seed)
    ds = []
    for kappa, m in ((0.0, 10), (1.0, 10), (2.0, 1)):
        law = ConditionalChannelLaw(REFERENCE_PATHLOSS, ExpUnitMean(m), kappa)
        x = _rejection_channel(law, n, rng)
        ds.append(stats.kstest(x, law.cdf_closed_form).statistic)
    return max(ds) < 0.01, "KS statistics: " + ", ".join(f"{d:.2e}" for d in ds)


def _pfs_crosscheck(n_users: int = 50):
    law = ConditionalChannelLaw(REFERENCE_PATHLOSS, ExpUnitMean(n_users), 0.0)
    x = np.geomspace(1e-3, 1e5, 100)
    err = float(np.max(np.abs(pfs_channel_cdf(x, n_users, REFERENCE_PATHLOSS.delta) - law.cdf_closed_form(x))))
    return err <= 1e-12, f"max pointwise difference on 100 points: {err:.1e}"


# --------------------------------------------------------------------------
# simulation
# --------------------------------------------------------------------------

_ARRIVALS = {"constant": Constant(), "bernoulli": BernoulliScaled(0.5), "uniform": UniformDiscrete(0, 2)}
_sim_cache: dict = {}


def delay3_runs(horizon: int = 200_000):
    """The three K=50, M=10, gamma=1/3 runs (one per arrival law), cached."""
    if horizon not in _sim_cache:
        fading = ExpUnitMean(10)
        th = ClassThresholds.single(kappa_for_delay(fading, 3.0))
        base = SimConfig(n_users=50, fading=fading, thresholds=th, horizon=horizon, seed=2024)
        _sim_cache[horizon] = {k: run(replace(base, arrival=a)) for k, a in _ARRIVALS.items()}
    return _sim_cache[horizon]


def _delay_check():
    runs = delay3_runs()
    dev = {k: float(np.max(np.abs(m.mean_delay / 3.0 - 1.0))) for k, m in runs.items()}
    return max(dev.values()) <= 0.02, "max per-user |delay/3 - 1|: " + ", ".join(f"{k} {v:.4f}" for k, v in dev.items())


def _busy_check():
    runs = delay3_runs()
    dev = {k: float(np.max(np.abs(m.mean_busy_period / 3.0 - 1.0))) for k, m in runs.items()}
    return max(dev.values()) <= 0.02, "max per-user |busy/3 - 1|: " + ", ".join(f"{k} {v:.4f}" for k, v in dev.items())


def convergence_rows(users=(8, 32, 128), n_systems: int = 100, horizon: int = 2000, gamma_load: float = 1.0, base_seed: int = 0, n_jobs: int = 1):
    asym = energy_efficiency(AnalysisConfig(gamma_load, REFERENCE_PATHLOSS, ExpUnitMean(10), 0.0)).value
    rows = []
    for k in users:
        cfg = SimConfig(n_users=int(k), spectral_efficiency=gamma_load, fading=ExpUnitMean(10), horizon=horizon)
        s = run_ensemble(cfg, n_systems, base_seed=base_seed, n_jobs=n_jobs)
        rows.append((int(k), s.min, s.max, s.mean, asym))
    return rows


def _convergence():
    rows = convergence_rows()
    spreads = [r[2] - r[1] for r in rows]
    shrink = all(a > b for a, b in zip(spreads, spreads[1:]))
    k, lo, hi, _, asym = rows[-1]
    inside = lo <= asym <= hi
    return shrink and inside, "spreads " + ", ".join(f"K={r[0]}: {s:.4f}" for r, s in zip(rows, spreads)) + f"; K={k} interval [{lo:.4f}, {hi:.4f}] vs {asym:.4f}"


def _two_classes():
    fading = ExpUnitMean(10)
    th = ClassThresholds.from_delays(fading, (1.0, 4.0), (0.5, 0.5))
    m = run(SimConfig(n_users=50, fading=fading, thresholds=th, horizon=100_000, seed=7))
    dev = [abs(m.class_mean_delay(c) / d - 1.0) for c, d in enumerate((1.0, 4.0))]
    return max(dev) <= 0.03, "class delays %.4f (target 1), %.4f (target 4)" % (m.class_mean_delay(0), m.class_mean_delay(1))


CHECKS = [
    ("1 delay-3 saving over 3 dB", _delay3_saving),
    ("2 mean delay equals 1/gamma", _delay_check),
    ("3 mean busy period equals 1/gamma", _busy_check),
    ("4 energy non-increasing in kappa", _monotonicity),
    ("5 energy below the worst-case bounds", _upper_bounds),
    ("6 ascending-gain order is optimal", _optimality),
    ("7 capacity region tight", _capacity),
    ("8 rate transform never raises energy", _transform),
    ("9 conditional channel CDF vs samples", _ks),
    ("10 best-of-K CDF matches conditional CDF", _pfs_crosscheck),
    ("11 finite-K ensembles converge", _convergence),
    ("12 Pareto delay equals kappa", _pareto_delay),
    ("13 bounded fading sandwich", _sandwich),
    ("14 per-class delay targets", _two_classes),
]


def run_check(index: int) -> CheckResult:
    name, fn = CHECKS[index]
    return _timed(name, fn)


def run_all(progress: Callable[[CheckResult], None] | None = None) -> list[CheckResult]:
    out = []
    for i in range(len(CHECKS)):
        res = run_check(i)
        if progress is not None:
            progress(res)
        out.append(res)
    return out
