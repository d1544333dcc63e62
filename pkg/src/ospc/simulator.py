"""Finite-K slot simulation of the opportunistic superposition coding policy.

Two engines share one random stream:

* :func:`run` processes slots in vectorised chunks and is what experiments use;
* :func:`run_reference` steps slot by slot through :mod:`ospc.scheduler` and
  keeps an explicit FIFO of arrivals.  It is slow and exists to check ``run``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .channel import ExpUnitMean, FadingLaw, PathLossLaw
from .scheduler import ClassThresholds, SlotChannel, UserState, schedule_slot


# --------------------------------------------------------------------------
# arrivals
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    def sample(self, rng, size):
        return np.ones(size)


@dataclass(frozen=True)
class BernoulliScaled:
    p: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError("p must lie in (0, 1]")

    def sample(self, rng, size):
        return (rng.random(size) < self.p) / self.p


@dataclass(frozen=True)
class UniformDiscrete:
    """Integer uniform on ``{lo, ..., hi}``, divided by its mean."""

    lo: int = 0
    hi: int = 2

    def __post_init__(self):
        if not 0 <= self.lo <= self.hi or self.hi == 0:
            raise ValueError("need 0 <= lo <= hi and hi > 0")

    def sample(self, rng, size):
        return rng.integers(self.lo, self.hi + 1, size) / (0.5 * (self.lo + self.hi))


ArrivalLaw = Constant | BernoulliScaled | UniformDiscrete


# --------------------------------------------------------------------------
# config / results
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SimConfig:
    n_users: int = 50
    spectral_efficiency: float = 1.0  # nats per channel use, whole system
    pathloss: PathLossLaw = PathLossLaw()
    fading: FadingLaw = ExpUnitMean(10)
    thresholds: ClassThresholds = ClassThresholds.single(0.0)
    arrival: ArrivalLaw = Constant()
    horizon: int = 10_000
    n0: float = 1.0
    seed: int = 0
    warmup: Optional[int] = None  # None: ceil(10 / min gamma)
    record_series: bool = False
    chunk_slots: Optional[int] = None  # slots per vectorised block; changes the random stream

    def __post_init__(self):
        if self.n_users < 1 or self.horizon < 1:
            raise ValueError("need at least one user and one slot")
        if not self.spectral_efficiency > 0:
            raise ValueError("spectral efficiency must be positive")
        if not self.n0 > 0:
            raise ValueError("n0 must be positive")

    @property
    def bands(self) -> int:
        return self.fading.bands

    def warmup_slots(self) -> int:
        if self.warmup is not None:
            return int(self.warmup)
        g = self.thresholds.gammas(self.fading)
        g = g[g > 0]
        if g.size == 0:
            return 0
        return min(int(math.ceil(10.0 / g.min())), self.horizon - 1)


@dataclass
class Metrics:
    """Per-user (arrays of length K) and system-level outcomes of one run.

    ``mean_delay`` weights every slot's arrival by its rate mass.
    ``mean_busy_period`` follows the queue-non-empty definition; ``mean_cycle``
    is the spacing between consecutive services (the two coincide when every
    slot brings a positive arrival).
    """

    mean_delay: np.ndarray
    mean_delay_unweighted: np.ndarray
    mean_busy_period: np.ndarray
    max_busy_period: np.ndarray
    mean_cycle: np.ndarray
    selection_freq: np.ndarray
    mean_demand_at_service: np.ndarray
    energy_efficiency: float
    class_id: np.ndarray
    pathloss: np.ndarray
    total_arrival: np.ndarray
    total_served: np.ndarray
    final_queue: np.ndarray
    horizon: int
    warmup: int
    energy_series: Optional[np.ndarray] = None
    raw_energy: float = 0.0

    def class_mean_delay(self, cls: int) -> float:
        m = self.class_id == cls
        return float(np.nanmean(self.mean_delay[m]))


# --------------------------------------------------------------------------
# random stream shared by both engines
# --------------------------------------------------------------------------


def _chunk_slots(cfg: SimConfig) -> int:
    if cfg.chunk_slots:
        return int(cfg.chunk_slots)
    return max(1, (1 << 21) // (cfg.n_users * cfg.bands))


def _draw_setup(cfg: SimConfig):
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    s = cfg.pathloss.sample(rng, cfg.n_users)
    cls = cfg.thresholds.assign_classes(cfg.n_users)
    return rng, s, cls


def _chunks(cfg: SimConfig, rng):
    """Yield ``(t0, arrivals, fading)`` with arrival mass in nats and fading ``(n, K, M)``."""
    per_user = cfg.spectral_efficiency / cfg.n_users
    step = _chunk_slots(cfg)
    t0 = 0
    while t0 < cfg.horizon:
        n = min(step, cfg.horizon - t0)
        arr = per_user * cfg.arrival.sample(rng, (n, cfg.n_users))
        fad = cfg.fading.sample(rng, (n, cfg.n_users, cfg.bands))
        yield t0, arr, fad
        t0 += n


# --------------------------------------------------------------------------
# vectorised engine
# --------------------------------------------------------------------------


def band_energy(gains, rates, band, n_bands: int, n0: float = 1.0) -> np.ndarray:
    """Total slot energy for many slots at once.

    Each row is one slot; users on the same band form an ascending-gain
    superposition chain, bands are independent.  Unselected users must carry
    zero rate (their band and gain are then irrelevant).
    """
    order = np.lexsort((gains, band), axis=-1)
    g = np.take_along_axis(gains, order, 1)
    r = np.take_along_axis(rates, order, 1)
    b = np.take_along_axis(band, order, 1)
    before = np.cumsum(r, axis=1) - r
    band_tot = np.zeros((r.shape[0], n_bands))
    for m in range(n_bands):
        band_tot[:, m] = np.sum(np.where(b == m, r, 0.0), axis=1)
    band_before = np.cumsum(band_tot, axis=1) - band_tot
    before = np.maximum(before - np.take_along_axis(band_before, b, 1), 0.0)
    return np.sum(n0 / g * np.exp(before) * np.expm1(r), axis=1)


def _base(x, prev):
    """Value of ``x`` at row ``prev`` (per column), zero where ``prev == -1``."""
    got = np.take_along_axis(x, np.maximum(prev, 0), 0)
    return np.where(prev >= 0, got, 0.0)


def run(cfg: SimConfig) -> Metrics:
    """Simulate ``cfg.horizon`` slots and return per-user and system metrics."""
    rng, s, cls = _draw_setup(cfg)
    k, m = cfg.n_users, cfg.bands
    kappa_user = np.asarray(cfg.thresholds.kappas, dtype=float)[cls]
    warm = cfg.warmup_slots()
    big = np.iinfo(np.int64).max // 4

    # pending (unserved) arrival state, carried across chunks
    q = np.zeros(k)  # mass
    qw = np.zeros(k)  # sum mass * arrival slot
    qn = np.zeros(k, dtype=np.int64)  # number of positive arrivals
    qnt = np.zeros(k, dtype=np.int64)  # sum of their arrival slots
    busy_start = np.full(k, -1, dtype=np.int64)
    last_srv = np.zeros(k, dtype=np.int64)

    acc = {name: np.zeros(k) for name in ("dmass", "mass", "dcount", "count", "nsrv", "cycle", "busy", "nbusy", "nsel")}
    busy_max = np.zeros(k)
    tot_arr = np.zeros(k)
    tot_srv = np.zeros(k)
    energy_sum = 0.0
    series = [] if cfg.record_series else None

    for t0, arr, fad in _chunks(cfg, rng):
        n = arr.shape[0]
        t = np.arange(t0 + 1, t0 + n + 1, dtype=np.int64)[:, None]  # 1-based slot index
        best = fad.max(axis=2)
        sel = best > kappa_user
        pos = arr > 0

        cum_a = q + np.cumsum(arr, axis=0)
        cum_w = qw + np.cumsum(arr * t, axis=0)
        cum_n = qn + np.cumsum(pos, axis=0)
        cum_nt = qnt + np.cumsum(pos * t, axis=0)

        rows = np.arange(n)[:, None]
        last_incl = np.maximum.accumulate(np.where(sel, rows, -1), axis=0)
        prev = np.vstack([np.full((1, k), -1), last_incl[:-1]])

        served = np.where(sel, cum_a - _base(cum_a, prev), 0.0)
        dmass = np.where(sel, served * (t + 1) - (cum_w - _base(cum_w, prev)), 0.0)
        cnt = np.where(sel, cum_n - _base(cum_n, prev).astype(np.int64), 0)
        dcnt = np.where(sel, cnt * (t + 1) - (cum_nt - _base(cum_nt, prev).astype(np.int64)), 0)

        prev_t = np.where(prev >= 0, t0 + 1 + prev, last_srv)
        cycle = np.where(sel, t - prev_t, 0)

        # first positive arrival at or after each row (big if none)
        nxt = np.minimum.accumulate(np.where(pos, rows, big)[::-1], axis=0)[::-1]
        nxt = np.vstack([nxt, np.full((1, k), big)])
        start_row = np.take_along_axis(nxt, prev + 1, 0)
        start = np.where(start_row < big, t0 + 1 + start_row, big)
        carried = (prev < 0) & (qn > 0)
        start = np.where(carried, busy_start, start)
        busy = np.where(sel & (cnt > 0), t - start + 1, 0)

        meas = (t > warm) & sel
        acc["dmass"] += np.sum(np.where(meas, dmass, 0.0), axis=0)
        acc["mass"] += np.sum(np.where(meas, served, 0.0), axis=0)
        acc["dcount"] += np.sum(np.where(meas, dcnt, 0), axis=0)
        acc["count"] += np.sum(np.where(meas, cnt, 0), axis=0)
        acc["nsrv"] += np.sum(meas, axis=0)
        acc["cycle"] += np.sum(np.where(meas, cycle, 0), axis=0)
        mb = meas & (cnt > 0)
        acc["busy"] += np.sum(np.where(mb, busy, 0), axis=0)
        acc["nbusy"] += np.sum(mb, axis=0)
        acc["nsel"] += np.sum(sel & (t > warm), axis=0)
        busy_max = np.maximum(busy_max, np.max(np.where(sel & (cnt > 0), busy, 0), axis=0))
        tot_arr += arr.sum(axis=0)
        tot_srv += served.sum(axis=0)

        band = np.argmax(fad, axis=2)
        gains = s[None, :] * np.take_along_axis(fad, band[:, :, None], 2)[:, :, 0]
        e_slot = band_energy(gains, served, band, m, cfg.n0)
        energy_sum += float(np.sum(e_slot[(t[:, 0] > warm)]))
        if series is not None:
            series.append(e_slot / (cfg.n0 * cfg.spectral_efficiency))

        # carry pending state to the next chunk
        last = last_incl[-1]
        had = last >= 0
        lastc = last[None, :]
        q = np.where(had, cum_a[-1] - _base(cum_a, lastc)[0], cum_a[-1])
        qw = np.where(had, cum_w[-1] - _base(cum_w, lastc)[0], cum_w[-1])
        qn_new = np.where(had, cum_n[-1] - _base(cum_n, lastc)[0].astype(np.int64), cum_n[-1])
        qnt = np.where(had, cum_nt[-1] - _base(cum_nt, lastc)[0].astype(np.int64), cum_nt[-1])
        row_after = np.take_along_axis(nxt, (last + 1)[None, :], 0)[0]
        new_start = np.where(row_after < big, t0 + 1 + row_after, -1)
        busy_start = np.where(~had & (qn > 0), busy_start, new_start)
        busy_start = np.where(qn_new > 0, busy_start, -1)
        qn = qn_new
        last_srv = np.where(had, t0 + 1 + last, last_srv)

    # a busy period still open at the horizon counts towards the longest one
    ongoing = np.where(qn > 0, cfg.horizon - busy_start + 1, 0)
    busy_max = np.maximum(busy_max, ongoing)

    measured = max(cfg.horizon - warm, 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        metrics = Metrics(
            mean_delay=acc["dmass"] / acc["mass"],
            mean_delay_unweighted=acc["dcount"] / acc["count"],
            mean_busy_period=acc["busy"] / acc["nbusy"],
            max_busy_period=busy_max,
            mean_cycle=acc["cycle"] / acc["nsrv"],
            selection_freq=acc["nsel"] / measured,
            mean_demand_at_service=acc["mass"] / acc["nsrv"] / (cfg.spectral_efficiency / k),
            energy_efficiency=energy_sum / measured / (cfg.n0 * cfg.spectral_efficiency),
            class_id=cls,
            pathloss=s,
            total_arrival=tot_arr,
            total_served=tot_srv,
            final_queue=q,
            horizon=cfg.horizon,
            warmup=warm,
            energy_series=np.concatenate(series) if series is not None else None,
            raw_energy=energy_sum,
        )
    return metrics


# --------------------------------------------------------------------------
# slot-by-slot reference engine
# --------------------------------------------------------------------------


def run_reference(cfg: SimConfig) -> Metrics:
    """Same model as :func:`run`, one slot at a time with an explicit arrival log."""
    rng, s, cls = _draw_setup(cfg)
    k = cfg.n_users
    warm = cfg.warmup_slots()
    users = UserState(pathloss=s, class_id=cls)
    pending = [[] for _ in range(k)]  # (slot, mass)
    last_srv = np.zeros(k, dtype=int)
    busy_from = [None] * k
    sums = {name: np.zeros(k) for name in ("dmass", "mass", "dcount", "count", "nsrv", "cycle", "busy", "nbusy", "nsel")}
    busy_max = np.zeros(k)
    tot_arr, tot_srv = np.zeros(k), np.zeros(k)
    energy_sum = 0.0
    series = []

    for t0, arr, fad in _chunks(cfg, rng):
        for j in range(arr.shape[0]):
            t = t0 + j + 1
            for i in range(k):
                if arr[j, i] > 0:
                    if busy_from[i] is None:
                        busy_from[i] = t
                    pending[i].append((t, arr[j, i]))
            users.queue = users.queue + arr[j]
            tot_arr += arr[j]
            dec = schedule_slot(SlotChannel(fad[j], t), cfg.thresholds, users, cfg.n0)
            e = float(dec.energy.sum())
            series.append(e / (cfg.n0 * cfg.spectral_efficiency))
            if t > warm:
                energy_sum += e
            for i in np.flatnonzero(dec.selected):
                tot_srv[i] += dec.rate[i]
                blen = t - busy_from[i] + 1 if busy_from[i] is not None else 0
                if blen:
                    busy_max[i] = max(busy_max[i], blen)
                if t > warm:
                    sums["nsrv"][i] += 1
                    sums["cycle"][i] += t - last_srv[i]
                    for tau, mass in pending[i]:
                        sums["dmass"][i] += mass * (t - tau + 1)
                        sums["mass"][i] += mass
                        sums["dcount"][i] += t - tau + 1
                        sums["count"][i] += 1
                    if blen:
                        sums["busy"][i] += blen
                        sums["nbusy"][i] += 1
                pending[i].clear()
                busy_from[i] = None
                last_srv[i] = t
            if t > warm:
                sums["nsel"] += dec.selected

    for i in range(k):
        if busy_from[i] is not None:
            busy_max[i] = max(busy_max[i], cfg.horizon - busy_from[i] + 1)
    measured = max(cfg.horizon - warm, 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return Metrics(
            mean_delay=sums["dmass"] / sums["mass"],
            mean_delay_unweighted=sums["dcount"] / sums["count"],
            mean_busy_period=sums["busy"] / sums["nbusy"],
            max_busy_period=busy_max,
            mean_cycle=sums["cycle"] / sums["nsrv"],
            selection_freq=sums["nsel"] / measured,
            mean_demand_at_service=sums["mass"] / sums["nsrv"] / (cfg.spectral_efficiency / k),
            energy_efficiency=energy_sum / measured / (cfg.n0 * cfg.spectral_efficiency),
            class_id=cls,
            pathloss=s,
            total_arrival=tot_arr,
            total_served=tot_srv,
            final_queue=users.queue.copy(),
            horizon=cfg.horizon,
            warmup=warm,
            energy_series=np.array(series) if cfg.record_series else None,
            raw_energy=energy_sum,
        )


# --------------------------------------------------------------------------
# ensembles and stability
# --------------------------------------------------------------------------


def derive_seed(base_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([int(base_seed), int(index)]).generate_state(1, np.uint64)[0])


@dataclass
class EnsembleSummary:
    energies: np.ndarray
    seeds: list = field(default_factory=list)

    @property
    def min(self) -> float:
        return float(self.energies.min())

    @property
    def max(self) -> float:
        return float(self.energies.max())

    @property
    def mean(self) -> float:
        return float(self.energies.mean())

    @property
    def spread(self) -> float:
        return self.max - self.min


def run_ensemble(cfg: SimConfig, n_systems: int, base_seed: int = 0, n_jobs: int = 1) -> EnsembleSummary:
    """Independent systems, each with its own path-loss draw, seeded from ``base_seed``."""
    if n_systems < 1:
        raise ValueError("need at least one system")
    seeds = [derive_seed(base_seed, j) for j in range(n_systems)]
    cfgs = [replace(cfg, seed=sd, record_series=False) for sd in seeds]
    if n_jobs == 1:
        values = [run(c).energy_efficiency for c in cfgs]
    else:
        from joblib import Parallel, delayed

        values = Parallel(n_jobs=n_jobs)(delayed(_energy_only)(c) for c in cfgs)
    return EnsembleSummary(energies=np.array(values), seeds=seeds)


def _energy_only(cfg: SimConfig) -> float:
    return run(cfg).energy_efficiency


@dataclass
class StabilityVerdict:
    mean_busy_period: np.ndarray
    max_busy_period: np.ndarray
    unstable: np.ndarray

    @property
    def all_stable(self) -> bool:
        return not bool(np.any(self.unstable))


def stability_report(metrics: Metrics, max_fraction: float = 0.5) -> StabilityVerdict:
    """Flag users whose longest busy period covers more than ``max_fraction`` of the run."""
    unstable = metrics.max_busy_period > max_fraction * metrics.horizon
    return StabilityVerdict(metrics.mean_busy_period, metrics.max_busy_period, unstable)
