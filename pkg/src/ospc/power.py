"""Minimum-energy superposition coding on a Gaussian multi-access channel.

Rates are in nats per channel use throughout.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


class TooLargeError(ValueError):
    pass


class DominanceViolation(ValueError):
    pass


def _check(gains, rates):
    d = np.asarray(gains, dtype=float)
    r = np.asarray(rates, dtype=float)
    if d.shape != r.shape or d.ndim != 1:
        raise ValueError(f"gains and rates must be 1-d with equal length, got {d.shape} and {r.shape}")
    if np.any(~np.isfinite(d)) or np.any(d <= 0.0):
        raise ValueError("gains must be strictly positive and finite")
    if np.any(r < 0.0):
        raise ValueError("rates must be non-negative")
    return d, r


def decode_chain(gains, rates, order, n0: float = 1.0) -> np.ndarray:
    """Per-user energy when users are peeled in ``order`` (first entry sees everyone else as noise last).

    ``order[0]`` is decoded last, i.e. it is interfered by nobody; user ``order[i]``
    pays ``exp(sum of rates before it)`` on top of its own ``exp(rate) - 1``.
    """
    d = np.asarray(gains, dtype=float)
    r = np.asarray(rates, dtype=float)
    order = np.asarray(order, dtype=int)
    rs = r[order]
    before = np.concatenate(([0.0], np.cumsum(rs)[:-1]))
    e = np.empty_like(d)
    e[order] = n0 / d[order] * np.exp(before) * np.expm1(rs)
    return e


def ascending_order(gains) -> np.ndarray:
    # stable sort: equal gains keep user-index order
    return np.argsort(np.asarray(gains, dtype=float), kind="stable")


def optimal_allocation(gains, rates, n0: float = 1.0) -> np.ndarray:
    """Transmit energies of the minimum-sum-energy allocation.

    Users are ordered by ascending channel gain; the weakest user is decoded
    last and therefore sees no interference.

    Parameters
    ----------
    gains : array_like
        Linear power gains ``d_i > 0``.
    rates : array_like
        Rates ``rho_i >= 0`` in nats.
    n0 : float
        Noise spectral density.

    Returns
    -------
    numpy.ndarray
        Energies ``E_i``, in the caller's user order.
    """
    if n0 <= 0:
        raise ValueError("n0 must be positive")
    d, r = _check(gains, rates)
    if d.size == 0:
        return np.zeros(0)
    return decode_chain(d, r, ascending_order(d), n0)


def decode_order_oracle(gains, rates, n0: float = 1.0):
    """Brute-force the decoding order over all ``K!`` permutations.

    Returns ``(order, min_sum_energy)``.  Among orders tying to within 1e-12
    relative, the ascending-gain order wins.
    """
    d, r = _check(gains, rates)
    k = d.size
    if k > 10:
        raise TooLargeError(f"{k}! orders is too many to enumerate")
    ref = tuple(int(i) for i in ascending_order(d))
    best_order, best = ref, float(decode_chain(d, r, ref, n0).sum())
    for order in itertools.permutations(range(k)):
        total = float(decode_chain(d, r, order, n0).sum())
        if total < best * (1.0 - 1e-12):
            best_order, best = order, total
    return np.array(best_order, dtype=int), best


def capacity_region_check(gains, powers, rates, n0: float = 1.0, slack: float = 1e-9) -> bool:
    """True iff ``rates`` lies in the MAC capacity region for received powers ``gains * powers``."""
    d, r = _check(gains, rates)
    e = np.asarray(powers, dtype=float)
    k = d.size
    if k > 20:
        raise TooLargeError(f"2^{k} subsets is too many to enumerate")
    if k == 0:
        return True
    rx = d * e / n0
    # enumerate subsets as bit masks, vectorised
    masks = ((np.arange(1, 2**k)[:, None] >> np.arange(k)) & 1).astype(float)
    lhs = masks @ r
    rhs = np.log1p(masks @ rx)
    return bool(np.all(lhs <= rhs + slack))


def full_set_gap(gains, powers, rates, n0: float = 1.0) -> float:
    """``log(1 + sum received / N0) - sum rates``; zero for a tight allocation."""
    d = np.asarray(gains, dtype=float)
    return float(np.log1p(np.sum(d * np.asarray(powers)) / n0) - np.sum(rates))


def sum_rate_identity(a, z: float):
    """Both sides of the successive-decoding telescoping identity for the log."""
    a = np.asarray(a, dtype=float)
    if z <= 0:
        raise ValueError("Z must be positive")
    left = 0.0
    acc = z
    for ai in a:
        left += math.log1p(ai / acc)
        acc += ai
    right = math.log1p(float(a.sum()) / z)
    return left, right


def rate_transform_trace(rho, rho_prime, gains, n0: float = 1.0) -> np.ndarray:
    """Sum energy along the step-by-step morph of ``rho`` into a dominated ``rho_prime``.

    ``gains`` must already be ascending.  At step ``u`` user ``u`` is given its
    target rate and the surplus moves to user ``u + 1``; the prefix sums of
    ``rho`` are preserved for every index past ``u``.

    Returns the ``K + 1`` sum energies, from ``rho`` to ``rho_prime``.
    """
    cur = np.array(rho, dtype=float)
    tgt = np.asarray(rho_prime, dtype=float)
    d = np.asarray(gains, dtype=float)
    if not (cur.shape == tgt.shape == d.shape):
        raise ValueError("length mismatch")
    if np.any(np.diff(d) < 0):
        raise ValueError("gains must be sorted ascending")
    if np.any(np.cumsum(cur) < np.cumsum(tgt) - 1e-12):
        raise DominanceViolation("prefix sums of rho must dominate those of rho_prime")
    order = np.arange(d.size)
    trace = [float(decode_chain(d, cur, order, n0).sum())]
    k = d.size
    for u in range(k):
        surplus = cur[u] - tgt[u]
        cur[u] = tgt[u]
        if u + 1 < k:
            cur[u + 1] += surplus
            if cur[u + 1] < -1e-12:
                raise DominanceViolation(f"step {u + 1} drives rate {u + 1} negative")
            cur[u + 1] = max(cur[u + 1], 0.0)
        trace.append(float(decode_chain(d, cur, order, n0).sum()))
    return np.array(trace)
