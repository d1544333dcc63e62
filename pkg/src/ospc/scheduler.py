"""One slot of the opportunistic superposition coding policy.

Users whose best-band fading beats their class threshold are selected, their
whole buffer is served, each goes on its best band, and every band runs its own
ascending-gain superposition chain.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .channel import FadingLaw, kappa_for_delay
from .power import optimal_allocation


@dataclass
class UserState:
    """Per-user state as parallel arrays (one entry per user)."""

    pathloss: np.ndarray
    queue: np.ndarray = None
    class_id: np.ndarray = None
    last_service_slot: np.ndarray = None  # -1 = never served

    def __post_init__(self):
        self.pathloss = np.asarray(self.pathloss, dtype=float)
        k = self.pathloss.size
        self.queue = np.zeros(k) if self.queue is None else np.asarray(self.queue, dtype=float)
        self.class_id = np.zeros(k, dtype=int) if self.class_id is None else np.asarray(self.class_id, dtype=int)
        if self.last_service_slot is None:
            self.last_service_slot = np.full(k, -1, dtype=int)
        if np.any(self.queue < 0):
            raise ValueError("queues must be non-negative")

    def __len__(self):
        return self.pathloss.size


@dataclass(frozen=True)
class SlotChannel:
    fading: np.ndarray  # (K, M) linear gains
    t: int = 0

    @property
    def best(self) -> np.ndarray:
        return np.asarray(self.fading).max(axis=1)


@dataclass
class ScheduleDecision:
    selected: np.ndarray  # bool mask over users
    rate: np.ndarray  # nats, zero for unselected
    band: np.ndarray  # -1 for unselected
    energy: np.ndarray = None


@dataclass(frozen=True)
class ClassThresholds:
    kappas: tuple
    delays: tuple = None
    fractions: tuple = (1.0,)

    def __post_init__(self):
        if len(self.kappas) != len(self.fractions):
            raise ValueError("one fraction per class")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ValueError("class fractions must sum to 1")

    @classmethod
    def single(cls, kappa: float) -> "ClassThresholds":
        return cls(kappas=(float(kappa),), fractions=(1.0,))

    @classmethod
    def from_delays(cls, fading: FadingLaw, delays: Sequence[float], fractions: Optional[Sequence[float]] = None):
        delays = tuple(float(d) for d in delays)
        if fractions is None:
            fractions = (1.0 / len(delays),) * len(delays)
        kappas = tuple(kappa_for_delay(fading, d) for d in delays)
        return cls(kappas=kappas, delays=delays, fractions=tuple(float(a) for a in fractions))

    @property
    def n_classes(self) -> int:
        return len(self.kappas)

    def gammas(self, fading: FadingLaw) -> np.ndarray:
        return np.array([float(fading.best_sf(k)) for k in self.kappas])

    def assign_classes(self, n_users: int) -> np.ndarray:
        """Deterministic class labels, contiguous blocks sized by the fractions."""
        edges = np.round(np.cumsum(self.fractions) * n_users).astype(int)
        return np.searchsorted(edges, np.arange(n_users), side="right")


def select_users(channel: SlotChannel, thresholds: ClassThresholds, users: UserState) -> np.ndarray:
    kappa = np.asarray(thresholds.kappas, dtype=float)[users.class_id]
    return channel.best > kappa


def flush_rates(users: UserState, selected: np.ndarray, t: Optional[int] = None) -> np.ndarray:
    """Serve the whole buffer of every selected user; empties those queues."""
    rate = np.where(selected, users.queue, 0.0)
    users.queue = np.where(selected, 0.0, users.queue)
    if t is not None:
        users.last_service_slot = np.where(selected, t, users.last_service_slot)
    return rate


def assign_bands(channel: SlotChannel, selected: np.ndarray) -> np.ndarray:
    # argmax returns the first maximum, i.e. lowest band index on ties
    band = np.argmax(np.asarray(channel.fading), axis=1)
    return np.where(selected, band, -1)


def slot_power(channel: SlotChannel, users: UserState, decision: ScheduleDecision, n0: float = 1.0) -> np.ndarray:
    """Per-user transmit energy, one independent ascending-gain chain per band."""
    fading = np.asarray(channel.fading)
    energy = np.zeros(len(users))
    for m in np.unique(decision.band[decision.selected]):
        idx = np.flatnonzero(decision.selected & (decision.band == m))
        gains = users.pathloss[idx] * fading[idx, m]
        energy[idx] = optimal_allocation(gains, decision.rate[idx], n0)
    return energy


def schedule_slot(channel: SlotChannel, thresholds: ClassThresholds, users: UserState, n0: float = 1.0) -> ScheduleDecision:
    """Run select, flush, band assignment and power allocation for one slot (arrivals already queued)."""
    selected = select_users(channel, thresholds, users)
    rate = flush_rates(users, selected, channel.t)
    band = assign_bands(channel, selected)
    decision = ScheduleDecision(selected=selected, rate=rate, band=band)
    decision.energy = slot_power(channel, users, decision, n0)
    return decision
