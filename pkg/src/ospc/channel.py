"""Path-loss and short-term fading laws, and their threshold-conditioned product.

A user's channel gain in a slot is ``d = s * f`` where ``s`` is the path loss
(fixed per user, set by its random position in the cell) and ``f`` is the
short-term fading (i.i.d. over slots, users and bands).  With ``M`` bands the
scheduler only ever looks at the best band, ``f* = max_m f^m``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize


class DegeneratePolicyError(ValueError):
    """The threshold leaves no probability mass above it (gamma == 0)."""


class UnattainableDelayError(ValueError):
    pass


# --------------------------------------------------------------------------
# path loss
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PathLossLaw:
    """Path loss of a user dropped uniformly on the annulus ``[delta, 1]``.

    ``s = r ** -alpha`` so the gain is 1 at the cell edge and ``delta**-alpha``
    at the edge of the forbidden region.
    """

    alpha: float = 2.0
    delta: float = 0.01

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.alpha <= 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    @property
    def s_max(self) -> float:
        return self.delta ** (-self.alpha)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        d2 = self.delta**2
        with np.errstate(divide="ignore"):
            mid = 1.0 - (np.power(np.maximum(x, 1.0), -2.0 / self.alpha) - d2) / (1.0 - d2)
        out = np.where(x <= 1.0, 0.0, np.where(x >= self.s_max, 1.0, mid))
        return out if out.ndim else float(out)

    def sample_radius(self, rng: np.random.Generator, size=None):
        d2 = self.delta**2
        u = rng.random(size)
        return np.sqrt(d2 + u * (1.0 - d2))

    def sample(self, rng: np.random.Generator, size=None):
        return self.sample_radius(rng, size) ** (-self.alpha)

    def expect(self, g, epsabs: float = 1e-9) -> float:
        """``E[g(S)]`` computed over the (smooth) radius density."""
        d2 = self.delta**2
        norm = 2.0 / (1.0 - d2)

        def integrand(r):
            return g(r ** (-self.alpha)) * r * norm

        val, _ = integrate.quad(integrand, self.delta, 1.0, epsabs=epsabs, epsrel=1e-11, limit=200)
        return val

    def mean_inverse(self) -> float:
        # E[1/S] = E[r^alpha], closed form
        d2 = self.delta**2
        a = self.alpha
        return 2.0 * (1.0 - self.delta ** (a + 2)) / ((a + 2) * (1.0 - d2))


def pathloss_cdf(law: PathLossLaw, x):
    return law.cdf(x)


def sample_pathloss(law: PathLossLaw, rng: np.random.Generator, size=None):
    return law.sample(rng, size)


# --------------------------------------------------------------------------
# fading
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ExpUnitMean:
    """Rayleigh fading: unit-mean exponential power gain on each of ``bands``."""

    bands: int = 1

    def __post_init__(self):
        if self.bands < 1:
            raise ValueError("bands must be >= 1")

    infimum = 0.0
    supremum = math.inf

    def sample(self, rng, size):
        return rng.standard_exponential(size)

    def best_cdf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return (-np.expm1(-x)) ** self.bands

    def best_sf(self, x):
        # 1 - (1 - e^-x)^M without cancellation for large x
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        with np.errstate(divide="ignore"):
            return -np.expm1(self.bands * np.log1p(-np.exp(-x)))

    def best_quantile(self, p):
        p = np.asarray(p, dtype=float)
        with np.errstate(divide="ignore"):
            return -np.log(-np.expm1(np.log(p) / self.bands))


@dataclass(frozen=True)
class ParetoTail:
    """Heavy-tailed single-band fading, ``P{f <= x} = 1 - x**(1 - alpha_f)`` on ``[1, inf)``."""

    alpha_f: float = 2.0
    bands: int = field(default=1, init=False)

    def __post_init__(self):
        if self.alpha_f <= 1.0:
            raise ValueError("alpha_f must exceed 1")

    infimum = 1.0
    supremum = math.inf

    def sample(self, rng, size):
        u = rng.random(size)
        return (1.0 - u) ** (1.0 / (1.0 - self.alpha_f))

    def best_cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 1.0, 0.0, 1.0 - np.power(np.maximum(x, 1.0), 1.0 - self.alpha_f))

    def best_sf(self, x):
        return 1.0 - self.best_cdf(x)

    def best_quantile(self, p):
        p = np.asarray(p, dtype=float)
        return (1.0 - p) ** (1.0 / (1.0 - self.alpha_f))


@dataclass(frozen=True)
class BoundedUniform:
    """Fading uniform on ``[0, B]`` on each of ``bands``."""

    B: float = 1.0
    bands: int = 1

    def __post_init__(self):
        if self.B <= 0.0:
            raise ValueError("B must be positive")
        if self.bands < 1:
            raise ValueError("bands must be >= 1")

    infimum = 0.0

    @property
    def supremum(self):
        return self.B

    def sample(self, rng, size):
        return self.B * rng.random(size)

    def best_cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.clip(x / self.B, 0.0, 1.0) ** self.bands

    def best_sf(self, x):
        return 1.0 - self.best_cdf(x)

    def best_quantile(self, p):
        return self.B * np.asarray(p, dtype=float) ** (1.0 / self.bands)


FadingLaw = ExpUnitMean | ParetoTail | BoundedUniform


def fading_best_cdf(law: FadingLaw, x):
    out = law.best_cdf(x)
    return float(out) if np.ndim(out) == 0 else out


def gamma_of(law: FadingLaw, kappa: float) -> float:
    """Per-slot selection probability ``P{f* > kappa}``."""
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    g = float(law.best_sf(kappa))
    if g <= 0.0:
        raise DegeneratePolicyError(f"kappa={kappa} is at or above the fading supremum")
    return g


def kappa_for_delay(law: FadingLaw, target_delay: float) -> float:
    """Largest threshold whose selection probability equals ``1/target_delay``."""
    if not target_delay >= 1.0:
        raise UnattainableDelayError(f"delay must be >= 1 slot, got {target_delay}")
    target = 1.0 / target_delay
    if target_delay == 1.0:
        # every threshold below the infimum gives gamma = 1; the largest is the infimum
        return float(law.infimum)
    # best_quantile(1 - target) is the exact inverse; polish it on the sf directly
    k0 = float(law.best_quantile(1.0 - target))
    if not np.isfinite(k0):
        k0 = law.infimum
    lo = max(law.infimum, k0 * (1 - 1e-6) - 1e-12)
    hi = k0 * (1 + 1e-6) + 1e-12
    if np.isfinite(law.supremum):
        hi = min(hi, law.supremum)
    f = lambda k: float(law.best_sf(k)) - target
    if f(lo) * f(hi) > 0:
        return k0
    return optimize.brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def conditional_fading_cdf(law: FadingLaw, kappa: float, x):
    """``P{f* <= x | f* > kappa}``."""
    g = gamma_of(law, kappa)
    x = np.asarray(x, dtype=float)
    out = np.where(x <= kappa, 0.0, 1.0 - law.best_sf(np.maximum(x, kappa)) / g)
    return out if out.ndim else float(out)


def sample_conditional_fading(law: FadingLaw, kappa: float, rng, size=None):
    """Inverse-CDF draw of ``f*`` conditioned on ``f* > kappa``."""
    g = gamma_of(law, kappa)
    base = float(law.best_cdf(kappa))
    u = rng.random(size)
    # u in [0,1) maps onto (base, 1); keep away from the endpoint 1
    p = base + (1.0 - u) * g
    p = np.where(p >= 1.0, np.nextafter(1.0, 0.0), p)
    x = law.best_quantile(p)
    return np.maximum(x, np.nextafter(kappa, np.inf))


# --------------------------------------------------------------------------
# conditional product channel
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionalChannelLaw:
    """Distribution of ``s * f*`` for a randomly placed user, given ``f* > kappa``."""

    pathloss: PathLossLaw
    fading: FadingLaw
    kappa: float = 0.0

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")
        gamma_of(self.fading, self.kappa)

    @property
    def gamma(self) -> float:
        return gamma_of(self.fading, self.kappa)

    @property
    def has_closed_form(self) -> bool:
        return isinstance(self.fading, ExpUnitMean) and self.pathloss.alpha == 2.0

    @property
    def support_min(self) -> float:
        return max(self.kappa, self.fading.infimum) * 1.0

    def cdf(self, x):
        if self.has_closed_form:
            return self.cdf_closed_form(x)
        return self.cdf_numeric(x)

    def cdf_closed_form(self, x):
        """Two-branch closed form for unit-mean exponential fading and ``alpha = 2``."""
        if not self.has_closed_form:
            raise ValueError("closed form needs ExpUnitMean fading and alpha = 2")
        if np.ndim(x) == 0:
            return _eq30(float(x), self.kappa, self.gamma, self.fading.bands, self.pathloss.delta)
        return _eq30_vec(np.asarray(x, dtype=float), self.kappa, self.gamma, self.fading.bands, self.pathloss.delta)

    def cdf_numeric(self, x, epsabs: float = 1e-9):
        """``P{s f* <= x | f* > kappa}`` by quadrature over the user radius."""
        scalar = np.ndim(x) == 0
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.array([self._cdf_numeric_scalar(float(v), epsabs) for v in xs])
        return float(out[0]) if scalar else out

    def _cdf_numeric_scalar(self, x: float, epsabs: float) -> float:
        if x <= self.support_min:
            return 0.0
        pl, fl, k = self.pathloss, self.fading, self.kappa
        a, delta = pl.alpha, pl.delta
        g = self.gamma
        gk = float(fl.best_cdf(k))
        norm = 2.0 / (1.0 - delta**2)
        # user at radius r has s = r^-a; f* <= x/s  <=>  f* <= x r^a
        k_eff = max(k, fl.infimum)
        r_lo = max(delta, (k_eff / x) ** (1.0 / a)) if k_eff > 0 else delta
        if r_lo >= 1.0:
            return 0.0
        pts = []
        if np.isfinite(fl.supremum):
            r_sat = (fl.supremum / x) ** (1.0 / a)
            if r_lo < r_sat < 1.0:
                pts.append(r_sat)

        def integrand(r):
            return (float(fl.best_cdf(x * r**a)) - gk) * r * norm

        val, _ = integrate.quad(integrand, r_lo, 1.0, points=pts or None, epsabs=epsabs * g, epsrel=1e-11, limit=200)
        return min(1.0, max(0.0, val / g))

    def quantile(self, u: float, rtol: float = 1e-12, maxiter: int = 400) -> float:
        """Inverse of :meth:`cdf` by bracketing and root finding in ``log x``."""
        if not 0.0 <= u < 1.0:
            raise ValueError("u must lie in [0, 1)")
        lo = self.support_min
        if u == 0.0:
            return lo
        cdf = self._scalar_cdf()
        hi = max(2.0 * lo, 1.0)
        n = 0
        while cdf(hi) < u:
            hi *= 4.0
            n += 1
            if n > 200:
                raise ArithmeticError("quantile bracket did not close")
        if lo <= 0.0:
            lo = min(hi, 1.0)
            n = 0
            while cdf(lo) > u:
                lo /= 4.0
                n += 1
                if n > 500:
                    raise ArithmeticError("quantile bracket did not close")
        f = lambda y: cdf(math.exp(y)) - u
        ylo, yhi = math.log(lo), math.log(hi)
        if f(ylo) >= 0.0:
            return lo
        y, info = optimize.brentq(f, ylo, yhi, xtol=rtol, rtol=4 * np.finfo(float).eps, maxiter=maxiter, full_output=True, disp=False)
        if not info.converged:
            raise ArithmeticError(f"quantile did not converge for u={u}")
        return math.exp(y)

    def _scalar_cdf(self):
        if self.has_closed_form:
            k, g, m, d = self.kappa, self.gamma, self.fading.bands, self.pathloss.delta
            return lambda x: _eq30(x, k, g, m, d)
        return lambda x: self._cdf_numeric_scalar(x, 1e-11)

    def sample(self, rng: np.random.Generator, size=None):
        s = self.pathloss.sample(rng, size)
        f = sample_conditional_fading(self.fading, self.kappa, rng, size)
        return s * f


def _eq30(x: float, kappa: float, gamma: float, bands: int, delta: float) -> float:
    if x <= kappa or x <= 0.0:
        return 0.0
    d2 = delta * delta
    c = 1.0 / (gamma * x * (1.0 - d2))
    ex = -math.expm1(-x)
    if x < kappa * d2 ** -1:
        ek = -math.expm1(-kappa)
        acc = 0.0
        pe, pk = 1.0, 1.0
        for i in range(1, bands + 1):
            pe *= ex
            pk *= ek
            acc += (pe - pk) / i
        val = (1.0 - kappa / x) / (1.0 - d2) - c * acc
    else:
        ed = -math.expm1(-x * d2)
        acc = 0.0
        pe, pd = 1.0, 1.0
        for i in range(1, bands + 1):
            pe *= ex
            pd *= ed
            acc += (pe - pd) / i
        val = 1.0 - c * acc
    return min(1.0, max(0.0, val))


def _eq30_vec(x, kappa, gamma, bands, delta):
    d2 = delta * delta
    pos = np.maximum(x, np.finfo(float).tiny)
    c = 1.0 / (gamma * pos * (1.0 - d2))
    ex = -np.expm1(-pos)
    ed = -np.expm1(-pos * d2)
    ek = -math.expm1(-kappa)
    acc_lo = np.zeros_like(pos)
    acc_hi = np.zeros_like(pos)
    pe, pd, pk = np.ones_like(pos), np.ones_like(pos), 1.0
    for i in range(1, bands + 1):
        pe = pe * ex
        pd = pd * ed
        pk *= ek
        acc_lo += (pe - pk) / i
        acc_hi += (pe - pd) / i
    lo = (1.0 - kappa / pos) / (1.0 - d2) - c * acc_lo
    hi = 1.0 - c * acc_hi
    val = np.where(pos < kappa / d2, lo, hi)
    val = np.where((x <= kappa) | (x <= 0.0), 0.0, val)
    return np.clip(val, 0.0, 1.0)


def conditional_channel_cdf(law: ConditionalChannelLaw, x):
    return law.cdf(x)


def conditional_channel_quantile(law: ConditionalChannelLaw, u: float) -> float:
    return law.quantile(u)


def sample_conditional_channel(law: ConditionalChannelLaw, rng, size=None):
    return law.sample(rng, size)
