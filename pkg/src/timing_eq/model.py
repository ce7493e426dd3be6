"""Market parameters, expected utilities, profit and social welfare.

Two unit systems are in play.  ``MarketParams`` holds raw money values
(c, K, V, P) and a finite or unbounded pool intensity.  ``NormalizedMarket``
measures money in units of the search cost c (v = V/c, k = K/c, p = P/c),
which is how the unbounded-demand results are stated.  The finite region maps
use two further conventions, built by :func:`ck_market` (V-P = 1, lambda = 1)
and :func:`vk_market` (c = 1, lambda = 1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

UNBOUNDED = math.inf

_SERIES_CUTOFF = 1e-6


def survival_ratio(x):
    """(1 - exp(-x)) / x, extended by its limit 1 at x = 0.

    This is the chance a tagged arrival gets the unit when the competing
    arrivals are Poisson with mean x.
    """
    if np.ndim(x) == 0:
        x = float(x)
        if abs(x) < _SERIES_CUTOFF:
            return 1.0 - x / 2.0 + x * x / 6.0
        return -math.expm1(-x) / x
    x = np.asarray(x, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = -np.expm1(-x) / x
    small = np.abs(x) < _SERIES_CUTOFF
    out[small] = 1.0 - x[small] / 2.0 + x[small] ** 2 / 6.0
    return out


@dataclass(frozen=True)
class MarketParams:
    c: float
    K: float
    V: float
    P: float = 0.0
    lam: float = 1.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"search cost c must be positive, got {self.c}")
        if self.K < 0:
            raise ValueError(f"early-purchase penalty K must be >= 0, got {self.K}")
        if self.P < 0:
            raise ValueError(f"price P must be >= 0, got {self.P}")
        if not self.lam > 0:
            raise ValueError(f"demand intensity must be positive, got {self.lam}")

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.lam)

    @property
    def net_late(self) -> float:
        """V - P, the surplus of a period-1 purchase."""
        return self.V - self.P

    @property
    def net_early(self) -> float:
        """V - K - P, the surplus of a period-0 purchase."""
        return self.V - self.K - self.P

    def normalized(self) -> NormalizedMarket:
        return NormalizedMarket(v=self.V / self.c, k=self.K / self.c, p=self.P / self.c)


@dataclass(frozen=True)
class NormalizedMarket:
    v: float
    k: float
    p: float = 0.0

    def __post_init__(self):
        if self.k < 0:
            raise ValueError(f"k must be >= 0, got {self.k}")
        if self.p < 0:
            raise ValueError(f"p must be >= 0, got {self.p}")

    @property
    def v1(self) -> float:
        return self.v - self.p

    @property
    def v0(self) -> float:
        return self.v - self.p - self.k

    def to_params(self) -> MarketParams:
        return MarketParams(c=1.0, K=self.k, V=self.v, P=self.p, lam=UNBOUNDED)


def ck_market(c: float, K: float) -> MarketParams:
    """Market in the convention V - P = 1, lambda = 1."""
    return MarketParams(c=c, K=K, V=1.0, P=0.0, lam=1.0)


def vk_market(V: float, K: float) -> MarketParams:
    """Market in the convention c = 1, lambda = 1 (V stands for V - P)."""
    return MarketParams(c=1.0, K=K, V=V, P=0.0, lam=1.0)


@dataclass(frozen=True)
class ArrivalProfile:
    lambda0: float
    lambda1: float

    def __post_init__(self):
        for name in ("lambda0", "lambda1"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {val}")

    @property
    def total(self) -> float:
        return self.lambda0 + self.lambda1

    def feasible_for(self, lam: float, tol: float = 0.0) -> bool:
        return self.total <= lam + tol

    def strategy(self, lam: float) -> MixedStrategy:
        return MixedStrategy(self.lambda0 / lam, self.lambda1 / lam)


@dataclass(frozen=True)
class MixedStrategy:
    q0: float
    q1: float

    def __post_init__(self):
        if not (0 <= self.q0 <= 1 and 0 <= self.q1 <= 1):
            raise ValueError(f"probabilities out of [0, 1]: {self.q0}, {self.q1}")
        if self.q0 + self.q1 > 1 + 1e-12:
            raise ValueError(f"q0 + q1 = {self.q0 + self.q1} exceeds 1")

    @property
    def q_out(self) -> float:
        return max(0.0, 1.0 - self.q0 - self.q1)

    def rates(self, lam: float) -> ArrivalProfile:
        return ArrivalProfile(lam * self.q0, lam * self.q1)


@dataclass(frozen=True)
class Utilities:
    u0: float
    u1: float


def expected_utilities(params: MarketParams, profile: ArrivalProfile) -> Utilities:
    """Expected utility of arriving in period 0 and in period 1."""
    x, y = profile.lambda0, profile.lambda1
    u0 = -params.c + params.net_early * survival_ratio(x)
    u1 = -params.c + math.exp(-x) * params.net_late * survival_ratio(y)
    return Utilities(u0, u1)


def normalized_utilities(nm: NormalizedMarket, profile: ArrivalProfile) -> Utilities:
    """Expected utilities in units of c."""
    x, y = profile.lambda0, profile.lambda1
    return Utilities(-1.0 + nm.v0 * survival_ratio(x), -1.0 + math.exp(-x) * nm.v1 * survival_ratio(y))


def sale_probability(total_rate: float) -> float:
    return -math.expm1(-total_rate)


def firm_profit(price: float, profile: ArrivalProfile) -> float:
    """Price times the probability that at least one consumer shows up."""
    if price < 0:
        raise ValueError("price must be >= 0")
    return price * sale_probability(profile.total)


def social_welfare_two_period(nm: NormalizedMarket, profile: ArrivalProfile) -> float:
    """Aggregate consumer utility in units of c when both periods are open."""
    x, y = profile.lambda0, profile.lambda1
    return (-math.expm1(-x)) * nm.v0 + math.exp(-x) * (-math.expm1(-y)) * nm.v1 - (x + y)


def social_welfare_single_period(nm: NormalizedMarket, lambda1: float) -> float:
    """Aggregate consumer utility in units of c when only period 1 is open."""
    if lambda1 < 0:
        raise ValueError("lambda1 must be >= 0")
    return nm.v1 * (-math.expm1(-lambda1)) - lambda1


def social_welfare(params: MarketParams, profile: ArrivalProfile) -> float:
    """Two-period welfare in raw money units."""
    return params.c * social_welfare_two_period(params.normalized(), profile)


def socially_optimal_rate(nm: NormalizedMarket) -> float:
    """Maximizer of (v - p)(1 - exp(-y)) - y over y >= 0, i.e. ln(v - p) clipped at 0."""
    return math.log(nm.v1) if nm.v1 > 1 else 0.0
