"""Equilibrium arrival rates when the pool of potential consumers is unbounded.

All quantities are in units of the search cost.  With v1 = v - p and
v0 = v - p - k the equilibrium falls in one of four regions ordered by v1:

    1: v1 < 1              nobody comes
    2: 1 <= v1 <= k + 1    period 1 only, U1 = 0
    3: k + 1 < v1 < u(k)   both periods, U0 = U1 = 0
    4: v1 >= u(k)          period 0 only, U0 = 0

where u(k) solves k = u - ln(u) / (1 - 1/u).
"""
from __future__ import annotations

import math
from enum import IntEnum
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .errors import ConvergenceError, DomainError, RegionError
from .lambert import a_func, lambert_w0, r_func
from .model import ArrivalProfile, NormalizedMarket


class RegionId(IntEnum):
    NO_ARRIVALS = 1
    LATE_ONLY = 2
    BOTH = 3
    EARLY_ONLY = 4


def log_ratio(v):
    """ln(v) / (1 - 1/v), continuous at v = 1 where it equals 1."""
    if np.ndim(v) == 0:
        t = float(v) - 1.0
        if abs(t) < 1e-8:
            return 1.0 + t / 2.0
        return float(v) * math.log1p(t) / t
    v = np.asarray(v, dtype=float)
    t = v - 1.0
    with np.errstate(invalid="ignore", divide="ignore"):
        out = v * np.log1p(t) / t
    small = np.abs(t) < 1e-8
    out[small] = 1.0 + t[small] / 2.0
    return out


@lru_cache(maxsize=4096)
def u_of_k(k: float) -> float:
    """Net value v - p on the Region 3/4 border, the root u >= 1 of k = u - log_ratio(u)."""
    if k < 0:
        raise DomainError("u(k) needs k >= 0")
    if k == 0:
        return 1.0
    hi = k + 4.0 + math.log(k + 2.0)
    try:
        return brentq(lambda u: u - log_ratio(u) - k, 1.0, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    except ValueError as exc:
        raise ConvergenceError(f"u(k) bracketing failed for k={k}", bracket=(1.0, hi)) from exc


def classify_region(nm: NormalizedMarket) -> RegionId:
    v1 = nm.v1
    if v1 < 1.0:
        return RegionId.NO_ARRIVALS
    if v1 <= nm.k + 1.0:
        return RegionId.LATE_ONLY
    if v1 < u_of_k(nm.k):
        return RegionId.BOTH
    return RegionId.EARLY_ONLY


def lambda0_closed_form(v0: float) -> float:
    """Period-0 rate with U0 = 0: v0 + R(v0), solving v0 = x / (1 - exp(-x))."""
    if v0 < 1.0:
        raise DomainError(f"lambda0 needs v0 >= 1, got {v0}")
    return max(0.0, v0 + r_func(v0))


def lambda1_region2(v1: float) -> float:
    """Period-1 rate with U1 = 0 and nobody early: v1 + R(v1)."""
    if v1 < 1.0:
        raise DomainError(f"lambda1 needs v1 >= 1, got {v1}")
    return max(0.0, v1 + r_func(v1))


def _lambda1_both(v0, v1, k):
    return lambert_w0(a_func(v0, k)) - v1 * r_func(v0) / v0


def lambda1_region3(nm: NormalizedMarket) -> float:
    """Period-1 rate when both periods are used: W(A(v0)) - v1 R(v0) / v0."""
    if classify_region(nm) != RegionId.BOTH:
        raise RegionError(f"v - p = {nm.v1} is not in Region 3 for k = {nm.k}")
    return max(0.0, float(_lambda1_both(nm.v0, nm.v1, nm.k)))


def solve_rates(nm: NormalizedMarket) -> ArrivalProfile:
    region = classify_region(nm)
    if region == RegionId.NO_ARRIVALS:
        return ArrivalProfile(0.0, 0.0)
    if region == RegionId.LATE_ONLY:
        return ArrivalProfile(0.0, lambda1_region2(nm.v1))
    if region == RegionId.BOTH:
        return ArrivalProfile(lambda0_closed_form(nm.v0), lambda1_region3(nm))
    return ArrivalProfile(lambda0_closed_form(nm.v0), 0.0)


def rates_on_grid(v: float, k: float, p):
    """Vectorized ``solve_rates`` over an array of prices.

    Returns ``(region, lambda0, lambda1)`` arrays shaped like ``p``.
    """
    p = np.asarray(p, dtype=float)
    v1 = v - p
    v0 = v1 - k
    u = u_of_k(k)
    region = np.full(p.shape, int(RegionId.EARLY_ONLY))
    region[v1 < u] = RegionId.BOTH
    region[v1 <= k + 1.0] = RegionId.LATE_ONLY
    region[v1 < 1.0] = RegionId.NO_ARRIVALS

    lam0 = np.zeros(p.shape)
    lam1 = np.zeros(p.shape)
    m2 = region == RegionId.LATE_ONLY
    lam1[m2] = v1[m2] + r_func(v1[m2])
    m34 = region >= RegionId.BOTH
    lam0[m34] = v0[m34] + r_func(v0[m34])
    m3 = region == RegionId.BOTH
    if np.any(m3):
        lam1[m3] = _lambda1_both(v0[m3], v1[m3], k)
    return region, np.maximum(lam0, 0.0), np.maximum(lam1, 0.0)
