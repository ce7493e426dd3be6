"""Profit-maximizing price for unbounded demand, plus finite-pool price candidates.

Prices, values and profits are in units of the search cost.  Raising the
price p moves v - p down through Regions 4, 3, 2, 1.  Region 3 never holds
the optimum; the candidates are the interior maximum of the Region 2 profit
(p2), the Region 2/3 border (p3) and the interior maximum of the Region 4
profit (p4).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import ConvergenceError, DomainError
from .finite import find_equilibria
from .infinite import log_ratio, rates_on_grid, u_of_k
from .lambert import r_func
from .model import ArrivalProfile, MarketParams, firm_profit

_VF_CAP = 1e6


def w_const(k: float) -> float:
    """W(-(k+1) exp(-(k+1))), which lies in [-1, 0)."""
    if k < 0:
        raise DomainError("k must be >= 0")
    # Same value as R(k + 1); going through R keeps k = 0 exact.
    return float(r_func(k + 1.0))


def late_threshold(k: float) -> float:
    """exp(W + k + 1) = -(k+1)/W: the largest v for which p2 lies in Region 2."""
    return math.exp(w_const(k) + k + 1.0)


@dataclass(frozen=True)
class Candidate:
    label: str
    price: float
    profit: float
    relevant: bool


def candidate_prices(v: float, k: float) -> dict[str, Candidate]:
    """The local optima p2, p4 and the border price p3 with their closed-form profits.

    ``relevant`` says whether the price actually lands in the region whose
    profit expression produced it.  Candidates whose formula is undefined
    (v < 1 for p2, v < k + 1 for p3 and p4) are omitted.
    """
    if v < 1.0:
        raise DomainError("candidate prices need v >= 1")
    W = w_const(k)
    out = {
        "p2": Candidate("p2", v - log_ratio(v), v - 1.0 - math.log(v), v <= math.exp(W + k + 1.0)),
    }
    if v >= k + 1.0:
        out["p3"] = Candidate("p3", v - k - 1.0, (v - k - 1.0) * -math.expm1(-(W + k + 1.0)), True)
        u = u_of_k(k)
        out["p4"] = Candidate(
            "p4", v - k - log_ratio(v - k), v - k - 1.0 - math.log(v - k), v >= k + u,
        )
    return out


def f_func(v: float, k: float) -> float:
    """Profit gap pi4 - pi3 = (1 - v/(k+1)) W - ln(v - k)."""
    if v <= k:
        raise DomainError("f needs v > k")
    return (1.0 - v / (k + 1.0)) * w_const(k) - math.log(v - k)


def v_m_of_k(k: float) -> float:
    """Minimizer of f, k - (k+1)/W."""
    return k - (k + 1.0) / w_const(k)


def v_f_of_k(k: float) -> float:
    """The root of f above k + 1; beyond it the early-only price wins."""
    if not k > 0:
        raise DomainError("v_f needs k > 0")
    lo = v_m_of_k(k)
    hi = 2.0 * lo
    while f_func(hi, k) <= 0.0:
        hi *= 2.0
        if hi > _VF_CAP:
            raise ConvergenceError("v_f bracket exceeded cap", k=k, upper=hi)
    return brentq(lambda v: f_func(v, k), lo, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps)


@dataclass(frozen=True)
class PricingConstants:
    k: float
    W: float
    u: float
    v_f: float
    v_m: float

    @property
    def late_threshold(self) -> float:
        return math.exp(self.W + self.k + 1.0)


def pricing_constants(k: float) -> PricingConstants:
    return PricingConstants(k=k, W=w_const(k), u=u_of_k(k), v_f=v_f_of_k(k), v_m=v_m_of_k(k))


@dataclass(frozen=True)
class PricingSolution:
    case: int
    p_star: float
    pi_star: float
    profile: ArrivalProfile
    price_arbitrary: bool = False


def optimal_price(v: float, k: float) -> PricingSolution:
    """Optimal single price over both periods and the arrivals it induces.

    Case 1 (v < 1): no price sells; ``p_star`` is reported as v and flagged.
    Case 2: period-1 only at the Region 2 optimum.  Case 3: the Region 2/3
    border price.  Case 4: period-0 only at the Region 4 optimum.
    Ties at the thresholds go to the lower case.
    """
    if v < 0 or k < 0:
        raise DomainError("optimal_price needs v >= 0 and k >= 0")
    if v < 1.0:
        return PricingSolution(1, v, 0.0, ArrivalProfile(0.0, 0.0), price_arbitrary=True)

    if k == 0:
        # No Region 3 and W = -1: the late threshold collapses to 1 and for
        # v > 1 every price below v - 1 sends everyone early.
        if v == 1.0:
            return PricingSolution(2, 0.0, 0.0, ArrivalProfile(0.0, 0.0))
        return _case4(v, k)

    W = w_const(k)
    if v <= math.exp(W + k + 1.0):
        return PricingSolution(2, v - log_ratio(v), v - 1.0 - math.log(v), ArrivalProfile(0.0, math.log(v)))
    if v <= v_f_of_k(k):
        lam1 = W + k + 1.0
        return PricingSolution(3, v - k - 1.0, (v - k - 1.0) * -math.expm1(-lam1), ArrivalProfile(0.0, lam1))
    return _case4(v, k)


def _case4(v, k):
    return PricingSolution(
        4, v - k - log_ratio(v - k), v - k - 1.0 - math.log(v - k), ArrivalProfile(math.log(v - k), 0.0),
    )


def profit_curve(v: float, k: float, num_points: int):
    """Profit over a uniform price grid on [0, v].

    Returns ``(p, region, profit)`` arrays.
    """
    if num_points < 2:
        raise ValueError("num_points must be >= 2")
    p = np.linspace(0.0, v, num_points)
    region, lam0, lam1 = rates_on_grid(v, k, p)
    return p, region, p * -np.expm1(-(lam0 + lam1))


def single_period_profit(v: float) -> float:
    """Optimal profit when only period 1 is open: v - 1 - ln v, or 0 if v < 1."""
    if v < 0:
        raise DomainError("v must be >= 0")
    return 0.0 if v < 1.0 else v - 1.0 - math.log(v)


# ---------------------------------------------------------------------------
# Finite pool: border prices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BorderPrice:
    price: float
    types_below: tuple[int, ...]
    types_above: tuple[int, ...]
    profits_below: dict


def _types_at(c, K, V, lam, P):
    recs = find_equilibria(MarketParams(c=c, K=K, V=V, P=P, lam=lam))
    return tuple(int(r.etype) for r in recs), recs


def finite_border_prices(c: float, K: float, V: float, lam: float = 1.0, num: int = 400,
                         tol: float = 1e-10, merge_tol: float = 1e-7) -> list[BorderPrice]:
    """Prices in [0, V] where the set of equilibrium types changes.

    With a finite pool the profit represented by types 5-7 is linear in P,
    so these border points are the candidates for the profit maximum.  The
    scan uses ``num`` grid cells and refines each change by bisection.
    """
    grid = np.linspace(0.0, V, num + 1)
    types = [_types_at(c, K, V, lam, P)[0] for P in grid]
    borders = []
    for i in range(num):
        lo, t_lo = grid[i], types[i]
        # Several changes can share one cell, so keep splitting until the
        # cell's right end is reached.
        while t_lo != types[i + 1]:
            a, b = lo, grid[i + 1]
            while b - a > tol:
                mid = 0.5 * (a + b)
                if _types_at(c, K, V, lam, mid)[0] == t_lo:
                    a = mid
                else:
                    b = mid
            _, recs = _types_at(c, K, V, lam, a)
            profits = {int(r.etype): firm_profit(a, r.profile) for r in recs}
            t_hi = _types_at(c, K, V, lam, b)[0]
            borders.append(BorderPrice(0.5 * (a + b), t_lo, t_hi, profits))
            lo, t_lo = b, t_hi
    return _merge_close(borders, merge_tol)


def _merge_close(borders, merge_tol):
    # Changes that coincide in exact arithmetic land a few 1e-9 apart once
    # the inequality tolerance is applied; report them as one border.
    out = []
    for b in borders:
        if out and b.price - out[-1].price <= merge_tol:
            prev = out[-1]
            out[-1] = BorderPrice(prev.price, prev.types_below, b.types_above, prev.profits_below)
        else:
            out.append(b)
    return [b for b in out if b.types_below != b.types_above]
