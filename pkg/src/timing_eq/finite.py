"""Equilibria of the arrival game with a finite Poisson pool of consumers.

A consumer picks period 0, period 1 or staying home.  With pool intensity
``lam`` and arrival probabilities q0, q1 the period arrivals are Poisson with
means lambda0 = lam*q0 and lambda1 = lam*q1.  There are seven support patterns
(types); each has at most one equilibrium.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

from scipy.optimize import brentq

from .errors import ConvergenceError, DomainError
from .model import ArrivalProfile, MarketParams, Utilities, expected_utilities, survival_ratio

INEQ_TOL = 1e-9
_XTOL = 1e-14
_RTOL = 4 * 2.220446049250313e-16

_E = math.e
_G1 = 1.0 - 1.0 / _E  # survival_ratio(1)
_K_TYPE5_LO = 1.0 / _E
_K_TYPE5_HI = (_E - 2.0) / (_E - 1.0)


class EquilibriumType(IntEnum):
    STAY_OUT = 1          # q0 = q1 = 0
    LATE_PARTIAL = 2      # q0 = 0, 0 < q1 < 1
    BOTH_PARTIAL = 3      # 0 < q0, q1 and q0 + q1 < 1
    EARLY_PARTIAL = 4     # 0 < q0 < 1, q1 = 0
    INDIFFERENT = 5       # 0 < q0, q1 and q0 + q1 = 1
    ALL_EARLY = 6         # q0 = 1
    ALL_LATE = 7          # q1 = 1


@dataclass(frozen=True)
class EquilibriumRecord:
    etype: EquilibriumType
    profile: ArrivalProfile
    utilities: Utilities
    residual: float


def _le(a: float, b: float, tol: float = INEQ_TOL) -> bool:
    return a <= b + tol


def _growth_ratio(x: float) -> float:
    """(exp(x) - 1) / x with limit 1 at 0."""
    return 1.0 + x / 2.0 if abs(x) < 1e-8 else math.expm1(x) / x


def _root(f, lo, hi, what):
    try:
        return brentq(f, lo, hi, xtol=_XTOL, rtol=_RTOL, maxiter=200)
    except (ValueError, RuntimeError) as exc:
        raise ConvergenceError(f"{what}: {exc}", bracket=(lo, hi), f_lo=f(lo), f_hi=f(hi)) from exc


def _solve_level(scale: float, c: float, upper: float, what: str):
    """Root y in (0, upper) of scale * survival_ratio(y) = c, or None if none exists."""
    if not (scale > c and scale * survival_ratio(upper) < c):
        return None
    return _root(lambda y: scale * survival_ratio(y) - c, 0.0, upper, what)


def _support(profile: ArrivalProfile, lam: float, tol: float):
    x, y = profile.lambda0, profile.lambda1
    zero0, zero1 = x <= tol, y <= tol
    full = abs(x + y - lam) <= tol
    return zero0, zero1, full


def check_equilibrium(params: MarketParams, profile: ArrivalProfile, tol: float = 1e-8):
    """Type of equilibrium the profile is, within ``tol``, or None."""
    if params.unbounded:
        raise DomainError("check_equilibrium needs a finite pool intensity")
    if not tol > 0:
        raise ValueError("tol must be positive")
    lam = params.lam
    if profile.total > lam + tol:
        return None
    u = expected_utilities(params, profile)
    zero0, zero1, full = _support(profile, lam, tol)
    T = EquilibriumType

    if zero0 and zero1:
        return T.STAY_OUT if u.u0 <= tol and u.u1 <= tol else None
    if zero0 and full:
        return T.ALL_LATE if u.u1 >= max(u.u0, 0.0) - tol else None
    if zero1 and full:
        return T.ALL_EARLY if u.u0 >= max(u.u1, 0.0) - tol else None
    if zero0:
        return T.LATE_PARTIAL if abs(u.u1) <= tol and u.u0 <= tol else None
    if zero1:
        return T.EARLY_PARTIAL if abs(u.u0) <= tol and u.u1 <= tol else None
    if full:
        return T.INDIFFERENT if abs(u.u0 - u.u1) <= tol and u.u0 >= -tol else None
    return T.BOTH_PARTIAL if abs(u.u0) <= tol and abs(u.u1) <= tol else None


def _type5_rate(params: MarketParams):
    """lambda0 solving U0 = U1 on lambda0 + lambda1 = lam, or None."""
    lam = params.lam
    early, late = params.net_early, params.net_late
    if early <= 0 or late <= 0:
        return None
    target = math.log(late / early)

    # Log of the ratio (U1 + c)/(U0 + c) inverted; increasing in x on (0, lam).
    def gap(x):
        return math.log(_growth_ratio(x)) - math.log(survival_ratio(lam - x)) - target

    if not (gap(0.0) < 0.0 < gap(lam)):
        return None
    return _root(gap, 0.0, lam, "type-5 indifference")


def find_equilibria(params: MarketParams) -> list[EquilibriumRecord]:
    """Every equilibrium of the finite game, at most one per type, sorted by type."""
    if params.unbounded:
        raise DomainError("find_equilibria needs a finite pool intensity; use the unbounded solver")
    c, lam = params.c, params.lam
    early, late = params.net_early, params.net_late
    T = EquilibriumType
    found: list[tuple[T, float, float, float]] = []

    # Pure patterns: nothing to solve.
    if _le(early - c, 0.0) and _le(late - c, 0.0):
        found.append((T.STAY_OUT, 0.0, 0.0, 0.0))
    u = expected_utilities(params, ArrivalProfile(0.0, lam))
    if _le(max(u.u0, 0.0), u.u1):
        found.append((T.ALL_LATE, 0.0, lam, 0.0))
    u = expected_utilities(params, ArrivalProfile(lam, 0.0))
    if _le(max(u.u1, 0.0), u.u0):
        found.append((T.ALL_EARLY, lam, 0.0, 0.0))

    # Period-1 only, partial: U1 = 0 with lambda0 = 0.
    y = _solve_level(late, c, lam, "type-2 U1 = 0")
    if y is not None and _le(early - c, 0.0):
        found.append((T.LATE_PARTIAL, 0.0, y, 0.0))

    # U0 = 0 pins lambda0 for both type 3 and type 4.
    x = _solve_level(early, c, lam, "U0 = 0")
    if x is not None:
        if _le(late * math.exp(-x) - c, 0.0):
            found.append((T.EARLY_PARTIAL, x, 0.0, 0.0))
        y = _solve_level(late * math.exp(-x), c, lam - x, "type-3 U1 = 0")
        if y is not None:
            found.append((T.BOTH_PARTIAL, x, y, 0.0))

    x = _type5_rate(params)
    if x is not None:
        prof = ArrivalProfile(x, lam - x)
        if _le(0.0, expected_utilities(params, prof).u0):
            found.append((T.INDIFFERENT, x, lam - x, 0.0))

    records = []
    for etype, x, y, _ in sorted(found):
        prof = ArrivalProfile(x, y)
        u = expected_utilities(params, prof)
        records.append(EquilibriumRecord(etype, prof, u, _residual(etype, u, prof, lam)))
    return records


def _residual(etype: EquilibriumType, u: Utilities, prof: ArrivalProfile, lam: float) -> float:
    T = EquilibriumType
    if etype == T.LATE_PARTIAL:
        return abs(u.u1)
    if etype == T.EARLY_PARTIAL:
        return abs(u.u0)
    if etype == T.BOTH_PARTIAL:
        return max(abs(u.u0), abs(u.u1))
    if etype == T.INDIFFERENT:
        return max(abs(u.u0 - u.u1), abs(prof.total - lam))
    return 0.0


# ---------------------------------------------------------------------------
# Region maps of the (c, K) and (V, K) planes
# ---------------------------------------------------------------------------

def _inverse_survival(t: float) -> float:
    """x >= 0 with survival_ratio(x) = t, for t in (0, 1]."""
    if t >= 1.0:
        return 0.0
    return _root(lambda x: survival_ratio(x) - t, 0.0, 2.0 / t + 1.0, "inverse survival ratio")


def _type5_penalty(x: float) -> float:
    """Relative penalty K/(V-P) at which lambda0 = x solves U0 = U1 (lam = 1)."""
    return 1.0 - survival_ratio(1.0 - x) / _growth_ratio(x)


def _type5_x(ratio: float):
    if not (_le(_K_TYPE5_LO, ratio) and _le(ratio, _K_TYPE5_HI)):
        return None
    ratio = min(max(ratio, _K_TYPE5_LO), _K_TYPE5_HI)
    if ratio <= _K_TYPE5_LO:
        return 0.0
    if ratio >= _K_TYPE5_HI:
        return 1.0
    return _root(lambda x: _type5_penalty(x) - ratio, 0.0, 1.0, "type-5 penalty curve")


def _unit_rate(t: float):
    """x in [0, 1] with survival_ratio(x) = t, allowing tolerance at the ends."""
    if not (_le(_G1, t) and _le(t, 1.0)):
        return None
    return _inverse_survival(min(max(t, _G1), 1.0))


def classify_ck(c: float, K: float) -> set[EquilibriumType]:
    """Equilibrium types existing at (c, K) when V - P = 1 and lambda = 1.

    Region closures are used, so a point on a boundary reports every type
    that meets there.
    """
    if not c > 0 or K < 0:
        raise ValueError("classify_ck needs c > 0 and K >= 0")
    T = EquilibriumType
    out: set[EquilibriumType] = set()
    if _le(1.0 - K, c) and _le(1.0, c):
        out.add(T.STAY_OUT)
    if _le(_G1, c) and _le(c, 1.0) and _le(1.0, K + c):
        out.add(T.LATE_PARTIAL)
    if K < 1.0:
        x = _unit_rate(c / (1.0 - K))
        if x is not None:
            lo = math.exp(-x) * survival_ratio(1.0 - x)
            if _le(lo, c) and _le(c, math.exp(-x)):
                out.add(T.BOTH_PARTIAL)
            if _le(math.exp(-x), c):
                out.add(T.EARLY_PARTIAL)
    x = _type5_x(K)
    if x is not None and _le(c, math.exp(-x) * survival_ratio(1.0 - x)):
        out.add(T.INDIFFERENT)
    if _le(K, _K_TYPE5_HI) and _le(c, (1.0 - K) * _G1):
        out.add(T.ALL_EARLY)
    if _le(_K_TYPE5_LO, K) and _le(c, _G1):
        out.add(T.ALL_LATE)
    return out


def classify_vk(V: float, K: float) -> set[EquilibriumType]:
    """Equilibrium types existing at (V, K) when c = 1 and lambda = 1.

    ``V`` stands for the net value V - P.
    """
    if K < 0:
        raise ValueError("classify_vk needs K >= 0")
    T = EquilibriumType
    out: set[EquilibriumType] = set()
    if _le(V - K, 1.0) and _le(V, 1.0):
        out.add(T.STAY_OUT)
    if _le(1.0, V) and _le(V, 1.0 / _G1) and _le(V - K, 1.0):
        out.add(T.LATE_PARTIAL)
    s = V - K
    if s > 0:
        x = _unit_rate(1.0 / s)
        if x is not None:
            t = V * math.exp(-x)
            if _le(1.0, t) and _le(t, 1.0 / survival_ratio(1.0 - x)):
                out.add(T.BOTH_PARTIAL)
            if _le(V, math.exp(x)):
                out.add(T.EARLY_PARTIAL)
    if V > 0:
        x = _type5_x(K / V)
        if x is not None and _le(math.exp(x) / survival_ratio(1.0 - x), V):
            out.add(T.INDIFFERENT)
    if _le((_E - 1.0) / (_E - 2.0) * K, V) and _le(K + 1.0 / _G1, V):
        out.add(T.ALL_EARLY)
    if _le(V / _E, K) and _le(1.0 / _G1, V):
        out.add(T.ALL_LATE)
    return out
