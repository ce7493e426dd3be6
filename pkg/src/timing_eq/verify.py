"""Independent oracles and the end-to-end acceptance checks.

The oracles deliberately avoid the closed forms: W is found by bisection on
w*exp(w) = a, and the unbounded-demand rates by bracketing the raw
zero-utility equations one period at a time.  Each ``check_*`` function runs
one acceptance criterion and returns a :class:`CheckResult`; ``run_all`` is
what ``timing-eq verify`` prints.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import finite, infinite, lambert, model, pricing, simulate
from .finite import EquilibriumType as T
from .model import ArrivalProfile, NormalizedMarket

_E = math.e


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    metrics: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number:2d} {self.name}: {self.detail} ({self.seconds:.2f}s)"


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------

def bisect_w0(a: float, tol: float = 1e-15) -> float:
    """Principal-branch W by plain bisection on w*exp(w) - a over w >= -1."""
    if a < -1.0 / _E - 1e-12:
        raise ValueError("argument below -1/e")
    lo, hi = -1.0, max(1.0, math.log1p(max(a, 0.0)))
    while hi * math.exp(hi) < a:
        hi *= 2.0
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid * math.exp(mid) < a:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


def _e1_gap(x, v0):
    # v0 - x / (1 - exp(-x)), decreasing in x from v0 - 1 at x = 0.
    return v0 + x / math.expm1(-x) if x > 0 else v0 - 1.0


def oracle_lambda0(v0: float) -> float:
    """Root of v0 = x / (1 - exp(-x)) by bracketing."""
    if v0 <= 1.0:
        return 0.0
    return brentq(lambda x: _e1_gap(x, v0), 0.0, 2.0 * v0 + 1.0, xtol=1e-15, rtol=1e-15, maxiter=500)


def oracle_lambda1(v1: float, lam0: float) -> float:
    """Root of v1 = y exp(lam0) / (1 - exp(-y)), or 0 if nobody comes late."""
    scale = v1 * math.exp(-lam0)
    if scale <= 1.0:
        return 0.0
    return brentq(lambda y: _e1_gap(y, scale), 0.0, 2.0 * scale + 1.0, xtol=1e-15, rtol=1e-15, maxiter=500)


def oracle_rates(nm: NormalizedMarket) -> ArrivalProfile:
    """Unbounded-demand equilibrium rates found without the closed forms.

    Early arrivals come iff that beats staying home at zero competition and
    arriving late against the late-only equilibrium is not better; both
    comparisons are done numerically.
    """
    v1, v0 = nm.v1, nm.v0
    if v1 < 1.0:
        return ArrivalProfile(0.0, 0.0)
    late_only = oracle_lambda1(v1, 0.0)
    # Early entry pays iff U0 > 0 against the late-only profile, which has
    # no early competition, i.e. iff v0 > 1.
    if v0 <= 1.0:
        return ArrivalProfile(0.0, late_only)
    lam0 = oracle_lambda0(v0)
    return ArrivalProfile(lam0, oracle_lambda1(v1, lam0))


def damped_region3(nm: NormalizedMarket, relax: float = 0.5, tol: float = 1e-13, max_iter: int = 100000):
    """Damped alternating substitution on the two zero-utility equations."""
    x, y = 0.5, 0.5
    for _ in range(max_iter):
        x_new = (1 - relax) * x + relax * nm.v0 * -math.expm1(-x)
        y_new = (1 - relax) * y + relax * nm.v1 * math.exp(-x_new) * -math.expm1(-y)
        if abs(x_new - x) + abs(y_new - y) < tol:
            return x_new, y_new
        x, y = x_new, y_new
    raise RuntimeError("damped substitution did not converge")


def e1_residual(v0: float, lam0: float) -> float:
    return abs(v0 - lam0 / -math.expm1(-lam0)) if lam0 > 0 else abs(v0 - 1.0)


def e2_residual(v1: float, lam0: float, lam1: float) -> float:
    if lam1 <= 0:
        return abs(v1 * math.exp(-lam0) - 1.0)
    return abs(v1 - lam1 * math.exp(lam0) / -math.expm1(-lam1))


def profit_oracle(v, k, p):
    """Profit at price p with the rates taken from :func:`oracle_rates`."""
    r = oracle_rates(NormalizedMarket(v, k, p))
    return p * -math.expm1(-r.total)


# ---------------------------------------------------------------------------
# Sampling helpers
# ---------------------------------------------------------------------------

def sample_region(rng: np.random.Generator, region: int, n: int):
    """``n`` random normalized markets inside the given unbounded-demand region."""
    out = []
    while len(out) < n:
        k = float(rng.uniform(0.1, 10.0))
        p = float(rng.uniform(0.0, 5.0))
        u = infinite.u_of_k(k)
        if region == 1:
            v1 = rng.uniform(0.0, 1.0)
        elif region == 2:
            v1 = rng.uniform(1.0, k + 1.0)
        elif region == 3:
            v1 = rng.uniform(k + 1.0, u)
        else:
            v1 = rng.uniform(u, u + 50.0)
        nm = NormalizedMarket(float(v1) + p, k, p)
        if infinite.classify_region(nm) == region:
            out.append(nm)
    return out


# ---------------------------------------------------------------------------
# Acceptance checks
# ---------------------------------------------------------------------------

def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_timed
def check_lambert() -> CheckResult:
    """Round trip on 500 points of [-1, 5], exact values at 0 and -1/e, under 1 s."""
    t0 = time.perf_counter()
    w = np.linspace(-1.0, 5.0, 500)
    err = float(np.max(np.abs(lambert.lambert_w0(w * np.exp(w)) - w)))
    w0 = lambert.lambert_w0(0.0)
    wb = lambert.lambert_w0(-1.0 / _E)
    elapsed = time.perf_counter() - t0
    ok = err <= 1e-10 and abs(w0) <= 1e-12 and abs(wb + 1.0) <= 1e-12 and elapsed < 1.0
    return CheckResult(1, "Lambert identities", ok,
                       f"max round-trip error {err:.2e}, W(0)={w0:g}, W(-1/e)={wb:.15g}, {elapsed * 1e3:.1f} ms",
                       metrics={"round_trip": err})


@_timed
def check_u_of_k() -> CheckResult:
    """u(2) against its stated value and strict growth of u on [0, 10]."""
    u2 = infinite.u_of_k(2.0)
    ks = np.linspace(0.0, 10.0, 401)
    us = np.array([infinite.u_of_k(float(k)) for k in ks])
    inc = bool(np.all(np.diff(us) > 0))
    ok = abs(u2 - 3.81449) <= 1e-4 and inc
    return CheckResult(2, "Region 3/4 border u(k)", ok, f"u(2)={u2:.7f}, strictly increasing={inc}",
                       metrics={"u2": u2})


EXAMPLES = {
    1: ((0.2, 0.4), {T.INDIFFERENT: (0.6305, 0.3695), T.ALL_EARLY: (1.0, 0.0), T.ALL_LATE: (0.0, 1.0)}),
    2: ((0.4, 0.37), {T.INDIFFERENT: (0.041, 0.959), T.EARLY_PARTIAL: (0.989, 0.0), T.ALL_LATE: (0.0, 1.0)}),
    3: ((0.4, 0.4), {T.INDIFFERENT: (0.63, 0.37), T.BOTH_PARTIAL: (0.8742, 0.085), T.ALL_LATE: (0.0, 1.0)}),
}


def example_records(number: int):
    (c, K), _ = EXAMPLES[number]
    params = model.ck_market(c, K)
    return params, finite.find_equilibria(params)


@_timed
def check_examples() -> CheckResult:
    """Equilibrium type sets and rates of the three worked examples."""
    worst, problems = 0.0, []
    for num, (_, expected) in EXAMPLES.items():
        _, recs = example_records(num)
        got = {r.etype: r.profile for r in recs}
        if set(got) != set(expected):
            problems.append(f"ex{num} types {sorted(int(t) for t in got)}")
            continue
        for t, (x, y) in expected.items():
            d = max(abs(got[t].lambda0 - x), abs(got[t].lambda1 - y))
            worst = max(worst, d)
    ok = not problems and worst <= 5e-3
    detail = f"max rate deviation {worst:.2e}" + (f"; {', '.join(problems)}" if problems else "")
    return CheckResult(3, "Finite-pool worked examples", ok, detail, metrics={"worst": worst})


def _welfare_direct(c, net_early, net_late, x, y):
    return (1 - math.exp(-x)) * net_early + math.exp(-x) * (1 - math.exp(-y)) * net_late - c * (x + y)


@_timed
def check_example1_welfare(replications: int = 10 ** 6, seed: int = 17) -> CheckResult:
    """Welfare of the pure equilibria of the first example, and the mixed one three ways."""
    params, recs = example_records(1)
    by_type = {r.etype: r for r in recs}
    sw7 = model.social_welfare(params, by_type[T.ALL_LATE].profile)
    sw6 = model.social_welfare(params, by_type[T.ALL_EARLY].profile)
    prof5 = by_type[T.INDIFFERENT].profile
    sw5 = model.social_welfare(params, prof5)
    direct = _welfare_direct(params.c, params.net_early, params.net_late, prof5.lambda0, prof5.lambda1)
    est = simulate.simulate_market(params, prof5.strategy(params.lam),
                                   simulate.SimConfig(replications, seed=seed))["welfare"]
    ok = (abs(sw7 - 0.432) <= 1e-3 and abs(sw6 - 0.179) <= 1e-3 and abs(sw5 - direct) <= 1e-9
          and est.within(sw5))
    detail = (f"SW7={sw7:.6f}, SW6={sw6:.6f}, SW5={sw5:.6f} "
              f"(MC {est.mean:.6f} +/- {est.std_error:.1e})")
    return CheckResult(4, "Example welfare", ok, detail, metrics={"sw5": sw5, "mc": est.mean, "se": est.std_error})


CK_POINTS = [((1 - 1 / _E, 1 / _E), {7, 5, 3, 2}), ((1 / _E, (_E - 2) / (_E - 1)), {7, 6, 5, 4, 3})]
VK_POINTS = [((_E / (_E - 1), 1 / (_E - 1)), {7, 5, 3, 2}), ((_E, _E * (_E - 2) / (_E - 1)), {7, 6, 5, 4, 3})]


def classify_grid(plane: str, n: int = 100, lo: float = 0.0, hi: float = 1.2):
    """Type sets on an n-by-n grid of the (c, K) or (V, K) plane."""
    xs = np.linspace(lo, hi, n + 1)[1:]
    ks = np.linspace(lo, hi, n)
    fn = finite.classify_ck if plane == "ck" else finite.classify_vk
    return [[fn(float(x), float(k)) for x in xs] for k in ks]


@_timed
def check_region_maps() -> CheckResult:
    """Intersection points of both region maps and a timed 100x100 grid."""
    bad = []
    for pts, fn in ((CK_POINTS, finite.classify_ck), (VK_POINTS, finite.classify_vk)):
        for (a, b), want in pts:
            got = {int(t) for t in fn(a, b)}
            if got != want:
                bad.append(f"{fn.__name__}({a:.4f}, {b:.4f}) = {sorted(got)}")
    t0 = time.perf_counter()
    classify_grid("ck")
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 5.0
    detail = f"4 intersection points {'match' if not bad else 'differ: ' + '; '.join(bad)}, 100x100 grid {elapsed:.2f}s"
    return CheckResult(5, "Region maps", ok, detail, metrics={"grid_seconds": elapsed})


@_timed
def check_closed_forms(n: int = 1000, seed: int = 5) -> CheckResult:
    """Closed-form unbounded rates: zero-utility residuals and agreement with the oracle."""
    rng = np.random.default_rng(seed)
    resid, diff = 0.0, 0.0
    for region in (2, 3, 4):
        for nm in sample_region(rng, region, n):
            r = infinite.solve_rates(nm)
            o = oracle_rates(nm)
            diff = max(diff, abs(r.lambda0 - o.lambda0), abs(r.lambda1 - o.lambda1))
            if region == 2:
                resid = max(resid, e2_residual(nm.v1, 0.0, r.lambda1))
            else:
                resid = max(resid, e1_residual(nm.v0, r.lambda0))
            if region == 3:
                resid = max(resid, e2_residual(nm.v1, r.lambda0, r.lambda1))
    ok = resid <= 1e-9 and diff <= 1e-8
    return CheckResult(6, "Closed forms vs oracle", ok,
                       f"{3 * n} points, max residual {resid:.2e}, max oracle gap {diff:.2e}",
                       metrics={"residual": resid, "oracle_gap": diff})


@_timed
def check_aggregate_rate(ks=(0.5, 1.0, 2.0, 5.0, 10.0), num: int = 200) -> CheckResult:
    """Total arrival rate strictly falls as v - p rises through Region 3."""
    worst = -math.inf
    for k in ks:
        u = infinite.u_of_k(k)
        v1 = np.linspace(k + 1.0, u, num + 2)[1:-1]
        tot = np.array([infinite.solve_rates(NormalizedMarket(float(x), k)).total for x in v1])
        worst = max(worst, float(np.max(np.diff(tot))))
    ok = worst <= 1e-12
    return CheckResult(7, "Aggregate rate in Region 3", ok, f"largest step {worst:.3e}", metrics={"worst": worst})


def sample_pricing(n: int, seed: int):
    rng = np.random.default_rng(seed)
    return [(float(v), float(k)) for v, k in zip(rng.uniform(0.5, 200.0, n), rng.uniform(0.1, 10.0, n))]


@_timed
def check_optimal_price(n: int = 500, num: int = 10_000, seed: int = 1) -> CheckResult:
    """Optimal price against a brute-force grid, plus the v=10, k=2 fixture."""
    t0 = time.perf_counter()
    worst_over, worst_gap, worst_step, worst_self = -math.inf, 0.0, 0.0, 0.0
    for v, k in sample_pricing(n, seed):
        sol = pricing.optimal_price(v, k)
        p, _, prof = pricing.profit_curve(v, k, num)
        step = p[1] - p[0]
        i = int(np.argmax(prof))
        worst_over = max(worst_over, float(prof[i]) - sol.pi_star)
        worst_gap = max(worst_gap, sol.pi_star - float(prof[i]))
        if sol.case == 1:
            dist = 0.0 if prof[i] == 0.0 else math.inf
        else:
            dist = abs(p[i] - sol.p_star) / step
        worst_step = max(worst_step, dist)
        realized = model.firm_profit(sol.p_star, infinite.solve_rates(NormalizedMarket(v, k, sol.p_star)))
        worst_self = max(worst_self, abs(realized - sol.pi_star))
    fix = pricing.optimal_price(10.0, 2.0)
    fix_ok = fix.case == 2 and abs(fix.pi_star - (9.0 - math.log(10.0))) <= 1e-9
    elapsed = time.perf_counter() - t0
    ok = worst_over <= 1e-4 and worst_step <= 1.0 and worst_self <= 1e-9 and fix_ok and elapsed < 30.0
    detail = (f"grid max exceeds pi* by at most {worst_over:.2e}, argmax within {worst_step:.2f} steps, "
              f"pi(p*) matches pi* to {worst_self:.1e}, pi* - grid max up to {worst_gap:.2e}, "
              f"fixture case {fix.case} pi*={fix.pi_star:.9f}")
    return CheckResult(8, "Optimal price", ok, detail,
                       metrics={"over": worst_over, "gap": worst_gap, "steps": worst_step})


PRICING_KS = (0.1, 0.5, 1.0, 2.0, 5.0, 10.0)


@_timed
def check_orderings() -> CheckResult:
    """Candidate profit ordering above k + u and the chain of pricing constants."""
    ordering_bad = 0
    for k in PRICING_KS:
        u = infinite.u_of_k(k)
        for v in np.linspace(k + u, k + u + 200.0, 200):
            cands = pricing.candidate_prices(float(v), k)
            pi2, pi3, pi4 = cands["p2"].profit, cands["p3"].profit, cands["p4"].profit
            if not (pi4 < pi2 and pi3 <= pi2):
                ordering_bad += 1
    chain_bad = []
    for k in PRICING_KS:
        pc = pricing.pricing_constants(k)
        if not (k + 1 < pc.v_m <= pc.v_f and pc.late_threshold <= pc.v_f and pc.v_f >= k + pc.u):
            chain_bad.append(k)
    ok = ordering_bad == 0 and not chain_bad
    return CheckResult(9, "Profit ordering and constants", ok,
                       f"{ordering_bad} ordering violations on {200 * len(PRICING_KS)} points, "
                       f"constant chain fails for k in {chain_bad}")


@_timed
def check_zero_welfare(n: int = 1000, seed: int = 11) -> CheckResult:
    """Normalized welfare vanishes at every unbounded-demand equilibrium."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    per = n // 4
    for region in (1, 2, 3, 4):
        count = per + (n - 4 * per if region == 4 else 0)
        for nm in sample_region(rng, region, count):
            worst = max(worst, abs(model.social_welfare_two_period(nm, infinite.solve_rates(nm))))
    ok = worst <= 1e-8
    return CheckResult(10, "Zero welfare with unbounded demand", ok, f"{n} points, max |SW| {worst:.2e}",
                       metrics={"worst": worst})


@_timed
def check_single_period(n: int = 500, seed: int = 3) -> CheckResult:
    """Selling only in the ideal period never earns less than the two-period optimum."""
    below, eq_bad, strict_bad = 0, 0, 0
    counts = {1: 0, 2: 0, 3: 0, 4: 0}
    for v, k in sample_pricing(n, seed):
        sol = pricing.optimal_price(v, k)
        sp = pricing.single_period_profit(v)
        counts[sol.case] += 1
        if sp < sol.pi_star:
            below += 1
        if sol.case <= 2 and sp != sol.pi_star:
            eq_bad += 1
        if sol.case >= 3 and not sp > sol.pi_star:
            strict_bad += 1
    ok = below == 0 and eq_bad == 0 and strict_bad == 0
    return CheckResult(11, "Single-period dominance", ok,
                       f"cases {counts}; violations: {below} below, {eq_bad} unequal in cases 1-2, "
                       f"{strict_bad} not strict in cases 3-4")


def certification_targets():
    """Finite equilibria of the worked examples plus unbounded equilibria in every region."""
    finite_targets = []
    for num in EXAMPLES:
        params, recs = example_records(num)
        finite_targets += [(f"ex{num} type {int(r.etype)}", params, r.profile) for r in recs]
    unbounded = []
    for k in (0.5, 2.0, 5.0):
        u = infinite.u_of_k(k)
        for v1 in (0.6, 0.5 * (k + 2.0), 0.5 * (k + 1.0 + u), u + 2.0):
            nm = NormalizedMarket(v1 + 1.0, k, 1.0)
            unbounded.append((f"k={k} v1={v1:.3f} region {int(infinite.classify_region(nm))}",
                              nm.to_params(), infinite.solve_rates(nm)))
    return finite_targets, unbounded


@_timed
def check_certification(replications: int = 10 ** 5, seed: int = 2024) -> CheckResult:
    """Every analytic equilibrium survives the simulated best-response test."""
    t0 = time.perf_counter()
    finite_targets, unbounded = certification_targets()
    failed, worst = [], -math.inf
    for i, (label, params, prof) in enumerate(finite_targets):
        cert = simulate.certify_finite(params, prof, simulate.SimConfig(replications, seed=seed + i))
        worst = max(worst, cert.worst)
        if not cert.passed:
            failed.append(label)
    for i, (label, params, prof) in enumerate(unbounded):
        cert = simulate.certify_unbounded(params, prof, simulate.SimConfig(replications, seed=seed + 100 + i))
        worst = max(worst, cert.worst)
        if not cert.passed:
            failed.append(label)
    p, prof = finite_targets[0][1], finite_targets[0][2]
    strat = prof.strategy(p.lam)
    a = simulate.simulate_market(p, strat, simulate.SimConfig(replications, seed=seed))
    b = simulate.simulate_market(p, strat, simulate.SimConfig(replications, seed=seed, workers=4))
    repro = a == b
    elapsed = time.perf_counter() - t0
    ok = not failed and repro and elapsed < 60.0
    n = len(finite_targets) + len(unbounded)
    detail = (f"{n} equilibria, largest gain {worst:.2f} SE, reproducible={repro}"
              + (f"; failed: {', '.join(failed)}" if failed else ""))
    return CheckResult(12, "Monte Carlo certification", ok, detail, metrics={"worst_se": worst})


ALL_CHECKS = (
    check_lambert, check_u_of_k, check_examples, check_example1_welfare, check_region_maps,
    check_closed_forms, check_aggregate_rate, check_optimal_price, check_orderings,
    check_zero_welfare, check_single_period, check_certification,
)


def run_all(echo=None) -> list[CheckResult]:
    results = []
    for fn in ALL_CHECKS:
        try:
            res = fn()
        except Exception as exc:  # report, do not abort the suite
            res = CheckResult(len(results) + 1, fn.__name__, False, f"raised {type(exc).__name__}: {exc}")
        results.append(res)
        if echo is not None:
            echo(res.line())
    return results
