import math

import numpy as np
import pytest
from scipy.optimize import brentq

from timing_eq.errors import DomainError
from timing_eq.infinite import RegionId, u_of_k
from timing_eq.finite import find_equilibria
from timing_eq.model import MarketParams, firm_profit
from timing_eq.pricing import (
    candidate_prices,
    f_func,
    finite_border_prices,
    late_threshold,
    optimal_price,
    pricing_constants,
    profit_curve,
    single_period_profit,
    v_f_of_k,
    v_m_of_k,
    w_const,
)
from timing_eq.verify import profit_oracle

# mpmath: lambertw(-(k+1) e^{-(k+1)}) and findroot on f for v_f.
W_REF = {1.0: -0.40637573995995990768, 2.0: -0.1785606278779211066}
VF_REF = {1.0: 14.981892607996653524, 2.0: 75.109189919840985546}


def test_w_const():
    assert w_const(0.0) == -1.0
    for k, w in W_REF.items():
        assert w_const(k) == pytest.approx(w, abs=1e-15)
    with pytest.raises(DomainError):
        w_const(-1.0)


def test_late_threshold_solves_log_ratio_equation():
    for k in (0.1, 0.5, 1.0, 2.0, 5.0, 10.0):
        t = late_threshold(k)
        ref = brentq(lambda v: v * math.log(v) / (v - 1) - (k + 1), 1 + 1e-9, 1e6, xtol=1e-14)
        assert t == pytest.approx(ref, abs=1e-9)


def test_candidates_at_v10_k2():
    W = W_REF[2.0]
    c = candidate_prices(10.0, 2.0)
    assert c["p2"].price == pytest.approx(10 - math.log(10) / 0.9, abs=1e-12)
    assert c["p2"].profit == pytest.approx(9 - math.log(10), abs=1e-12)
    assert c["p3"].price == 7.0
    assert c["p3"].profit == pytest.approx(7 * (1 - math.exp(-(W + 3))), abs=1e-12)
    assert c["p4"].price == pytest.approx(8 - math.log(8) / (7 / 8), abs=1e-12)
    assert c["p4"].profit == pytest.approx(7 - math.log(8), abs=1e-12)
    assert all(x.relevant for x in c.values())
    assert c["p2"].price == pytest.approx(7.44157, abs=1e-5)
    assert c["p4"].price == pytest.approx(5.62349, abs=1e-5)


def test_candidate_availability():
    assert set(candidate_prices(2.0, 3.0)) == {"p2"}
    c = candidate_prices(5.0, 2.0)
    assert not c["p4"].relevant
    with pytest.raises(DomainError):
        candidate_prices(0.5, 1.0)


def test_candidate_profits_match_curve():
    # Each closed-form profit equals the profit of the rates at that price.
    for v, k in ((10.0, 2.0), (40.0, 1.0), (150.0, 3.0)):
        for cand in candidate_prices(v, k).values():
            if cand.relevant:
                assert profit_oracle(v, k, cand.price) == pytest.approx(cand.profit, abs=1e-9)


def test_f_and_v_f():
    assert f_func(2.0, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert f_func(10.0, 1.0) == pytest.approx((1 - 5) * W_REF[1.0] - math.log(9), abs=1e-14)
    assert f_func(10.0, 1.0) == pytest.approx(-0.5717, abs=1e-4)
    assert f_func(20.0, 1.0) == pytest.approx(0.7130, abs=1e-3)
    for k, vf in VF_REF.items():
        assert v_f_of_k(k) == pytest.approx(vf, abs=1e-8)
    with pytest.raises(DomainError):
        f_func(1.0, 1.0)
    with pytest.raises(DomainError):
        v_f_of_k(0.0)


def test_v_m_minimizes_f():
    for k in (0.5, 2.0, 6.0):
        vm = v_m_of_k(k)
        h = 1e-4 * vm
        assert f_func(vm, k) < f_func(vm - h, k)
        assert f_func(vm, k) < f_func(vm + h, k)


@pytest.mark.parametrize("k", [0.1, 0.5, 1.0, 2.0, 5.0, 10.0])
def test_constants_chain(k):
    pc = pricing_constants(k)
    assert -1.0 < pc.W < 0.0
    assert pc.W * math.exp(pc.W) == pytest.approx(-(k + 1) * math.exp(-(k + 1)), abs=1e-15)
    assert k + 1 < pc.v_m <= pc.v_f
    assert pc.late_threshold <= pc.v_f
    assert pc.v_f >= k + pc.u


def test_optimal_price_cases():
    s = optimal_price(0.5, 1.0)
    assert s.case == 1 and s.pi_star == 0.0 and s.price_arbitrary and s.p_star == 0.5

    s = optimal_price(10.0, 2.0)
    assert s.case == 2
    assert s.p_star == pytest.approx(7.44157212, abs=1e-8)
    assert s.pi_star == pytest.approx(9 - math.log(10), abs=1e-12)
    assert s.profile.lambda1 == pytest.approx(math.log(10), abs=1e-14)

    s = optimal_price(30.0, 2.0)
    assert s.case == 3 and s.p_star == 27.0
    assert s.pi_star == pytest.approx(27 * (1 - math.exp(-(W_REF[2.0] + 3))), abs=1e-11)
    assert s.pi_star == pytest.approx(25.394, abs=2e-3)

    s = optimal_price(90.0, 2.0)
    assert s.case == 4
    assert s.p_star == pytest.approx(88 - math.log(88) / (1 - 1 / 88), abs=1e-12)
    assert s.pi_star == pytest.approx(87 - math.log(88), abs=1e-12)


def test_case_ties_go_to_lower_case():
    k = 2.0
    assert optimal_price(late_threshold(k), k).case == 2
    assert optimal_price(v_f_of_k(k), k).case == 3
    assert optimal_price(1.0, k).case == 2


def test_zero_penalty():
    assert optimal_price(1.0, 0.0).case == 2
    s = optimal_price(5.0, 0.0)
    assert s.case == 4
    assert s.pi_star == pytest.approx(single_period_profit(5.0))


def test_optimum_realizes_its_profit():
    rng = np.random.default_rng(12)
    for v, k in zip(rng.uniform(0.5, 200, 300), rng.uniform(0.1, 10, 300)):
        s = optimal_price(float(v), float(k))
        assert s.pi_star == pytest.approx(firm_profit(s.p_star, s.profile), abs=1e-9)
        assert s.pi_star == pytest.approx(profit_oracle(float(v), float(k), s.p_star), abs=1e-9)


def test_brute_force_grid():
    rng = np.random.default_rng(13)
    for v, k in zip(rng.uniform(0.5, 200, 60), rng.uniform(0.1, 10, 60)):
        v, k = float(v), float(k)
        s = optimal_price(v, k)
        p = np.linspace(0, v, 4001)
        prof = np.array([profit_oracle(v, k, x) for x in p])
        assert prof.max() <= s.pi_star + 1e-9
        if s.case > 1:
            assert abs(p[np.argmax(prof)] - s.p_star) <= p[1] - p[0]


def test_profit_curve_shape():
    p, region, prof = profit_curve(10.0, 2.0, 2001)
    assert p[0] == 0.0 and p[-1] == 10.0
    assert prof[-1] == 0.0
    assert np.all(prof[region == RegionId.NO_ARRIVALS] == 0.0)
    i = int(np.argmax(prof))
    assert region[i] == RegionId.LATE_ONLY
    assert prof[i] == pytest.approx(9 - math.log(10), abs=1e-5)
    with pytest.raises(ValueError):
        profit_curve(10.0, 2.0, 1)


@pytest.mark.parametrize("v,k", [(10.0, 2.0), (30.0, 2.0), (60.0, 5.0), (20.0, 0.5)])
def test_profit_increases_across_region3(v, k):
    p, region, prof = profit_curve(v, k, 5001)
    seg = prof[region == RegionId.BOTH]
    assert seg.size > 2
    assert np.all(np.diff(seg) > 0)


def test_early_only_price_lands_in_its_region():
    for k in (0.5, 2.0, 5.0):
        u = u_of_k(k)
        for v in np.linspace(k + u, k + u + 100, 50):
            p4 = candidate_prices(float(v), k)["p4"].price
            assert -1e-12 <= p4 <= v - u + 1e-12


def test_single_period_profit():
    assert single_period_profit(0.5) == 0.0
    assert single_period_profit(1.0) == 0.0
    assert single_period_profit(10.0) == pytest.approx(9 - math.log(10))
    assert single_period_profit(10.0) == optimal_price(10.0, 2.0).pi_star
    with pytest.raises(DomainError):
        single_period_profit(-1.0)


def test_finite_border_prices():
    c, K, V = 0.2, 0.4, 1.5
    borders = finite_border_prices(c, K, V, num=60)
    assert borders
    prices = [b.price for b in borders]
    assert prices == sorted(prices)
    for b in borders:
        assert b.types_below != b.types_above
        assert 0 <= b.price <= V
    # All-late appears once early arrival stops paying against it
    # (V - P = eK) and disappears once late arrival stops covering c.
    assert borders[0].price == pytest.approx(V - math.e * K, abs=1e-8)
    assert 7 in borders[0].types_above and 7 not in borders[0].types_below
    assert any(abs(x - (V - c / (1 - math.exp(-1)))) < 1e-8 for x in prices)
    # Between consecutive borders the set is constant and matches both labels.
    for left, right in zip(borders, borders[1:]):
        mid = 0.5 * (left.price + right.price)
        types = tuple(int(r.etype) for r in find_equilibria(MarketParams(c=c, K=K, V=V, P=mid)))
        assert types == left.types_above == right.types_below
