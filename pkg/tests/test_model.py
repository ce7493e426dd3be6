import math

import numpy as np
import pytest

from timing_eq.model import (
    ArrivalProfile,
    MarketParams,
    MixedStrategy,
    NormalizedMarket,
    ck_market,
    expected_utilities,
    firm_profit,
    normalized_utilities,
    social_welfare,
    social_welfare_single_period,
    social_welfare_two_period,
    socially_optimal_rate,
    survival_ratio,
)

EX1 = ck_market(0.2, 0.4)


def test_params_validation():
    with pytest.raises(ValueError):
        MarketParams(c=0.0, K=0.1, V=1.0)
    with pytest.raises(ValueError):
        MarketParams(c=1.0, K=-0.1, V=1.0)
    with pytest.raises(ValueError):
        MarketParams(c=1.0, K=0.1, V=1.0, P=-1.0)
    with pytest.raises(ValueError):
        MarketParams(c=1.0, K=0.1, V=1.0, lam=0.0)
    assert MarketParams(c=1.0, K=0.0, V=1.0, lam=math.inf).unbounded


def test_normalization_round_trip():
    p = MarketParams(c=0.5, K=1.0, V=5.0, P=2.0)
    nm = p.normalized()
    assert (nm.v, nm.k, nm.p) == (10.0, 2.0, 4.0)
    assert nm.v1 == 6.0 and nm.v0 == 4.0
    back = nm.to_params()
    assert back.unbounded and back.c == 1.0


def test_profile_and_strategy_validation():
    with pytest.raises(ValueError):
        ArrivalProfile(-0.1, 0.0)
    with pytest.raises(ValueError):
        ArrivalProfile(math.inf, 0.0)
    with pytest.raises(ValueError):
        MixedStrategy(0.6, 0.5)
    s = ArrivalProfile(0.3, 0.6).strategy(2.0)
    assert (s.q0, s.q1) == (0.15, 0.3)
    assert s.q_out == pytest.approx(0.55)


def test_utilities_without_competition():
    u = expected_utilities(EX1, ArrivalProfile(0.0, 0.0))
    assert u.u0 == pytest.approx(0.4)
    assert u.u1 == pytest.approx(0.8)


def test_late_utility_against_unit_rate():
    u = expected_utilities(EX1, ArrivalProfile(0.0, 1.0))
    assert u.u1 == pytest.approx(1 - math.exp(-1) - 0.2, rel=1e-14)
    assert u.u1 == pytest.approx(0.43212055882855767, rel=1e-14)


def test_example3_mixed_point_rounded():
    u = expected_utilities(ck_market(0.4, 0.4), ArrivalProfile(0.63, 0.37))
    assert abs(u.u0 - u.u1) < 1e-2


def test_normalized_utilities_scale():
    params = MarketParams(c=0.5, K=1.0, V=5.0, P=2.0)
    prof = ArrivalProfile(0.7, 0.4)
    raw = expected_utilities(params, prof)
    norm = normalized_utilities(params.normalized(), prof)
    assert norm.u0 == pytest.approx(raw.u0 / params.c)
    assert norm.u1 == pytest.approx(raw.u1 / params.c)


def test_survival_ratio_series_continuity():
    x = np.linspace(0.0, 1e-6, 101)
    series = 1 - x / 2 + x ** 2 / 6 - x ** 3 / 24
    assert np.max(np.abs(survival_ratio(x) - series)) <= 1e-10
    # No seam where the series hands over to the direct formula.
    left, right = survival_ratio(1e-6 * (1 - 1e-9)), survival_ratio(1e-6 * (1 + 1e-9))
    assert abs(left - right) < 1e-14
    assert survival_ratio(0.0) == 1.0
    assert isinstance(survival_ratio(0.5), float)


def test_utilities_continuous_at_zero():
    for lam in np.linspace(0.0, 1e-6, 21):
        u = expected_utilities(EX1, ArrivalProfile(lam, lam))
        assert u.u0 == pytest.approx(-0.2 + 0.6 * (1 - lam / 2), abs=1e-10)
        assert u.u1 == pytest.approx(-0.2 + (1 - lam) * (1 - lam / 2), abs=1e-10)


def test_utilities_monotone():
    grid = np.linspace(0.0, 5.0, 200)
    u1_in_x = [expected_utilities(EX1, ArrivalProfile(x, 0.7)).u1 for x in grid]
    u1_in_y = [expected_utilities(EX1, ArrivalProfile(0.7, y)).u1 for y in grid]
    u0_in_x = [expected_utilities(EX1, ArrivalProfile(x, 0.7)).u0 for x in grid]
    assert np.all(np.diff(u1_in_x) < 0)
    assert np.all(np.diff(u1_in_y) < 0)
    assert np.all(np.diff(u0_in_x) < 0)


def test_firm_profit():
    assert firm_profit(5.0, ArrivalProfile(0.0, 0.0)) == 0.0
    assert firm_profit(1.0, ArrivalProfile(400.0, 400.0)) == 1.0
    # Border of Regions 2 and 3 at v = 10, k = 2.
    assert firm_profit(7.0, ArrivalProfile(0.0, 2.8214393721220787)) == pytest.approx(6.583358534, rel=1e-9)
    with pytest.raises(ValueError):
        firm_profit(-1.0, ArrivalProfile(0.0, 1.0))


def test_firm_profit_bounded_by_price():
    rng = np.random.default_rng(4)
    for price, x, y in rng.uniform(0, 10, (200, 3)):
        assert 0.0 <= firm_profit(price, ArrivalProfile(x, y)) <= price


def test_example1_welfare_pure_profiles():
    assert social_welfare(EX1, ArrivalProfile(0.0, 1.0)) == pytest.approx(0.432, abs=1e-3)
    assert social_welfare(EX1, ArrivalProfile(1.0, 0.0)) == pytest.approx(0.179, abs=1e-3)
    assert social_welfare(EX1, ArrivalProfile(0.0, 0.0)) == 0.0


def test_welfare_units():
    params = MarketParams(c=0.2, K=0.4, V=1.0)
    prof = ArrivalProfile(0.3, 0.5)
    assert social_welfare(params, prof) == pytest.approx(
        params.c * social_welfare_two_period(params.normalized(), prof))


def test_single_period_welfare():
    nm = NormalizedMarket(v=math.e, k=1.0)
    assert social_welfare_single_period(nm, 0.0) == 0.0
    assert social_welfare_single_period(nm, 1.0) == pytest.approx(math.e - 2.0)
    with pytest.raises(ValueError):
        social_welfare_single_period(nm, -1.0)


def test_socially_optimal_rate_maximizes_single_period_welfare():
    for v1 in (0.5, 1.0, 1.7, math.e, 12.0):
        nm = NormalizedMarket(v=v1 + 0.5, k=0.3, p=0.5)
        y_star = socially_optimal_rate(nm)
        ys = np.linspace(0.0, 6.0, 60001)
        best = ys[np.argmax([social_welfare_single_period(nm, y) for y in ys])]
        assert y_star == pytest.approx(best, abs=2e-4)


def test_package_exports():
    import timing_eq

    sol = timing_eq.optimal_price(10.0, 2.0)
    assert sol.case == 2
    types = [int(r.etype) for r in timing_eq.find_equilibria(timing_eq.ck_market(0.2, 0.4))]
    assert types == [5, 6, 7]
    assert timing_eq.vk_market(2.0, 1.0).c == 1.0
