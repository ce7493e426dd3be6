import math

import numpy as np
import pytest

from timing_eq.errors import DomainError
from timing_eq.finite import find_equilibria
from timing_eq.infinite import solve_rates
from timing_eq.model import (
    ArrivalProfile,
    MarketParams,
    MixedStrategy,
    NormalizedMarket,
    ck_market,
    expected_utilities,
    firm_profit,
    social_welfare,
)
from timing_eq.simulate import (
    SEED_ENV,
    SimConfig,
    SimEstimate,
    certify_finite,
    certify_unbounded,
    default_seed,
    deviation_payoffs,
    simulate_market,
)
from timing_eq.verify import sample_region

EX1 = ck_market(0.2, 0.4)


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(0, seed=1)
    with pytest.raises(ValueError):
        SimConfig(10, seed=-1)
    with pytest.raises(ValueError):
        SimConfig(10, seed=2 ** 64)
    with pytest.raises(ValueError):
        SimConfig(11, seed=1, antithetic=True)
    with pytest.raises(ValueError):
        SimConfig(10, seed=1, workers=0)


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv(SEED_ENV, "12345")
    assert default_seed() == 12345
    assert SimConfig(10).seed == 12345
    monkeypatch.setenv(SEED_ENV, "nope")
    with pytest.raises(ValueError):
        default_seed()
    monkeypatch.delenv(SEED_ENV)
    assert isinstance(default_seed(), int)


def test_nobody_arrives():
    est = simulate_market(EX1, MixedStrategy(0.0, 0.0), SimConfig(2000, seed=1))
    assert est["profit"].mean == 0.0
    assert est["welfare"].mean == 0.0
    # The tagged consumer still faces no competition.
    assert est["u0"].mean == pytest.approx(0.4)
    assert est["u1"].mean == pytest.approx(0.8)


def test_rejects_unbounded_demand():
    params = MarketParams(c=1.0, K=1.0, V=5.0, lam=math.inf)
    with pytest.raises(DomainError):
        simulate_market(params, MixedStrategy(0.5, 0.2), SimConfig(10, seed=1))


def test_example1_welfare_pure_profiles():
    late = simulate_market(EX1, MixedStrategy(0.0, 1.0), SimConfig(10 ** 6, seed=3))["welfare"]
    early = simulate_market(EX1, MixedStrategy(1.0, 0.0), SimConfig(10 ** 6, seed=4))["welfare"]
    assert late.within(social_welfare(EX1, ArrivalProfile(0.0, 1.0)))
    assert early.within(social_welfare(EX1, ArrivalProfile(1.0, 0.0)))
    assert abs(late.mean - 0.432) <= 3 * late.std_error + 5e-4
    assert abs(early.mean - 0.179) <= 3 * early.std_error + 5e-4


def test_deviation_payoffs_without_competition():
    est = deviation_payoffs(ArrivalProfile(0.0, 0.0), EX1, SimConfig(1000, seed=5))
    assert est["arrive0"].mean == pytest.approx(0.4)
    assert est["arrive1"].mean == pytest.approx(0.8)


def test_deviation_payoffs_against_unit_late_rate():
    est = deviation_payoffs(ArrivalProfile(0.0, 1.0), EX1, SimConfig(10 ** 5, seed=6))
    assert est["arrive1"].within(1 - math.exp(-1) - 0.2)


def test_random_pairs_agree_with_closed_forms():
    rng = np.random.default_rng(21)
    misses = 0
    for i in range(20):
        c, K, V, P = rng.uniform(0.1, 0.5), rng.uniform(0.0, 0.6), rng.uniform(0.8, 2.0), rng.uniform(0.0, 0.5)
        lam = rng.uniform(0.3, 3.0)
        q0 = rng.uniform(0, 1)
        q1 = rng.uniform(0, 1 - q0)
        params = MarketParams(c=c, K=K, V=V, P=P, lam=lam)
        strat = MixedStrategy(q0, q1)
        prof = strat.rates(lam)
        u = expected_utilities(params, prof)
        est = simulate_market(params, strat, SimConfig(10 ** 5, seed=1000 + i))
        for name, exact in (("u0", u.u0), ("u1", u.u1), ("profit", firm_profit(P, prof)),
                            ("welfare", social_welfare(params, prof))):
            misses += not est[name].within(exact)
    assert misses == 0


def test_deviation_estimator_is_unbiased_for_finite_rates():
    rng = np.random.default_rng(22)
    for i in range(10):
        params = MarketParams(c=0.3, K=rng.uniform(0, 0.5), V=rng.uniform(1, 3), lam=math.inf)
        rates = ArrivalProfile(rng.uniform(0, 2), rng.uniform(0, 2))
        u = expected_utilities(params, rates)
        est = deviation_payoffs(rates, params, SimConfig(10 ** 5, seed=50 + i))
        assert est["arrive0"].within(u.u0)
        assert est["arrive1"].within(u.u1)


def test_bit_reproducible_and_schedule_independent():
    strat = MixedStrategy(0.3, 0.5)
    cfg = SimConfig(50_000, seed=99)
    a = simulate_market(EX1, strat, cfg)
    b = simulate_market(EX1, strat, cfg)
    c = simulate_market(EX1, strat, SimConfig(50_000, seed=99, workers=3))
    assert a == b == c
    d = simulate_market(EX1, strat, SimConfig(50_000, seed=100))
    assert a != d


def test_antithetic_pairs():
    strat = MixedStrategy(0.3, 0.5)
    cfg = SimConfig(100_000, seed=7, antithetic=True)
    est = simulate_market(EX1, strat, cfg)
    assert est["u0"].n == 100_000
    u = expected_utilities(EX1, strat.rates(1.0))
    assert est["u0"].within(u.u0) and est["u1"].within(u.u1)
    assert simulate_market(EX1, strat, cfg) == est


def test_std_error_definition():
    est = simulate_market(EX1, MixedStrategy(0.0, 1.0), SimConfig(4000, seed=8))["u1"]
    assert isinstance(est, SimEstimate)
    # A Bernoulli payoff scaled by V - P: the SE follows from the mean.
    p = (est.mean + 0.2) / 1.0
    assert est.std_error == pytest.approx(math.sqrt(p * (1 - p) / 4000), rel=1e-3)


@pytest.mark.parametrize("ck", [(0.2, 0.4), (0.4, 0.37), (0.4, 0.4), (0.8, 0.1), (1.2, 0.05)])
def test_finite_equilibria_certified(ck):
    params = ck_market(*ck)
    for i, rec in enumerate(find_equilibria(params)):
        cert = certify_finite(params, rec.profile, SimConfig(10 ** 5, seed=300 + i))
        assert cert.passed, (ck, rec.etype, cert.gains)


@pytest.mark.parametrize("region", [1, 2, 3, 4])
def test_unbounded_equilibria_certified(region):
    rng = np.random.default_rng(400 + region)
    for i, nm in enumerate(sample_region(rng, region, 4)):
        cert = certify_unbounded(nm.to_params(), solve_rates(nm), SimConfig(10 ** 5, seed=500 + i))
        assert cert.passed, (nm, cert.gains)


def test_certification_rejects_a_non_equilibrium():
    # Everyone late while early arrival is worth more.
    params = ck_market(0.2, 0.05)
    cert = certify_finite(params, ArrivalProfile(0.0, 1.0), SimConfig(10 ** 5, seed=9))
    assert not cert.passed
    nm = NormalizedMarket(10.0, 2.0)
    cert = certify_unbounded(nm.to_params(), ArrivalProfile(1.0, 0.0), SimConfig(10 ** 5, seed=10))
    assert not cert.passed
