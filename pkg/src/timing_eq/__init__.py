"""Equilibria of a two-period arrival-timing game with Poisson demand.

Consumers choose whether to shop early (paying a penalty for buying before
their ideal period), shop late (risking a stockout) or stay home.  The package
solves the finite-pool game, gives closed-form rates for unbounded demand,
finds the firm's optimal price and checks all of it by simulation.
"""
from .errors import ConvergenceError, DomainError, RegionError
from .finite import (
    EquilibriumRecord,
    EquilibriumType,
    check_equilibrium,
    classify_ck,
    classify_vk,
    find_equilibria,
)
from .infinite import (
    RegionId,
    classify_region,
    lambda0_closed_form,
    lambda1_region2,
    lambda1_region3,
    rates_on_grid,
    solve_rates,
    u_of_k,
)
from .lambert import LambertConfig, a_func, lambert_w0, lambert_w0_derivative, r_func
from .model import (
    UNBOUNDED,
    ArrivalProfile,
    MarketParams,
    MixedStrategy,
    NormalizedMarket,
    Utilities,
    ck_market,
    expected_utilities,
    firm_profit,
    social_welfare,
    social_welfare_single_period,
    social_welfare_two_period,
    socially_optimal_rate,
    vk_market,
)
from .pricing import (
    PricingConstants,
    PricingSolution,
    candidate_prices,
    f_func,
    finite_border_prices,
    optimal_price,
    pricing_constants,
    profit_curve,
    single_period_profit,
    v_f_of_k,
    w_const,
)
from .simulate import (
    Certificate,
    SimConfig,
    SimEstimate,
    certify_finite,
    certify_unbounded,
    deviation_payoffs,
    simulate_market,
)

__version__ = "0.1.0"
