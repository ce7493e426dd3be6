"""Monte Carlo market simulator used as an independent check on the closed forms.

Each replication plays one selling season.  A Poisson population is drawn,
every consumer independently picks period 0, period 1 or staying home, and the
single unit goes to a uniformly chosen period-0 arrival, or failing that to a
uniformly chosen period-1 arrival.  One extra tagged consumer rides along and
records what arriving in each period would have paid.

Randomness comes from Philox streams spawned per fixed-size block of
replications, and every draw is an inverse-CDF transform of a uniform.  That
keeps results identical whether blocks run serially or on worker threads, and
makes antithetic pairs a matter of mirroring the uniforms.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom, poisson

from .errors import DomainError
from .model import ArrivalProfile, MarketParams, MixedStrategy

BLOCK_SIZE = 1 << 14
SEED_ENV = "TIMING_EQ_SEED"
_FALLBACK_SEED = 20240601
_U_EPS = 2.0 ** -53

# Uniform columns per replication.
_N_POP, _N_EARLY, _N_LATE, _ALLOC = range(4)


def default_seed() -> int:
    """Seed from ``TIMING_EQ_SEED`` if set, else a fixed constant."""
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return _FALLBACK_SEED
    try:
        seed = int(raw, 0)
    except ValueError as exc:
        raise ValueError(f"{SEED_ENV} must be an integer, got {raw!r}") from exc
    if not 0 <= seed < 2 ** 64:
        raise ValueError(f"{SEED_ENV} must fit in 64 unsigned bits")
    return seed


@dataclass(frozen=True)
class SimConfig:
    replications: int
    seed: int = None
    antithetic: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.seed is None:
            object.__setattr__(self, "seed", default_seed())
        if int(self.replications) != self.replications or self.replications < 1:
            raise ValueError("replications must be a positive integer")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.antithetic and self.replications % 2:
            raise ValueError("antithetic sampling needs an even replication count")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class SimEstimate:
    mean: float
    std_error: float
    n: int

    def within(self, value: float, n_se: float = 3.0) -> bool:
        """True when ``value`` lies within ``n_se`` standard errors of the mean."""
        return abs(self.mean - value) <= n_se * self.std_error + 1e-12 * max(1.0, abs(value))


def _uniforms(cfg: SimConfig, width: int):
    """Per-block uniform matrices of shape (block_reps, width), in block order."""
    base = cfg.replications // 2 if cfg.antithetic else cfg.replications
    n_blocks = -(-base // BLOCK_SIZE)
    children = np.random.SeedSequence(cfg.seed).spawn(n_blocks)
    for i, child in enumerate(children):
        m = min(BLOCK_SIZE, base - i * BLOCK_SIZE)
        u = np.random.Generator(np.random.Philox(child)).random((m, width))
        if cfg.antithetic:
            u = np.vstack([u, 1.0 - u])
        yield np.clip(u, _U_EPS, 1.0 - _U_EPS)


def _run_blocks(fn, cfg: SimConfig, width: int) -> dict[str, np.ndarray]:
    blocks = list(_uniforms(cfg, width))
    if cfg.workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(fn, blocks))
    else:
        parts = [fn(u) for u in blocks]
    if cfg.antithetic:
        # Average each pair so the standard error sees independent draws.
        pairs = []
        for part in parts:
            m = len(next(iter(part.values()))) // 2
            pairs.append({k: 0.5 * (a[:m] + a[m:]) for k, a in part.items()})
        parts = pairs
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}


def _estimate(samples: np.ndarray, n: int) -> SimEstimate:
    mean = float(np.mean(samples))
    se = float(np.std(samples, ddof=1) / math.sqrt(len(samples))) if len(samples) > 1 else 0.0
    return SimEstimate(mean, se, n)


def _poisson(u, mu):
    if mu <= 0.0:
        return np.zeros(u.shape, dtype=np.int64)
    return poisson.ppf(u, mu).astype(np.int64)


def _binomial(u, n, q):
    if q <= 0.0:
        return np.zeros(u.shape, dtype=np.int64)
    if q >= 1.0:
        return n.copy()
    return binom.ppf(u, n, q).astype(np.int64)


def _tagged(params: MarketParams, n0, n1, ua):
    """Payoffs to a tagged consumer facing n0 early and n1 late competitors."""
    win0 = ua * (n0 + 1) < 1.0
    win1 = (n0 == 0) & (ua * (n1 + 1) < 1.0)
    arrive0 = -params.c + params.net_early * win0
    arrive1 = -params.c + params.net_late * win1
    return arrive0, arrive1


def _market_block(params: MarketParams, strategy: MixedStrategy):
    q0, q1 = strategy.q0, strategy.q1
    q1_cond = 0.0 if q0 >= 1.0 else min(1.0, q1 / (1.0 - q0))

    def block(u):
        pop = _poisson(u[:, _N_POP], params.lam)
        n0 = _binomial(u[:, _N_EARLY], pop, q0)
        n1 = _binomial(u[:, _N_LATE], pop - n0, q1_cond)
        sold0 = n0 > 0
        sold1 = ~sold0 & (n1 > 0)
        welfare = params.net_early * sold0 + params.net_late * sold1 - params.c * (n0 + n1)
        profit = params.P * (sold0 | sold1)
        a0, a1 = _tagged(params, n0, n1, u[:, _ALLOC])
        return {"u0": a0, "u1": a1, "profit": profit, "welfare": welfare}

    return block


def _sample_market(params, strategy, cfg):
    if params.unbounded:
        raise DomainError("simulate_market needs a finite pool; use deviation_payoffs for unbounded demand")
    return _run_blocks(_market_block(params, strategy), cfg, 4)


def simulate_market(params: MarketParams, strategy: MixedStrategy, cfg: SimConfig) -> dict[str, SimEstimate]:
    """Play ``cfg.replications`` seasons with every consumer using ``strategy``.

    ``u0`` and ``u1`` are the tagged consumer's payoffs from arriving early or
    late, ``profit`` is the firm's revenue and ``welfare`` the summed payoff of
    the population (the price is a transfer and does not enter it).
    """
    samples = _sample_market(params, strategy, cfg)
    return {k: _estimate(v, cfg.replications) for k, v in samples.items()}


def _deviation_block(params: MarketParams, rates: ArrivalProfile):
    def block(u):
        n0 = _poisson(u[:, 0], rates.lambda0)
        n1 = _poisson(u[:, 1], rates.lambda1)
        a0, a1 = _tagged(params, n0, n1, u[:, 2])
        return {"arrive0": a0, "arrive1": a1}

    return block


def _sample_deviation(rates, params, cfg):
    return _run_blocks(_deviation_block(params, rates), cfg, 3)


def deviation_payoffs(rates: ArrivalProfile, params: MarketParams, cfg: SimConfig) -> dict[str, SimEstimate]:
    """Tagged-consumer payoffs against Poisson competitor counts at the given rates.

    This does not need a population size, so it also covers unbounded demand.
    """
    samples = _sample_deviation(rates, params, cfg)
    return {k: _estimate(v, cfg.replications) for k, v in samples.items()}


@dataclass(frozen=True)
class Certificate:
    """Estimated gain from each unilateral deviation, with a 3-SE verdict."""
    gains: dict[str, SimEstimate]
    n_se: float = 3.0

    @property
    def passed(self) -> bool:
        return all(g.mean <= self.n_se * g.std_error + 1e-12 for g in self.gains.values())

    @property
    def worst(self) -> float:
        """Largest gain measured in standard errors (inf when a certain gain has zero spread)."""
        out = -math.inf
        for g in self.gains.values():
            if g.std_error > 0:
                out = max(out, g.mean / g.std_error)
            elif g.mean > 1e-12:
                return math.inf
        return out


def _gains(a0, a1, q0, q1, n, n_se):
    # Equilibrium payoff per replication under the mixed strategy; staying
    # home is worth 0.
    eq = q0 * a0 + q1 * a1
    gains = {"arrive0": a0 - eq, "arrive1": a1 - eq, "stay_out": -eq}
    return Certificate({k: _estimate(v, n) for k, v in gains.items()}, n_se)


def certify_finite(params: MarketParams, profile: ArrivalProfile, cfg: SimConfig,
                   n_se: float = 3.0) -> Certificate:
    """Best-response check for a finite-pool profile using the population simulator."""
    strategy = profile.strategy(params.lam)
    s = _sample_market(params, strategy, cfg)
    return _gains(s["u0"], s["u1"], strategy.q0, strategy.q1, cfg.replications, n_se)


def certify_unbounded(params: MarketParams, profile: ArrivalProfile, cfg: SimConfig,
                      n_se: float = 3.0) -> Certificate:
    """Best-response check with unbounded demand.

    Someone always stays home, so the equilibrium payoff is 0 and the gains
    are the raw arrival payoffs.
    """
    s = _sample_deviation(profile, params, cfg)
    zero = np.zeros_like(s["arrive0"])
    gains = {"arrive0": s["arrive0"], "arrive1": s["arrive1"], "stay_out": zero}
    return Certificate({k: _estimate(v, cfg.replications) for k, v in gains.items()}, n_se)
