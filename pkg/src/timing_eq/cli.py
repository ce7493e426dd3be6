"""Command-line front end.

Single solutions are printed as JSON, curves and sweeps as CSV.  Numbers are
rounded to ``--digits`` significant digits (9 by default).  Exit status is 0
on success, 2 for bad input and 3 when a solver fails to converge; errors are
written to stderr as a JSON object.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import finite, infinite, model, pricing, simulate, verify
from .errors import ConvergenceError
from .model import ArrivalProfile, MarketParams, MixedStrategy, NormalizedMarket

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGENCE = 0, 2, 3


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Formatting
# ---------------------------------------------------------------------------

def round_sig(x: float, digits: int) -> float:
    return float(f"{x:.{digits}g}")


def _clean(obj, digits):
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return round_sig(x, digits)
    if isinstance(obj, dict):
        return {str(k): _clean(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v, digits) for v in obj]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _emit_json(obj, digits, out):
    out.write(json.dumps(_clean(obj, digits), indent=2) + "\n")


def _emit_csv(header, rows, digits, out):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([f"{x:.{digits}g}" if isinstance(x, float) else x for x in row])
    out.write(buf.getvalue())


def _profile(p: ArrivalProfile):
    return {"lambda0": p.lambda0, "lambda1": p.lambda1}


def _utilities(u):
    return {"u0": u.u0, "u1": u.u1}


def _estimate(e: simulate.SimEstimate):
    return {"mean": e.mean, "std_error": e.std_error, "n": e.n}


def _positive_int(text):
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return n


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def infinite_solution(nm: NormalizedMarket) -> dict:
    region = infinite.classify_region(nm)
    prof = infinite.solve_rates(nm)
    return {
        "v": nm.v, "k": nm.k, "p": nm.p,
        "region": int(region),
        "rates": _profile(prof),
        "utilities": _utilities(model.normalized_utilities(nm, prof)),
        "profit": model.firm_profit(nm.p, prof),
        "welfare": model.social_welfare_two_period(nm, prof),
    }


def finite_solution(params: MarketParams) -> dict:
    recs = finite.find_equilibria(params)
    return {
        "params": {"c": params.c, "K": params.K, "V": params.V, "P": params.P, "lambda": params.lam},
        "equilibria": [
            {
                "type": int(r.etype),
                "rates": _profile(r.profile),
                "utilities": _utilities(r.utilities),
                "residual": r.residual,
                "profit": model.firm_profit(params.P, r.profile),
                "welfare": model.social_welfare(params, r.profile),
            }
            for r in recs
        ],
    }


def _cmd_solve_finite(args, out):
    params = MarketParams(c=args.c, K=args.K, V=args.V, P=args.P, lam=args.lam)
    if params.unbounded:
        res = infinite_solution(params.normalized())
        res["unit"] = "search cost"
    else:
        res = finite_solution(params)
    _emit_json(res, args.digits, out)


def _cmd_solve_infinite(args, out):
    _emit_json(infinite_solution(NormalizedMarket(args.v, args.k, args.p)), args.digits, out)


def price_solution(v: float, k: float) -> dict:
    sol = pricing.optimal_price(v, k)
    res = {
        "v": v, "k": k,
        "case": sol.case,
        "p_star": sol.p_star,
        "pi_star": sol.pi_star,
        "price_arbitrary": sol.price_arbitrary,
        "rates": _profile(sol.profile),
        "single_period_profit": pricing.single_period_profit(v),
    }
    if v >= 1.0:
        res["candidates"] = {
            c.label: {"price": c.price, "profit": c.profit, "relevant": bool(c.relevant)}
            for c in pricing.candidate_prices(v, k).values()
        }
    if k > 0:
        pc = pricing.pricing_constants(k)
        res["constants"] = {"W": pc.W, "u": pc.u, "v_m": pc.v_m, "v_f": pc.v_f,
                            "late_threshold": pc.late_threshold}
    return res


def _cmd_price(args, out):
    _emit_json(price_solution(args.v, args.k), args.digits, out)


def _cmd_profit_curve(args, out):
    p, region, profit = pricing.profit_curve(args.v, args.k, args.points)
    rows = [(float(a), int(r), float(b)) for a, r, b in zip(p, region, profit)]
    _emit_csv(["p", "region", "profit"], rows, args.digits, out)


def _cmd_border_prices(args, out):
    borders = pricing.finite_border_prices(args.c, args.K, args.V, args.lam, num=args.num)
    _emit_json({"borders": [
        {"price": b.price, "types_below": list(b.types_below), "types_above": list(b.types_above),
         "profits_below": b.profits_below}
        for b in borders
    ]}, args.digits, out)


# Sweep planes: axis names and the function that labels one grid point.
_PLANES = {
    "ck": ("c", "K"),
    "vk": ("V", "K"),
    "vk-infinite": ("v", "k"),
}


@dataclass(frozen=True)
class Axis:
    name: str
    min: float
    max: float
    steps: int

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 2:
            raise UsageError(f"axis {self.name}: steps must be an integer >= 2")
        if not self.min < self.max:
            raise UsageError(f"axis {self.name}: min must be below max")

    def values(self):
        return np.linspace(self.min, self.max, int(self.steps))


@dataclass(frozen=True)
class SweepSpec:
    axis1: Axis
    axis2: Axis
    fixed: dict


def load_sweep_spec(path: str, plane: str) -> SweepSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read sweep spec {path}: {exc}") from exc
    try:
        axes = [Axis(str(a["name"]), float(a["min"]), float(a["max"]), a["steps"]) for a in (raw["axis1"], raw["axis2"])]
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"malformed axis in {path}: {exc}") from exc
    want = _PLANES[plane]
    if tuple(a.name for a in axes) != want:
        raise UsageError(f"plane {plane} needs axes {want[0]} and {want[1]}, got {axes[0].name} and {axes[1].name}")
    fixed = raw.get("fixed", {})
    if not isinstance(fixed, dict):
        raise UsageError("'fixed' must be an object")
    return SweepSpec(axes[0], axes[1], fixed)


def _labels(types) -> str:
    return " ".join(str(int(t)) for t in sorted(types))


def sweep_rows(plane: str, spec: SweepSpec, solve: bool = False, workers: int = 1):
    """Rows (i, j, x, y, label) over the grid, ordered by grid index."""
    xs, ys = spec.axis1.values(), spec.axis2.values()
    points = [(i, j, float(x), float(y)) for j, y in enumerate(ys) for i, x in enumerate(xs)]

    if plane == "ck":
        def label(pt):
            _, _, c, K = pt
            if c <= 0:
                return ""
            if solve:
                return _labels(r.etype for r in finite.find_equilibria(model.ck_market(c, K)))
            return _labels(finite.classify_ck(c, K))
    elif plane == "vk":
        def label(pt):
            _, _, V, K = pt
            if solve:
                return _labels(r.etype for r in finite.find_equilibria(model.vk_market(V, K)))
            return _labels(finite.classify_vk(V, K))
    else:
        p = float(spec.fixed.get("p", 0.0))

        def label(pt):
            _, _, v, k = pt
            return str(int(infinite.classify_region(NormalizedMarket(v, k, p))))

    if workers > 1:
        # map keeps input order, so rows come out in grid order regardless of scheduling.
        with ThreadPoolExecutor(max_workers=workers) as pool:
            labels = list(pool.map(label, points))
    else:
        labels = [label(pt) for pt in points]
    names = _PLANES[plane]
    header = ["i", "j", names[0], names[1], "types" if plane != "vk-infinite" else "region"]
    return header, [pt + (lab,) for pt, lab in zip(points, labels)]


def _cmd_sweep(args, out):
    spec = load_sweep_spec(args.spec, args.plane)
    header, rows = sweep_rows(args.plane, spec, solve=args.solve, workers=args.workers)
    _emit_csv(header, rows, args.digits, out)


_SCENARIO_KEYS = {"c", "K", "V", "P", "lambda", "q0", "q1", "lambda0", "lambda1"}


def load_scenario(path: str) -> dict[str, float]:
    """Flat ``key = value`` file; blank lines and ``#`` comments are ignored."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read scenario {path}: {exc}") from exc
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key = key.strip()
        if not sep or key not in _SCENARIO_KEYS:
            raise UsageError(f"{path}:{n}: expected one of {sorted(_SCENARIO_KEYS)} as key = value")
        try:
            out[key] = float(val.strip())
        except ValueError as exc:
            raise UsageError(f"{path}:{n}: {val.strip()!r} is not a number") from exc
    for key in ("c", "K", "V"):
        if key not in out:
            raise UsageError(f"scenario is missing {key}")
    return out


def simulate_scenario(sc: dict, cfg: simulate.SimConfig) -> dict:
    params = MarketParams(c=sc["c"], K=sc["K"], V=sc["V"], P=sc.get("P", 0.0), lam=sc.get("lambda", 1.0))
    res = {"replications": cfg.replications, "seed": cfg.seed, "antithetic": cfg.antithetic}
    if params.unbounded or "lambda0" in sc or "lambda1" in sc:
        if "q0" in sc or "q1" in sc:
            raise UsageError("give either q0/q1 (finite pool) or lambda0/lambda1 (tagged consumer), not both")
        rates = ArrivalProfile(sc.get("lambda0", 0.0), sc.get("lambda1", 0.0))
        est = simulate.deviation_payoffs(rates, params, cfg)
        exact = model.expected_utilities(params, rates)
        res["mode"] = "tagged"
        res["estimates"] = {k: _estimate(v) for k, v in est.items()}
        res["analytic"] = {"arrive0": exact.u0, "arrive1": exact.u1}
        return res
    strategy = MixedStrategy(sc.get("q0", 0.0), sc.get("q1", 0.0))
    est = simulate.simulate_market(params, strategy, cfg)
    prof = strategy.rates(params.lam)
    exact = model.expected_utilities(params, prof)
    res["mode"] = "market"
    res["estimates"] = {k: _estimate(v) for k, v in est.items()}
    res["analytic"] = {"u0": exact.u0, "u1": exact.u1, "profit": model.firm_profit(params.P, prof),
                       "welfare": model.social_welfare(params, prof)}
    return res


def _cmd_simulate(args, out):
    sc = load_scenario(args.scenario)
    cfg = simulate.SimConfig(args.reps, seed=args.seed, antithetic=args.antithetic, workers=args.workers)
    _emit_json(simulate_scenario(sc, cfg), args.digits, out)


def _cmd_verify(args, out):
    results = verify.run_all(echo=lambda line: (out.write(line + "\n"), out.flush()))
    passed = sum(r.passed for r in results)
    out.write(f"{passed}/{len(results)} checks passed\n")
    return EXIT_OK if passed == len(results) else 1


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _float(text):
    try:
        return float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="timing-eq", description="Arrival-timing equilibria, pricing and simulation.")
    ap.add_argument("--digits", type=_positive_int, default=9, help="significant digits in output (default 9)")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve-finite", help="all equilibria of the finite-pool game")
    s.add_argument("--c", type=_float, required=True)
    s.add_argument("--K", type=_float, required=True)
    s.add_argument("--V", type=_float, required=True)
    s.add_argument("--P", type=_float, default=0.0)
    s.add_argument("--lambda", dest="lam", type=_float, default=1.0, help="pool intensity, or inf")
    s.set_defaults(func=_cmd_solve_finite)

    s = sub.add_parser("solve-infinite", help="region and rates with unbounded demand (units of c)")
    s.add_argument("--v", type=_float, required=True)
    s.add_argument("--k", type=_float, required=True)
    s.add_argument("--p", type=_float, default=0.0)
    s.set_defaults(func=_cmd_solve_infinite)

    s = sub.add_parser("price", help="profit-maximizing price with unbounded demand")
    s.add_argument("--v", type=_float, required=True)
    s.add_argument("--k", type=_float, required=True)
    s.set_defaults(func=_cmd_price)

    s = sub.add_parser("profit-curve", help="profit against price as CSV")
    s.add_argument("--v", type=_float, required=True)
    s.add_argument("--k", type=_float, required=True)
    s.add_argument("--points", type=_positive_int, default=1000)
    s.set_defaults(func=_cmd_profit_curve)

    s = sub.add_parser("border-prices", help="finite-pool prices where the equilibrium set changes")
    s.add_argument("--c", type=_float, required=True)
    s.add_argument("--K", type=_float, required=True)
    s.add_argument("--V", type=_float, required=True)
    s.add_argument("--lambda", dest="lam", type=_float, default=1.0)
    s.add_argument("--num", type=_positive_int, default=400, help="scan cells before refinement")
    s.set_defaults(func=_cmd_border_prices)

    s = sub.add_parser("sweep", help="label a parameter grid, as CSV")
    s.add_argument("--plane", choices=sorted(_PLANES), required=True)
    s.add_argument("--spec", required=True, help="JSON file with axis1, axis2 and fixed")
    s.add_argument("--solve", action="store_true", help="label with the equilibrium solver instead of the region map")
    s.add_argument("--workers", type=_positive_int, default=1)
    s.set_defaults(func=_cmd_sweep)

    s = sub.add_parser("simulate", help="Monte Carlo estimates for a scenario file")
    s.add_argument("--scenario", required=True)
    s.add_argument("--reps", type=_positive_int, default=100_000)
    s.add_argument("--seed", type=int, default=None, help=f"defaults to ${simulate.SEED_ENV}")
    s.add_argument("--antithetic", action="store_true")
    s.add_argument("--workers", type=_positive_int, default=1)
    s.set_defaults(func=_cmd_simulate)

    s = sub.add_parser("verify", help="run the acceptance checks")
    s.set_defaults(func=_cmd_verify)
    return ap


def _fail(kind, exc, code, err):
    payload = {"error": kind, "message": str(exc)}
    diag = getattr(exc, "diagnostics", None)
    if diag:
        payload["diagnostics"] = _clean(diag, 17)
    err.write(json.dumps(payload) + "\n")
    return code


def main(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    args = build_parser().parse_args(argv)
    try:
        code = args.func(args, out)
    except ConvergenceError as exc:
        return _fail("ConvergenceError", exc, EXIT_NONCONVERGENCE, err)
    except ValueError as exc:
        return _fail(type(exc).__name__, exc, EXIT_USAGE, err)
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
