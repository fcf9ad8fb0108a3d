"""Symmetric Nash equilibrium as a scalar fixed point in aggregate stake.

Given ``D`` every class best-responds in closed form (or by a scalar root find),
so the equilibrium is a root of

    G(D) = sum_theta N_theta * d_theta(D) + fixed blocks - D.

G can have kinks where a class reaches its zero-deposit corner, so the root is
located by a sign scan, narrowed by bisection and polished with Brent's method.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .errors import ConvergenceError
from .issuance import IssuanceSchedule, issuance_yield
from .market import SHORT, MarketConfig, best_response, foc_residual, per_eth_profit, profit

log = logging.getLogger(__name__)

BISECT_RTOL = 1e-6
ABS_TOL = 1.0  # ETH
SCAN_POINTS = 48
D_MIN = 1e-3


@dataclass
class Constraint:
    name: str
    label: str
    slack: float

    @property
    def satisfied(self) -> bool:
        return self.slack >= 0


@dataclass
class Equilibrium:
    labels: list[str]
    populations: list[float]
    deposits: list[float]
    totals: list[float]
    total: float
    shares: list[float]
    profits: list[float]
    per_eth_profits: list[float]
    schedule: str
    iterations: int = 0
    residual: float = 0.0
    corner: str | None = None
    multiple: bool = False
    excluded: list[str] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def total_of(self, label: str) -> float:
        return self.totals[self.index(label)]

    def share_of(self, label: str) -> float:
        return self.shares[self.index(label)]

    def per_eth_profit_of(self, label: str) -> float:
        return self.per_eth_profits[self.index(label)]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["constraints"] = [dict(asdict(c), satisfied=c.satisfied) for c in self.constraints]
        return d

    def rows(self) -> list[dict]:
        """One row per class, with type, population, deposits, share and per-ETH profit columns."""
        return [
            {"type": SHORT[lab], "label": lab, "num": n, "deps": tot, "ratio": sh, "profit": pe}
            for lab, n, tot, sh, pe in zip(self.labels, self.populations, self.totals,
                                           self.shares, self.per_eth_profits)
        ]


def aggregate_gap(config: MarketConfig, total_stake: float, active=None) -> float:
    """G(D): implied aggregate stake minus ``D``."""
    s = 0.0
    for i, c in enumerate(config.classes):
        if active is not None and not active[i]:
            continue
        if c.population:
            s += c.population * best_response(c, total_stake, config)
    return s - total_stake


def _find_root(config, active):
    """Largest sign change of G on [D_MIN, max_supply]; returns (D, iterations, corner, multiple)."""
    g = lambda D: aggregate_gap(config, D, active)
    hi_end = config.max_supply
    grid = np.geomspace(D_MIN, hi_end, SCAN_POINTS)
    vals = [g(D) for D in grid]
    evals = len(grid)
    if vals[0] <= 0:
        return 0.0, evals, "zero", False
    crossings = [i for i in range(len(grid) - 1) if vals[i] > 0 >= vals[i + 1]]
    if not crossings:
        return hi_end, evals, "max_supply", False
    i = crossings[-1]
    lo, hi = grid[i], grid[i + 1]
    if vals[i + 1] == 0:
        return hi, evals, None, len(crossings) > 1
    while hi - lo > BISECT_RTOL * hi:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
        evals += 1
    try:
        root, info = brentq(g, lo, hi, xtol=1e-9, rtol=1e-15, maxiter=200, full_output=True)
    except (RuntimeError, ValueError) as exc:
        raise ConvergenceError(f"refinement failed: {exc}", bracket=(lo, hi)) from exc
    evals += info.function_calls
    if abs(g(root)) >= ABS_TOL:
        raise ConvergenceError(f"|G(D*)| = {abs(g(root)):.3g} ETH above tolerance", bracket=(lo, hi))
    return root, evals, None, len(crossings) > 1


def check_participation(eq: Equilibrium, config: MarketConfig) -> list[Constraint]:
    """Participation constraints: profit >= 0, and techie profit >= retailer profit."""
    out = []
    ref = next((lab for lab in ("retailer", "institution") if lab in eq.labels), None)
    for lab, n, d, pr in zip(eq.labels, eq.populations, eq.deposits, eq.profits):
        c = config.get(lab)
        if not c.attentive or n == 0 or lab in eq.excluded:
            continue
        if lab == "techie" and ref is not None and ref not in eq.excluded:
            out.append(Constraint(f"profit_techie >= profit_{ref}", lab, pr - eq.profits[eq.index(ref)]))
        else:
            out.append(Constraint(f"profit_{lab} >= 0", lab, pr))
    return out


def _assemble(config, D, active, iterations, corner, multiple):
    labels, pops, deps, tots, profs, pes = [], [], [], [], [], []
    for i, c in enumerate(config.classes):
        d = best_response(c, D, config) if (D > 0 and active[i] and c.population > 0) else 0.0
        labels.append(c.label)
        pops.append(c.population)
        deps.append(d)
        tots.append(c.population * d)
        if D > 0 and c.attentive and c.population > 0:
            profs.append(profit(c, min(d, D), D, config))
            pes.append(per_eth_profit(c, min(d, D), D, config))
        else:
            profs.append(0.0 if c.attentive else math.nan)
            pes.append(math.nan)
    D_rep = sum(tots)
    shares = [t / D_rep if D_rep > 0 else 0.0 for t in tots]
    residual = aggregate_gap(config, D, active) if D > 0 else 0.0
    eq = Equilibrium(labels, pops, deps, tots, D_rep if corner != "max_supply" else D, shares,
                     profs, pes, config.schedule.name, iterations, residual, corner, multiple,
                     [c.label for c, a in zip(config.classes, active) if not a])
    eq.constraints = check_participation(eq, config)
    return eq


def solve(config: MarketConfig) -> Equilibrium:
    """Solve the symmetric equilibrium for ``config``.

    With ``config.participation == "enforce"`` classes violating a participation
    constraint are dropped (most negative slack first) and the game re-solved.
    """
    active = [c.population > 0 or not c.attentive for c in config.classes]
    total_iter = 0
    while True:
        if config.fixed_block == 0 and not any(
                a and c.attentive and c.population > 0 for a, c in zip(active, config.classes)):
            return _assemble(config, 0.0, active, total_iter, "zero", False)
        D, it, corner, multiple = _find_root(config, active)
        total_iter += it
        if corner == "max_supply":
            log.info("no interior equilibrium below max supply %.3g", config.max_supply)
        eq = _assemble(config, D, active, total_iter, corner, multiple)
        if config.participation != "enforce":
            return eq
        violated = [c for c in eq.constraints if not c.satisfied]
        if not violated:
            return eq
        worst = min(violated, key=lambda c: c.slack)
        active[eq.index(worst.label)] = False
        log.info("dropping %s (slack %.4g) and re-solving", worst.label, worst.slack)


def fixed_point_gap(eq: Equilibrium, config: MarketConfig) -> float:
    """Re-evaluate the aggregate best response at the reported D*; returns implied - reported."""
    if eq.total <= 0:
        return 0.0
    active = [lab not in eq.excluded for lab in eq.labels]
    return aggregate_gap(config, eq.total, active)


def foc_residuals(eq: Equilibrium, config: MarketConfig) -> dict[str, float]:
    """Relative FOC residual per class with positive deposit."""
    out = {}
    for c, d in zip(config.classes, eq.deposits):
        if c.attentive and d > 0 and eq.total > 0:
            r = foc_residual(c, d, eq.total, config)
            scale = abs(issuance_yield(config.schedule, eq.total)) + abs(c.defi_yield) + 1e-300
            out[c.label] = r / scale
    return out


def pct_change(old: float, new: float) -> float:
    if not (old > 0 or old < 0) or math.isnan(old) or math.isnan(new):
        return math.nan
    return (new - old) / abs(old)


@dataclass
class ComparisonReport:
    baseline: Equilibrium
    alternative: Equilibrium
    deposit_change: dict[str, float]
    profit_change: dict[str, float]
    total_change: float

    def to_dict(self) -> dict:
        return {
            "baseline": self.baseline.to_dict(),
            "alternative": self.alternative.to_dict(),
            "deposit_change": self.deposit_change,
            "profit_change": self.profit_change,
            "total_change": self.total_change,
        }

    def rows(self) -> list[dict]:
        out = []
        for a, b in zip(self.baseline.rows(), self.alternative.rows()):
            lab = a["label"]
            out.append({
                "type": a["type"], "label": lab, "num": a["num"],
                "deps_a": a["deps"], "ratio_a": a["ratio"], "profit_a": a["profit"],
                "deps_b": b["deps"], "ratio_b": b["ratio"], "profit_b": b["profit"],
                "delta_deps": self.deposit_change[lab], "delta_profit": self.profit_change[lab],
            })
        return out


def compare(config: MarketConfig, schedule_a: IssuanceSchedule,
            schedule_b: IssuanceSchedule) -> ComparisonReport:
    ea = solve(replace(config, schedule=schedule_a))
    eb = solve(replace(config, schedule=schedule_b))
    dep = {lab: pct_change(ta, tb) for lab, ta, tb in zip(ea.labels, ea.totals, eb.totals)}
    prof = {lab: pct_change(pa, pb) for lab, pa, pb in zip(ea.labels, ea.per_eth_profits, eb.per_eth_profits)}
    return ComparisonReport(ea, eb, dep, prof, pct_change(ea.total, eb.total))
