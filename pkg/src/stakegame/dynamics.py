"""Long-run projection of staking levels when stakers reinvest their profits.

Stakers do not re-optimise: each class adds its yearly profit (revenue net of
fees, minus costs) to its stake. Supply grows by the consensus issuance paid on
the total stake; MEV and DeFi yield are transfers and do not add to supply.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from .equilibrium import Equilibrium
from .errors import DomainError
from .issuance import issuance_yield
from .market import MarketConfig, profit


@dataclass
class TrajectoryPoint:
    year: int
    levels: dict[str, float]
    supply: float
    ratios: dict[str, float]
    level_change: dict[str, float]
    ratio_change: dict[str, float]
    issuance: float

    @property
    def total(self) -> float:
        return sum(self.levels.values())

    def share(self, label: str) -> float:
        t = self.total
        return self.levels[label] / t if t > 0 else 0.0


def _point(year, levels, supply, issuance, base_levels, base_ratios):
    ratios = {k: v / supply for k, v in levels.items()}
    lc = {k: (v / base_levels[k] - 1) if base_levels[k] > 0 else float("nan") for k, v in levels.items()}
    rc = {k: (v / base_ratios[k] - 1) if base_ratios[k] > 0 else float("nan") for k, v in ratios.items()}
    return TrajectoryPoint(year, dict(levels), supply, ratios, lc, rc, issuance)


def project(eq: Equilibrium, config: MarketConfig, initial_supply: float = 120e6,
            horizon_years: int = 20) -> list[TrajectoryPoint]:
    """Yearly trajectory, year 0 being the equilibrium itself.

    Profits are evaluated with ``market.profit`` at each class's current
    per-agent level and the updated aggregate, so yields and MEV shares move
    with the totals. Levels are floored at zero. Classes with a fixed deposit
    (inattentive stakers) are held constant.
    """
    if horizon_years < 1:
        raise DomainError("horizon must be at least one year")
    if initial_supply < eq.total:
        raise DomainError(f"initial supply {initial_supply:g} below staked total {eq.total:g}")
    classes = {c.label: c for c in config.classes}
    levels = dict(zip(eq.labels, eq.totals))
    supply = float(initial_supply)
    base_levels = dict(levels)
    base_ratios = {k: v / supply for k, v in levels.items()}
    out = []
    for year in range(horizon_years + 1):
        D = sum(levels.values())
        issued = issuance_yield(config.schedule, D) * D if D > 0 else 0.0
        out.append(_point(year, levels, supply, issued, base_levels, base_ratios))
        if year == horizon_years:
            break
        new = {}
        for lab, lvl in levels.items():
            c = classes[lab]
            if not c.attentive or c.population == 0 or lvl <= 0:
                new[lab] = lvl
                continue
            per_agent = lvl / c.population
            new[lab] = max(0.0, lvl + c.population * profit(c, per_agent, D, config))
        levels = new
        supply += issued
    return out


def trajectory_csv(points: list[TrajectoryPoint], fh=None, header_lines=()) -> str | None:
    """Long format: one row per (year, class)."""
    buf = io.StringIO() if fh is None else fh
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["year", "class", "level", "supply", "ratio", "level_change", "ratio_change"])
    for p in points:
        for lab in p.levels:
            w.writerow([p.year, lab, repr(p.levels[lab]), repr(p.supply), repr(p.ratios[lab]),
                        repr(p.level_change[lab]), repr(p.ratio_change[lab])])
    return buf.getvalue() if fh is None else None
