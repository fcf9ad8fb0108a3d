"""Agent classes, profits and first-order conditions of the staking game.

Every staker of a class is identical, so a class is described by its population
and one representative deposit ``d``. The aggregate stake ``D`` enters through
the issuance yield and through the proposer probability ``P = d / D`` that
governs the share of network MEV.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from scipy.optimize import brentq

from .errors import ConfigError, DomainError
from .issuance import CURRENT, IssuanceSchedule, issuance_yield, yield_derivative

LABELS = ("expert", "techie", "retailer", "institution", "inattentive")
SHORT = {"expert": "e", "techie": "t", "retailer": "r", "institution": "i", "inattentive": "n"}

# mev_risk values: risk-neutral, E - Var with Var = (yv P)^2, and the
# half-variance form E - 0.5 yv^2 P (1 - P).
MEV_RISK = ("neutral", "squared", "half")

MAX_SUPPLY = 120e6


@dataclass(frozen=True)
class CostTriple:
    fixed: float = 0.0
    variable_coeff: float = 1.0
    exponent: float = 2.0

    def __post_init__(self):
        if not self.fixed >= 0:
            raise ConfigError("cost.fixed", f"must be >= 0, got {self.fixed!r}")
        if not self.variable_coeff > 0:
            raise ConfigError("cost.variable_coeff", f"must be > 0, got {self.variable_coeff!r}")
        if not self.exponent >= 1:
            raise ConfigError("cost.exponent", f"must be >= 1, got {self.exponent!r}")

    def total(self, deposit: float) -> float:
        return self.fixed + self.variable_coeff * deposit ** self.exponent


@dataclass(frozen=True)
class AgentClass:
    label: str
    population: float
    cost: CostTriple = field(default_factory=CostTriple)
    fee: float = 0.0
    has_mev: bool = True
    defi_yield: float = 0.0
    mev_risk: str = "neutral"
    fixed_deposit: float | None = None

    def __post_init__(self):
        p = f"class.{self.label}"
        if self.label not in LABELS:
            raise ConfigError(p, f"label must be one of {LABELS}")
        if not self.population >= 0:
            raise ConfigError(f"{p}.population", "must be >= 0")
        if not 0 <= self.fee < 1:
            raise ConfigError(f"{p}.fee", f"must lie in [0, 1), got {self.fee!r}")
        if not self.defi_yield >= 0:
            raise ConfigError(f"{p}.defi_yield", "must be >= 0")
        if self.mev_risk not in MEV_RISK:
            raise ConfigError(f"{p}.mev_risk", f"must be one of {MEV_RISK}")
        if self.fixed_deposit is not None and not self.fixed_deposit >= 0:
            raise ConfigError(f"{p}.fixed_deposit", "must be >= 0")
        if self.fixed_deposit is None and not self.cost.exponent > 1:
            raise ConfigError(f"{p}.cost_exponent", "strategic classes need a convex cost (exponent > 1)")

    @property
    def attentive(self) -> bool:
        return self.fixed_deposit is None

    @property
    def mev_risk_adjusted(self) -> bool:
        return self.mev_risk != "neutral"


@dataclass(frozen=True)
class MarketConfig:
    classes: tuple[AgentClass, ...]
    schedule: IssuanceSchedule = CURRENT
    mev_total: float = 300_000.0
    max_supply: float = MAX_SUPPLY
    foc: str = "simplified"
    participation: str = "report"

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if not self.mev_total >= 0:
            raise ConfigError("market.mev_total", "must be >= 0")
        if not self.max_supply > 0:
            raise ConfigError("market.max_supply", "must be > 0")
        labels = [c.label for c in self.classes]
        if len(set(labels)) != len(labels):
            raise ConfigError("market.classes", f"duplicate class labels in {labels}")
        if self.foc not in ("simplified", "exact"):
            raise ConfigError("market.foc", "must be 'simplified' or 'exact'")
        if self.participation not in ("report", "enforce"):
            raise ConfigError("market.participation", "must be 'report' or 'enforce'")

    def get(self, label: str) -> AgentClass:
        for c in self.classes:
            if c.label == label:
                return c
        raise KeyError(label)

    def with_class(self, label: str, **changes) -> "MarketConfig":
        """Copy with fields of one class replaced (``cost`` fields by name too)."""
        cost_keys = {"fixed", "variable_coeff", "exponent"}
        cost_changes = {k: changes.pop(k) for k in list(changes) if k in cost_keys}
        out = []
        for c in self.classes:
            if c.label == label:
                if cost_changes:
                    changes["cost"] = replace(c.cost, **cost_changes)
                c = replace(c, **changes)
            out.append(c)
        return replace(self, classes=tuple(out))

    def with_schedule(self, schedule: IssuanceSchedule) -> "MarketConfig":
        return replace(self, schedule=schedule)

    @property
    def fixed_block(self) -> float:
        return sum(c.population * c.fixed_deposit for c in self.classes if not c.attentive)


def _check(deposit, total_stake):
    if not total_stake > 0:
        raise DomainError(f"total stake must be positive, got {total_stake!r}")
    if not deposit >= 0:
        raise DomainError(f"deposit must be >= 0, got {deposit!r}")
    if deposit > total_stake * (1 + 1e-12):
        raise DomainError(f"deposit {deposit!r} exceeds total stake {total_stake!r}")


def mev_revenue(cls: AgentClass, deposit: float, total_stake: float, mev_total: float) -> float:
    """Risk-adjusted expected MEV of one staker, before fees."""
    if not cls.has_mev or mev_total == 0:
        return 0.0
    p = deposit / total_stake
    if cls.mev_risk == "squared":
        return mev_total * p - (mev_total * p) ** 2
    if cls.mev_risk == "half":
        return mev_total * p - 0.5 * mev_total ** 2 * p * (1 - p)
    return mev_total * p


def profit(cls: AgentClass, deposit: float, total_stake: float, config: MarketConfig) -> float:
    """Annual profit (ETH) of one member of ``cls`` staking ``deposit``."""
    _check(deposit, total_stake)
    y = issuance_yield(config.schedule, total_stake)
    revenue = y * deposit + mev_revenue(cls, deposit, total_stake, config.mev_total)
    return (1 - cls.fee) * revenue + cls.defi_yield * deposit - cls.cost.total(deposit)


def per_eth_profit(cls, deposit, total_stake, config):
    if deposit <= 0:
        return math.nan
    return profit(cls, deposit, total_stake, config) / deposit


def marginal_cost(cost: CostTriple, deposit: float) -> float:
    if deposit < 0 or (deposit == 0 and cost.exponent < 1):
        raise DomainError(f"deposit must be positive, got {deposit!r}")
    if cost.exponent == 1:
        return cost.variable_coeff
    return cost.variable_coeff * cost.exponent * deposit ** (cost.exponent - 1)


def _marginal_mev(cls, deposit, total_stake, mev_total, exact):
    if not cls.has_mev or mev_total == 0:
        return 0.0
    D = total_stake
    p = deposit / D
    # dP/dd: exactly (D - d) / D^2 with others held fixed; 1/D under the approximation.
    dp = (D - deposit) / D ** 2 if exact else 1.0 / D
    if cls.mev_risk == "squared":
        return mev_total * dp * (1 - 2 * mev_total * p)
    if cls.mev_risk == "half":
        return mev_total * dp * (1 - 0.5 * mev_total * (1 - 2 * p))
    return mev_total * dp


def foc_residual(cls: AgentClass, deposit: float, total_stake: float, config: MarketConfig,
                 exact: bool | None = None) -> float:
    """Marginal revenue minus marginal cost for one staker.

    The default (simplified) form drops the own-price term ``y'(D) d`` and uses
    ``P / d = 1 / D``; ``exact=True`` keeps both.
    """
    if deposit <= 0:
        raise DomainError(f"deposit must be positive, got {deposit!r}")
    _check(deposit, total_stake)
    if exact is None:
        exact = config.foc == "exact"
    y = issuance_yield(config.schedule, total_stake)
    mr = y + _marginal_mev(cls, deposit, total_stake, config.mev_total, exact)
    if exact:
        mr += yield_derivative(config.schedule, total_stake) * deposit
    return (1 - cls.fee) * mr + cls.defi_yield - marginal_cost(cls.cost, deposit)


def marginal_revenue_simple(cls: AgentClass, total_stake: float, config: MarketConfig) -> float:
    """Per-ETH gross revenue ``(1-fee)(y(D) + y_v/D) + y_d``, identical across a class."""
    y = issuance_yield(config.schedule, total_stake)
    mev = config.mev_total / total_stake if cls.has_mev else 0.0
    return (1 - cls.fee) * (y + mev) + cls.defi_yield


def best_response(cls: AgentClass, total_stake: float, config: MarketConfig) -> float:
    """Deposit solving the class FOC with aggregate stake held at ``total_stake``."""
    if not total_stake > 0:
        raise DomainError(f"total stake must be positive, got {total_stake!r}")
    if not cls.attentive:
        return float(cls.fixed_deposit)
    c, a = cls.cost.variable_coeff, cls.cost.exponent
    lhs = marginal_revenue_simple(cls, total_stake, config)
    exact = config.foc == "exact"
    if not exact and not cls.mev_risk_adjusted:
        if lhs <= 0:
            return 0.0
        return (lhs / (c * a)) ** (1.0 / (a - 1.0))
    if not exact and cls.mev_risk == "squared" and a == 2 and cls.has_mev:
        # (1-f)[y + yv/D - 2 yv^2 d / D^2] + yd = 2 c d
        slope = 2 * c + (1 - cls.fee) * 2 * config.mev_total ** 2 / total_stake ** 2
        return max(lhs / slope, 0.0)
    return _solve_deposit(cls, total_stake, config, exact)


def _solve_deposit(cls, total_stake, config, exact):
    f = lambda d: foc_residual(cls, d, total_stake, config, exact=exact)
    lo = min(1e-12, total_stake * 1e-15)
    if f(lo) <= 0:
        return 0.0
    hi = min(1.0, total_stake)
    while f(hi) > 0:
        if hi >= total_stake:
            return total_stake
        hi = min(hi * 4, total_stake)
    return brentq(f, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500)


# ---------------------------------------------------------------------------
# calibrated profiles

def baseline_classes() -> tuple[AgentClass, ...]:
    return (
        AgentClass("expert", 25_000, CostTriple(0.4, 0.00053, 2.0)),
        AgentClass("techie", 200_000, CostTriple(0.0, 0.0038, 1.5), fee=0.10, defi_yield=0.02),
        AgentClass("retailer", 925_000, CostTriple(0.0, 0.0048, 1.5), fee=0.25),
    )


INSTITUTION_COST_COEFF = 0.00375
INATTENTIVE_BLOCK = 6.5e6
INATTENTIVE_POPULATION = 625_000  # retailers (925K) less institutions (300K)


def baseline_config(schedule: IssuanceSchedule = CURRENT) -> MarketConfig:
    return MarketConfig(baseline_classes(), schedule)


def mev_variance_config(schedule: IssuanceSchedule = CURRENT) -> MarketConfig:
    return baseline_config(schedule).with_class("expert", mev_risk="squared")


def inattentive_config(schedule: IssuanceSchedule = CURRENT) -> MarketConfig:
    expert, techie, _ = baseline_classes()
    classes = (
        replace(expert, mev_risk="squared"),
        techie,
        AgentClass("institution", 300_000, CostTriple(0.0, INSTITUTION_COST_COEFF, 1.5), fee=0.25),
        AgentClass("inattentive", INATTENTIVE_POPULATION, CostTriple(0.0, 0.0048, 1.5), fee=0.25,
                   fixed_deposit=INATTENTIVE_BLOCK / INATTENTIVE_POPULATION),
    )
    return MarketConfig(classes, schedule)


PROFILES = {
    "baseline": baseline_config,
    "mev_variance": mev_variance_config,
    "inattentive": inattentive_config,
    "intermediary": inattentive_config,
}
