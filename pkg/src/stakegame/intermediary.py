"""Fee-setting liquid-staking intermediary (dSSP) routing techie stake to cSSPs.

The dSSP charges techies ``user_fee`` and passes ``passthrough_fee`` on to the
cSSPs that run the validators. Its cost ``kappa * sqrt(D_t)`` has economies of
scale; unless ``intermediary_cost_scale`` is given, ``kappa`` is calibrated so
that net profit is ``net_margin`` of gross fee revenue at the baseline.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .equilibrium import Equilibrium, solve
from .errors import ConfigError
from .issuance import IssuanceSchedule, issuance_yield
from .market import MarketConfig

FEE_CAP = 0.9


@dataclass(frozen=True)
class IntermediaryConfig:
    user_fee: float = 0.10
    passthrough_fee: float = 0.05
    cssp_count: int = 10
    cssp_direct_fee: float = 0.25
    intermediary_cost_scale: float | None = None
    cssp_cost_scale: float = 0.0
    net_margin: float = 0.5
    techie_label: str = "techie"
    direct_label: str = "institution"

    def __post_init__(self):
        if not 0 <= self.passthrough_fee <= self.user_fee < 1:
            raise ConfigError("intermediary", "need 0 <= passthrough_fee <= user_fee < 1")
        if self.cssp_count < 1:
            raise ConfigError("intermediary.cssp_count", "must be >= 1")
        if self.intermediary_cost_scale is not None and self.intermediary_cost_scale < 0:
            raise ConfigError("intermediary.intermediary_cost_scale", "must be >= 0")
        if self.cssp_cost_scale < 0:
            raise ConfigError("intermediary.cssp_cost_scale", "must be >= 0")
        if not 0 <= self.cssp_direct_fee < 1:
            raise ConfigError("intermediary.cssp_direct_fee", "must lie in [0, 1)")
        if not 0 <= self.net_margin <= 1:
            raise ConfigError("intermediary.net_margin", "must lie in [0, 1]")


@dataclass
class IntermediaryReport:
    user_fee: float
    schedule: str
    dssp_profit: float
    gross_fee_base: float
    techie_stake: float
    cssp_profits: list[float]
    pc_slack: float
    equilibrium: Equilibrium = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "user_fee": self.user_fee,
            "schedule": self.schedule,
            "dssp_profit": self.dssp_profit,
            "gross_fee_base": self.gross_fee_base,
            "techie_stake": self.techie_stake,
            "cssp_profits": self.cssp_profits,
            "pc_slack": self.pc_slack,
            "equilibrium": self.equilibrium.to_dict(),
        }


def market_at_fee(market: MarketConfig, fee: float, config: IntermediaryConfig) -> Equilibrium:
    return solve(market.with_class(config.techie_label, fee=fee))


def gross_fee_base(eq: Equilibrium, market: MarketConfig, label: str) -> float:
    """Consensus plus MEV revenue earned on the stake of class ``label``."""
    stake = eq.total_of(label)
    if eq.total <= 0 or stake <= 0:
        return 0.0
    return issuance_yield(market.schedule, eq.total) * stake + market.mev_total * stake / eq.total


def calibrate_cost_scale(market: MarketConfig, config: IntermediaryConfig) -> float:
    """kappa giving a ``net_margin`` share of gross fee revenue at ``config.user_fee``."""
    eq = market_at_fee(market, config.user_fee, config)
    stake = eq.total_of(config.techie_label)
    if stake <= 0:
        return 0.0
    revenue = (config.user_fee - config.passthrough_fee) * gross_fee_base(eq, market, config.techie_label)
    return (1 - config.net_margin) * revenue / math.sqrt(stake)


def _kappa(market, config):
    if config.intermediary_cost_scale is not None:
        return config.intermediary_cost_scale
    return calibrate_cost_scale(market, config)


def dssp_profit(user_fee: float, config: IntermediaryConfig, market: MarketConfig,
                kappa: float | None = None) -> float:
    """Intermediary profit with techies facing ``user_fee``, at the induced equilibrium."""
    if kappa is None:
        kappa = _kappa(market, config)
    eq = market_at_fee(market, user_fee, config)
    return _dssp_profit_at(eq, user_fee, config, market, kappa)


def _dssp_profit_at(eq, user_fee, config, market, kappa):
    stake = eq.total_of(config.techie_label)
    base = gross_fee_base(eq, market, config.techie_label)
    return (user_fee - config.passthrough_fee) * base - kappa * math.sqrt(max(stake, 0.0))


def cssp_profit(m_index: int, config: IntermediaryConfig, market: MarketConfig,
                eq: Equilibrium) -> float:
    """Profit of cSSP ``m``: direct-stake fees plus passthrough fees minus concave cost.

    Techie stake and direct stake are split evenly over the ``cssp_count`` providers.
    """
    if not 0 <= m_index < config.cssp_count:
        raise IndexError(m_index)
    M = config.cssp_count
    if eq.total <= 0:
        return 0.0
    y = issuance_yield(market.schedule, eq.total)
    d_t = eq.total_of(config.techie_label) / M
    d_i = (eq.total_of(config.direct_label) if config.direct_label in eq.labels else 0.0) / M
    direct = config.cssp_direct_fee * (y * d_i + market.mev_total * d_i / eq.total)
    routed = config.passthrough_fee * (y * d_t + market.mev_total * d_t / eq.total)
    return direct + routed - config.cssp_cost_scale * math.sqrt(d_t + d_i)


def report(config: IntermediaryConfig, market: MarketConfig, user_fee: float | None = None,
           kappa: float | None = None) -> IntermediaryReport:
    fee = config.user_fee if user_fee is None else user_fee
    if kappa is None:
        kappa = _kappa(market, config)
    eq = market_at_fee(market, fee, config)
    profits = [cssp_profit(m, config, market, eq) for m in range(config.cssp_count)]
    return IntermediaryReport(
        fee, market.schedule.name, _dssp_profit_at(eq, fee, config, market, kappa),
        gross_fee_base(eq, market, config.techie_label), eq.total_of(config.techie_label),
        profits, min(profits), eq)


@dataclass
class FeeSearch:
    fee: float
    baseline_fee: float
    baseline_profit: float
    achieved_profit: float
    kappa: float
    shortfall: bool
    fees: list[float]
    profits: list[float]

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def profit_matching_fee(config: IntermediaryConfig, market: MarketConfig,
                        old_schedule: IssuanceSchedule, new_schedule: IssuanceSchedule,
                        step: float = 0.005, fee_cap: float = FEE_CAP) -> FeeSearch:
    """Smallest fee under ``new_schedule`` earning at least the baseline profit.

    The baseline is the intermediary's profit at ``config.user_fee`` under
    ``old_schedule``; ``kappa`` is calibrated there and held fixed. The profit
    curve is tabulated on a grid of width ``step``; the first grid crossing is
    refined with Brent's method. Without any crossing the profit-maximising fee
    is returned with ``shortfall=True``.
    """
    old = market.with_schedule(old_schedule)
    new = market.with_schedule(new_schedule)
    kappa = _kappa(old, config)
    target = dssp_profit(config.user_fee, config, old, kappa)
    f0 = config.user_fee
    n = max(int(round((fee_cap - f0) / step)), 1)
    fees = list(np.linspace(f0, fee_cap, n + 1))
    profits = [dssp_profit(f, config, new, kappa) for f in fees]
    gap = lambda f: dssp_profit(f, config, new, kappa) - target
    for j, p in enumerate(profits):
        if p >= target:
            if j == 0:
                fee = f0
            else:
                fee = brentq(gap, fees[j - 1], fees[j], xtol=1e-10)
                if gap(fee) < 0:  # land on the feasible side of the root
                    fee = fee + 1e-10
            return FeeSearch(float(fee), f0, target, dssp_profit(fee, config, new, kappa), kappa,
                             False, [float(x) for x in fees], profits)
    j = int(np.argmax(profits))
    return FeeSearch(float(fees[j]), f0, target, profits[j], kappa, True,
                     [float(x) for x in fees], profits)
