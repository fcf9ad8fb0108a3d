import math

import pytest

from stakegame.errors import ConfigError
from stakegame.intermediary import (IntermediaryConfig, calibrate_cost_scale, cssp_profit, dssp_profit,
                                    gross_fee_base, market_at_fee, profit_matching_fee, report)
from stakegame.issuance import CURRENT, TEMPERED
from stakegame.market import inattentive_config

CFG = IntermediaryConfig()
MARKET = inattentive_config()


def test_calibrated_margin_is_half_of_gross_fee_revenue():
    kappa = calibrate_cost_scale(MARKET, CFG)
    eq = market_at_fee(MARKET, CFG.user_fee, CFG)
    gross = (CFG.user_fee - CFG.passthrough_fee) * gross_fee_base(eq, MARKET, "techie")
    assert dssp_profit(CFG.user_fee, CFG, MARKET) == pytest.approx(0.5 * gross, rel=1e-12)
    assert kappa > 0


def test_profit_by_hand_at_fixed_kappa():
    eq = market_at_fee(MARKET, 0.12, CFG)
    D, Dt = eq.total, eq.total_of("techie")
    y = 166.4 / math.sqrt(D)
    hand = (0.12 - 0.05) * (y * Dt + 3e5 * Dt / D) - 10.0 * math.sqrt(Dt)
    assert dssp_profit(0.12, CFG, MARKET, kappa=10.0) == pytest.approx(hand, rel=1e-12)


def test_fee_search_restores_baseline_profit():
    s = profit_matching_fee(CFG, MARKET, CURRENT, TEMPERED)
    assert not s.shortfall
    assert s.fee > CFG.user_fee
    assert s.achieved_profit >= s.baseline_profit - 1e-6
    # the grid point just below the answer falls short
    below = dssp_profit(s.fee - 0.002, CFG, MARKET.with_schedule(TEMPERED), s.kappa)
    assert below < s.baseline_profit


def test_fee_search_same_schedule_returns_baseline_fee():
    s = profit_matching_fee(CFG, MARKET, CURRENT, CURRENT)
    assert s.fee == pytest.approx(CFG.user_fee)


def test_cssp_uniform_split():
    eq = market_at_fee(MARKET, CFG.user_fee, CFG)
    profits = [cssp_profit(m, CFG, MARKET, eq) for m in range(CFG.cssp_count)]
    assert max(profits) == pytest.approx(min(profits))
    with pytest.raises(IndexError):
        cssp_profit(CFG.cssp_count, CFG, MARKET, eq)
    rep = report(CFG, MARKET)
    assert rep.pc_slack == pytest.approx(min(profits)) and rep.pc_slack > 0
    assert set(rep.to_dict()) >= {"user_fee", "dssp_profit", "cssp_profits"}


def test_invalid_config():
    with pytest.raises(ConfigError):
        IntermediaryConfig(user_fee=0.05, passthrough_fee=0.1)
    with pytest.raises(ConfigError):
        IntermediaryConfig(cssp_count=0)
