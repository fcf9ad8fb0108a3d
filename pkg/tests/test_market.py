import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import argmax_profit
from stakegame.errors import ConfigError, DomainError
from stakegame.issuance import CURRENT, TEMPERED
from stakegame.market import (AgentClass, CostTriple, MarketConfig, baseline_config, best_response,
                              foc_residual, inattentive_config, marginal_cost, mev_revenue,
                              mev_variance_config, per_eth_profit, profit)

BASE = baseline_config()


def test_cost_total_and_marginal():
    c = CostTriple(0.4, 0.00053, 2.0)
    assert c.total(100.0) == pytest.approx(0.4 + 0.00053 * 1e4)
    assert marginal_cost(c, 100.0) == pytest.approx(2 * 0.00053 * 100)
    assert marginal_cost(CostTriple(0, 0.01, 1.0), 5.0) == 0.01


def test_cost_validation():
    with pytest.raises(ConfigError):
        CostTriple(-1.0, 0.1, 2.0)
    with pytest.raises(ConfigError):
        CostTriple(0.0, 0.1, 0.5)


def test_strategic_class_needs_convex_cost():
    with pytest.raises(ConfigError):
        AgentClass("x", 10, CostTriple(0, 0.1, 1.0))


def test_profit_by_hand():
    expert = BASE.get("expert")
    D, d = 33.3e6, 36.0
    y = 166.4 / math.sqrt(D)
    hand = y * d + 3e5 * d / D - (0.4 + 0.00053 * d ** 2)
    assert profit(expert, d, D, BASE) == pytest.approx(hand, rel=1e-12)
    techie = BASE.get("techie")
    hand = 0.9 * (y * 90 + 3e5 * 90 / D) + 0.02 * 90 - 0.0038 * 90 ** 1.5
    assert profit(techie, 90.0, D, BASE) == pytest.approx(hand, rel=1e-12)


def test_zero_deposit_profit_is_minus_fixed_cost():
    expert = BASE.get("expert")
    assert profit(expert, 0.0, 1e7, BASE) == pytest.approx(-0.4)
    assert math.isnan(per_eth_profit(expert, 0.0, 1e7, BASE))


def test_domain_errors():
    expert = BASE.get("expert")
    with pytest.raises(DomainError):
        profit(expert, 1.0, 0.0, BASE)
    with pytest.raises(DomainError):
        profit(expert, -1.0, 10.0, BASE)
    with pytest.raises(DomainError):
        profit(expert, 20.0, 10.0, BASE)


def test_mev_risk_variants():
    e = BASE.get("expert")
    D, d, yv = 1e7, 100.0, 3e5
    P = d / D
    assert mev_revenue(e, d, D, yv) == pytest.approx(yv * P)
    assert mev_revenue(replace(e, mev_risk="squared"), d, D, yv) == pytest.approx(yv * P - (yv * P) ** 2)
    assert mev_revenue(replace(e, mev_risk="half"), d, D, yv) == pytest.approx(
        yv * P - 0.5 * yv ** 2 * P * (1 - P))
    assert mev_revenue(replace(e, has_mev=False), d, D, yv) == 0.0


@pytest.mark.parametrize("label", ["expert", "techie", "retailer"])
@pytest.mark.parametrize("D", [5e6, 33.3e6, 8e7])
def test_best_response_is_price_taking_argmax(label, D):
    cls = BASE.get(label)
    d = best_response(cls, D, BASE)
    oracle = argmax_profit(cls, BASE, total_stake=D)
    assert d == pytest.approx(oracle, rel=1e-5)
    assert foc_residual(cls, d, D, BASE) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("D", [5e6, 33.3e6])
def test_squared_mev_best_response_matches_argmax(D):
    cfg = mev_variance_config()
    e = cfg.get("expert")
    d = best_response(e, D, cfg)
    assert d == pytest.approx(argmax_profit(e, cfg, total_stake=D), rel=1e-5)


@pytest.mark.parametrize("risk", ["squared", "half"])
def test_root_found_response_for_nonquadratic_cost(risk):
    cfg = BASE.with_class("expert", mev_risk=risk, exponent=1.7)
    e = cfg.get("expert")
    d = best_response(e, 2e7, cfg)
    assert d == pytest.approx(argmax_profit(e, cfg, total_stake=2e7), rel=1e-5)


def test_exact_foc_matches_argmax_with_own_price_effect():
    cfg = replace(BASE, foc="exact")
    e = cfg.get("expert")
    others = 2e7
    # fixed point in own deposit: the exact FOC evaluated at D = others + d
    d = argmax_profit(e, cfg, total_of_others=others, hi=1e4)
    assert foc_residual(e, d, others + d, cfg) == pytest.approx(0.0, abs=1e-8)
    assert abs(foc_residual(e, d, others + d, cfg, exact=False)) > 0


def test_inattentive_class_returns_fixed_deposit():
    cfg = inattentive_config()
    n = cfg.get("inattentive")
    assert best_response(n, 1e7, cfg) == pytest.approx(6.5e6 / 625_000)
    assert cfg.fixed_block == pytest.approx(6.5e6)


def test_with_class_updates_cost_fields():
    cfg = BASE.with_class("techie", variable_coeff=0.005, fee=0.2)
    t = cfg.get("techie")
    assert t.cost.variable_coeff == 0.005 and t.fee == 0.2
    assert BASE.get("techie").cost.variable_coeff == 0.0038


@settings(max_examples=40, deadline=None)
@given(st.floats(1e5, 1e8), st.sampled_from(["expert", "techie", "retailer"]))
def test_best_response_decreases_in_total_stake(D, label):
    cls = BASE.get(label)
    assert best_response(cls, D * 1.1, BASE) < best_response(cls, D, BASE)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e5, 1e8), st.sampled_from(["expert", "techie", "retailer"]))
def test_tempered_response_never_larger(D, label):
    cls = BASE.get(label)
    assert best_response(cls, D, BASE.with_schedule(TEMPERED)) <= best_response(cls, D, BASE)
