import math
import time
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from conftest import argmax_profit
from stakegame.equilibrium import (check_participation, compare, fixed_point_gap, foc_residuals,
                                   pct_change, solve)
from stakegame.issuance import CURRENT, TEMPERED
from stakegame.market import (AgentClass, CostTriple, MarketConfig, baseline_config,
                              inattentive_config, mev_variance_config)

BASE = baseline_config()


def two_expert_market(**kw):
    return MarketConfig((AgentClass("expert", 2, CostTriple(0.4, 0.00053, 2.0)),), **kw)


def test_two_agent_market_matches_brute_force_nash():
    cfg = two_expert_market()
    e = cfg.get("expert")
    # oracle: D with D = 2 * argmax_d profit(d; D), found on the grid-search best response
    gap = lambda D: 2 * argmax_profit(e, cfg, total_stake=D) - D
    D_oracle = brentq(gap, 1e3, 1e6, xtol=1e-6)
    eq = solve(cfg)
    assert eq.total == pytest.approx(D_oracle, rel=1e-5)
    assert eq.deposits[0] == pytest.approx(D_oracle / 2, rel=1e-5)


def test_two_agent_market_exact_foc_matches_own_price_nash():
    cfg = two_expert_market(foc="exact")
    e = cfg.get("expert")
    # symmetric Nash with each agent internalising its effect on D
    d = 1e4
    for _ in range(200):
        d_new = argmax_profit(e, cfg, total_of_others=d, hi=1e6)
        if abs(d_new - d) < 1e-9 * d:
            break
        d = 0.5 * (d + d_new)
    eq = solve(cfg)
    assert eq.deposits[0] == pytest.approx(d, rel=1e-5)


def test_baseline_closes_fixed_point():
    eq = solve(BASE)
    assert abs(fixed_point_gap(eq, BASE)) < 1.0
    assert all(abs(r) < 1e-9 for r in foc_residuals(eq, BASE).values())
    assert sum(eq.shares) == pytest.approx(1.0)
    assert sum(eq.totals) == pytest.approx(eq.total)
    assert eq.corner is None and not eq.multiple


def test_tempered_below_current():
    assert solve(BASE.with_schedule(TEMPERED)).total < solve(BASE).total


def test_zero_market():
    cfg = BASE
    for lab in ("expert", "techie", "retailer"):
        cfg = cfg.with_class(lab, population=0)
    eq = solve(cfg)
    assert eq.total == 0 and eq.corner == "zero"
    assert all(t == 0 for t in eq.totals)


def test_fixed_block_only():
    cfg = MarketConfig((AgentClass("inattentive", 10, fixed_deposit=5.0),))
    eq = solve(cfg)
    assert eq.total == pytest.approx(50.0)


def test_max_supply_corner():
    cfg = replace(BASE.with_class("retailer", variable_coeff=1e-9), max_supply=1e7)
    eq = solve(cfg)
    assert eq.corner == "max_supply"
    assert eq.total == pytest.approx(1e7)


def test_inattentive_block_constant_across_schedules():
    rep = compare(inattentive_config(), CURRENT, TEMPERED)
    assert rep.deposit_change["inattentive"] == 0.0
    assert rep.baseline.total_of("inattentive") == pytest.approx(6.5e6)


def test_participation_report_and_enforce():
    cfg = mev_variance_config(TEMPERED)
    eq = solve(cfg)
    assert [c.name for c in eq.constraints]  # evaluated in report mode
    assert check_participation(eq, cfg) == eq.constraints
    enforced = solve(replace(cfg, participation="enforce"))
    assert all(c.satisfied for c in enforced.constraints)
    for lab in enforced.excluded:
        assert enforced.total_of(lab) == 0.0


def test_compare_report_consistent():
    rep = compare(BASE, CURRENT, TEMPERED)
    assert rep.total_change == pytest.approx(pct_change(rep.baseline.total, rep.alternative.total))
    rows = rep.rows()
    assert [r["label"] for r in rows] == ["expert", "techie", "retailer"]
    assert set(rep.to_dict()) >= {"baseline", "alternative", "deposit_change", "total_change"}


def test_pct_change_edge_cases():
    assert pct_change(2.0, 1.0) == -0.5
    assert math.isnan(pct_change(0.0, 0.0))  # undefined without a base
    assert math.isnan(pct_change(0.0, 1.0))


def test_solve_is_fast():
    t = time.perf_counter()
    solve(BASE)
    assert time.perf_counter() - t < 1.0


@settings(max_examples=25, deadline=None)
@given(st.floats(0.5, 2.0), st.floats(0.5, 2.0), st.floats(0.5, 2.0))
def test_schedule_dominance_property(sc_e, sc_t, sc_r):
    cfg = (BASE.with_class("expert", variable_coeff=0.00053 * sc_e)
           .with_class("techie", variable_coeff=0.0038 * sc_t)
           .with_class("retailer", variable_coeff=0.0048 * sc_r))
    a, b = solve(cfg), solve(cfg.with_schedule(TEMPERED))
    assert b.total < a.total
    assert abs(fixed_point_gap(a, cfg)) < 1.0


@settings(max_examples=25, deadline=None)
@given(st.floats(0.3, 3.0))
def test_more_mev_more_stake(scale):
    lo = solve(replace(BASE, mev_total=1e5 * scale))
    hi = solve(replace(BASE, mev_total=1e5 * scale * 1.5))
    assert hi.total >= lo.total
