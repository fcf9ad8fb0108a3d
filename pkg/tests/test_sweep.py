import math

import numpy as np
import pytest

from stakegame.equilibrium import compare
from stakegame.errors import ConfigError
from stakegame.issuance import CURRENT, TEMPERED
from stakegame.market import baseline_config
from stakegame.sweep import (REFERENCE_SHARES, SweepRecord, apply_params, bin_trend, calibration_grid,
                             default_ranges, draw_params, records_to_csv, run_sweep, share_distance)

BASE = baseline_config()


def test_default_ranges_cover_calibrated_values():
    r = default_ranges(BASE)
    assert r["expert.fixed"] == (0.2, 0.8)
    assert r["techie.fee"] == (0.0, 0.4)
    assert r["expert.exponent"] == (1.1, 2.5)
    assert "expert.fee" not in r and "techie.fixed" not in r
    assert r["mev_total"] == (1.5e5, 6e5)


def test_draws_are_per_index():
    r = default_ranges(BASE)
    assert draw_params(r, 7, 3) == draw_params(r, 7, 3)
    assert draw_params(r, 7, 3) != draw_params(r, 7, 4)
    for k, v in draw_params(r, 7, 3).items():
        assert r[k][0] <= v <= r[k][1]


def test_apply_params_rejects_unknown():
    with pytest.raises(ConfigError):
        apply_params(BASE, {"expert.colour": 1.0})
    with pytest.raises(ConfigError):
        apply_params(BASE, {"nobody.fee": 0.1})


def test_bad_ranges_rejected():
    with pytest.raises(ConfigError):
        run_sweep({"expert.fixed": (1.0, 0.5)}, 1)


def test_degenerate_sweep_equals_compare():
    recs = run_sweep({"expert.fixed": (0.4, 0.4)}, 1, seed=0)
    rep = compare(BASE, CURRENT, TEMPERED)
    (r,) = recs
    assert r.ok
    assert r.total_a == rep.baseline.total and r.total_b == rep.alternative.total
    assert r.pct["expert"] == rep.deposit_change["expert"]


def test_sweep_byte_identical_across_workers():
    a = records_to_csv(run_sweep(None, 24, seed=5, workers=1, chunk_size=5))
    b = records_to_csv(run_sweep(None, 24, seed=5, workers=3, chunk_size=7))
    c = records_to_csv(run_sweep(None, 24, seed=5, workers=2, chunk_size=24))
    assert a == b == c
    assert a != records_to_csv(run_sweep(None, 24, seed=6))


def test_failed_draws_are_flagged_not_dropped():
    recs = run_sweep({"retailer.variable_coeff": (1e-9, 1e-9)}, 3, seed=0)
    assert len(recs) == 3
    assert all(r.status.startswith("corner") for r in recs)


def _records(xs, ys):
    return [SweepRecord(i, {"p": x}, "ok", pct={"expert": y}) for i, (x, y) in enumerate(zip(xs, ys))]


def test_bin_trend_hand_example():
    xs = np.linspace(0, 1, 40, endpoint=False)
    recs = _records(xs, 2 * xs)
    t = bin_trend(recs, "p", "pct_expert", n_bins=4, bounds=(0, 1))
    assert t.counts.tolist() == [10, 10, 10, 10]
    assert t.means == pytest.approx([2 * np.mean(xs[i * 10:(i + 1) * 10]) for i in range(4)])
    assert t.spearman() == pytest.approx(1.0)
    assert t.to_csv().splitlines()[0] == "parameter,column,bin_mid,mean,count"


def test_bin_trend_needs_records():
    with pytest.raises(ValueError):
        bin_trend(_records([0.1], [0.2]), "p", "pct_expert", n_bins=20)


def test_calibration_grid_shape_and_minimum():
    surf = calibration_grid(n_cells=4)
    assert surf.distance.shape == (4, 4)
    i, j = surf.argmin()
    assert surf.distance[i, j] == np.nanmin(surf.distance)
    assert surf.near_minimal(1.0) >= 1
    assert len(surf.to_csv().splitlines()) == 17


def test_share_distance():
    assert share_distance(REFERENCE_SHARES, REFERENCE_SHARES) == 0.0
    assert share_distance([1, 0], [0, 0]) == 1.0
    assert sum(REFERENCE_SHARES) == pytest.approx(1.0)
