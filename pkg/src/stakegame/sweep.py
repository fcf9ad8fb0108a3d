"""Monte-Carlo comparative statics across issuance schedules.

Each draw samples every swept parameter uniformly and independently, solves
the game under two schedules and records the percentage change of each class's
stake. Draw ``i`` uses a generator seeded by ``(seed, i)`` alone, so results do
not depend on how draws are split across worker processes.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import spearmanr

from .equilibrium import pct_change, solve
from .errors import ConfigError, StakeGameError
from .issuance import CURRENT, TEMPERED, IssuanceSchedule
from .market import MarketConfig, baseline_config

log = logging.getLogger(__name__)

CLASS_FIELDS = ("population", "fee", "defi_yield", "fixed", "variable_coeff", "exponent")
REFERENCE_SHARES = tuple(np.array([0.027, 0.541, 0.446]) / 1.014)  # expert, techie, retailer


def default_ranges(config: MarketConfig) -> dict[str, tuple[float, float]]:
    """[0.5x, 2x] around calibrated values; fees over [0, 0.4], exponents over [1.1, 2.5].

    Parameters that are zero at calibration (the intermediaries' fixed costs,
    the solo fee) are left out.
    """
    r = {}
    for c in config.classes:
        if not c.attentive:
            continue
        p = c.label
        r[f"{p}.population"] = (0.5 * c.population, 2 * c.population)
        if c.fee > 0:
            r[f"{p}.fee"] = (0.0, 0.4)
        if c.defi_yield > 0:
            r[f"{p}.defi_yield"] = (0.5 * c.defi_yield, 2 * c.defi_yield)
        if c.cost.fixed > 0:
            r[f"{p}.fixed"] = (0.5 * c.cost.fixed, 2 * c.cost.fixed)
        r[f"{p}.variable_coeff"] = (0.5 * c.cost.variable_coeff, 2 * c.cost.variable_coeff)
        r[f"{p}.exponent"] = (1.1, 2.5)
    if config.mev_total > 0:
        r["mev_total"] = (0.5 * config.mev_total, 2 * config.mev_total)
    return r


def apply_params(config: MarketConfig, params: dict[str, float]) -> MarketConfig:
    for name, value in params.items():
        if name == "mev_total":
            config = replace(config, mev_total=value)
            continue
        label, _, fld = name.partition(".")
        if fld not in CLASS_FIELDS:
            raise ConfigError(f"sweep.range.{name}", f"unknown parameter field {fld!r}")
        try:
            config.get(label)
        except KeyError:
            raise ConfigError(f"sweep.range.{name}", f"no class {label!r}") from None
        config = config.with_class(label, **{fld: value})
    return config


def check_ranges(ranges):
    for name, (lo, hi) in ranges.items():
        if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
            raise ConfigError(f"sweep.range.{name}", f"need finite lo <= hi, got ({lo}, {hi})")


@dataclass
class SweepRecord:
    index: int
    params: dict[str, float]
    status: str = "ok"
    total_a: float = math.nan
    total_b: float = math.nan
    totals_a: dict[str, float] = field(default_factory=dict)
    totals_b: dict[str, float] = field(default_factory=dict)
    pct: dict[str, float] = field(default_factory=dict)
    pct_total: float = math.nan

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def value(self, column: str) -> float:
        """Look up a parameter, ``pct_<label>``, ``pct_total`` or ``total_a``/``total_b``."""
        if column in self.params:
            return self.params[column]
        if column == "pct_total":
            return self.pct_total
        if column.startswith("pct_"):
            return self.pct.get(column[4:], math.nan)
        return getattr(self, column)


def draw_params(ranges, seed, index):
    rng = np.random.default_rng([seed, index])
    return {k: float(rng.uniform(lo, hi)) if hi > lo else float(lo) for k, (lo, hi) in ranges.items()}


def run_draw(base: MarketConfig, ranges, seed: int, index: int,
             schedule_a: IssuanceSchedule = CURRENT, schedule_b: IssuanceSchedule = TEMPERED) -> SweepRecord:
    params = draw_params(ranges, seed, index)
    rec = SweepRecord(index, params)
    try:
        cfg = apply_params(base, params)
        ea = solve(cfg.with_schedule(schedule_a))
        eb = solve(cfg.with_schedule(schedule_b))
    except (StakeGameError, ValueError, ArithmeticError) as exc:
        rec.status = f"failed:{type(exc).__name__}"
        return rec
    rec.total_a, rec.total_b = ea.total, eb.total
    rec.totals_a = dict(zip(ea.labels, ea.totals))
    rec.totals_b = dict(zip(eb.labels, eb.totals))
    if ea.corner or eb.corner:
        rec.status = f"corner:{ea.corner or eb.corner}"
    rec.pct = {lab: pct_change(rec.totals_a[lab], rec.totals_b[lab]) for lab in ea.labels}
    rec.pct_total = pct_change(ea.total, eb.total)
    return rec


def _run_chunk(args):
    base, ranges, seed, indices, sa, sb = args
    return [run_draw(base, ranges, seed, i, sa, sb) for i in indices]


def run_sweep(ranges: dict[str, tuple[float, float]] | None = None, n_draws: int = 10_000,
              seed: int = 0, base: MarketConfig | None = None, workers: int = 1,
              schedule_a: IssuanceSchedule = CURRENT, schedule_b: IssuanceSchedule = TEMPERED,
              chunk_size: int = 500) -> list[SweepRecord]:
    """Run ``n_draws`` independent draws; records come back sorted by index."""
    if n_draws < 1:
        raise ConfigError("sweep.draws", "must be >= 1")
    base = baseline_config() if base is None else base
    ranges = default_ranges(base) if ranges is None else dict(ranges)
    check_ranges(ranges)
    chunks = [range(s, min(s + chunk_size, n_draws)) for s in range(0, n_draws, chunk_size)]
    jobs = [(base, ranges, seed, ch, schedule_a, schedule_b) for ch in chunks]
    if workers <= 1:
        out = [r for job in jobs for r in _run_chunk(job)]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            out = [r for part in ex.map(_run_chunk, jobs) for r in part]
    out.sort(key=lambda r: r.index)
    bad = sum(not r.ok for r in out)
    if bad:
        log.info("%d of %d draws flagged (solver failure or corner)", bad, len(out))
    return out


def _fmt(x):
    return repr(float(x))


def records_to_csv(records: list[SweepRecord], fh=None, header_lines=()) -> str | None:
    """Stable column order: index, status, parameters, totals per schedule, pct changes."""
    buf = io.StringIO() if fh is None else fh
    for line in header_lines:
        buf.write(f"# {line}\n")
    if not records:
        return buf.getvalue() if fh is None else None
    params = list(records[0].params)
    labels = list(next((r.totals_a for r in records if r.totals_a), {}))
    cols = (["index", "status"] + params + ["total_a", "total_b"]
            + [f"total_a_{lab}" for lab in labels] + [f"total_b_{lab}" for lab in labels]
            + [f"pct_{lab}" for lab in labels] + ["pct_total"])
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in records:
        row = [r.index, r.status] + [_fmt(r.params[p]) for p in params]
        row += [_fmt(r.total_a), _fmt(r.total_b)]
        row += [_fmt(r.totals_a.get(lab, math.nan)) for lab in labels]
        row += [_fmt(r.totals_b.get(lab, math.nan)) for lab in labels]
        row += [_fmt(r.pct.get(lab, math.nan)) for lab in labels] + [_fmt(r.pct_total)]
        w.writerow(row)
    return buf.getvalue() if fh is None else None


@dataclass
class BinnedTrend:
    parameter: str
    column: str
    edges: np.ndarray
    midpoints: np.ndarray
    means: np.ndarray
    counts: np.ndarray

    def spearman(self) -> float:
        """Rank correlation between bin position and bin mean over non-empty bins."""
        m = self.counts > 0
        if m.sum() < 3:
            return math.nan
        return float(spearmanr(self.midpoints[m], self.means[m])[0])

    def to_csv(self, fh=None) -> str | None:
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["parameter", "column", "bin_mid", "mean", "count"])
        for mid, mean, n in zip(self.midpoints, self.means, self.counts):
            w.writerow([self.parameter, self.column, _fmt(mid), _fmt(mean), int(n)])
        return buf.getvalue() if fh is None else None


def bin_trend(records: list[SweepRecord], parameter: str, column: str, n_bins: int = 20,
              bounds: tuple[float, float] | None = None) -> BinnedTrend:
    """Equal-width binned mean of ``column`` against ``parameter``.

    Records that are flagged, or whose percentage change is undefined, are left
    out. ``bounds`` defaults to the sampled min and max. Empty bins get a NaN mean.
    """
    xs, vs = [], []
    for r in records:
        if not r.ok:
            continue
        v = r.value(column)
        if math.isnan(v):
            continue
        xs.append(r.params[parameter])
        vs.append(v)
    if len(xs) < n_bins:
        raise ValueError(f"need at least {n_bins} valid records, got {len(xs)}")
    x, v = np.asarray(xs), np.asarray(vs)
    lo, hi = bounds if bounds is not None else (x.min(), x.max())
    edges = np.linspace(lo, hi, n_bins + 1)
    idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    sums = np.bincount(idx, weights=v, minlength=n_bins)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return BinnedTrend(parameter, column, edges, 0.5 * (edges[1:] + edges[:-1]), means, counts)


@dataclass
class CalibrationSurface:
    c_t: np.ndarray
    c_r: np.ndarray
    distance: np.ndarray  # shape (len(c_t), len(c_r)); NaN where the solve failed
    reference: tuple[float, ...]

    def argmin(self) -> tuple[int, int]:
        return tuple(int(i) for i in np.unravel_index(np.nanargmin(self.distance), self.distance.shape))

    def near_minimal(self, factor: float = 1.1) -> int:
        """Number of cells within ``factor`` times the minimum distance."""
        dmin = np.nanmin(self.distance)
        return int(np.sum(self.distance <= factor * dmin))

    def to_csv(self, fh=None) -> str | None:
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["c_t", "c_r", "distance"])
        for i, ct in enumerate(self.c_t):
            for j, cr in enumerate(self.c_r):
                w.writerow([_fmt(ct), _fmt(cr), _fmt(self.distance[i, j])])
        return buf.getvalue() if fh is None else None


def share_distance(shares, reference) -> float:
    return float(np.linalg.norm(np.asarray(shares, float) - np.asarray(reference, float)))


def _jitter_params(base, seed, cell, rep, jitter, skip):
    rng = np.random.default_rng([seed, *cell, rep])
    out = {}
    for name, (lo, hi) in default_ranges(base).items():
        if name in skip or name.endswith(".exponent"):
            continue
        cur = base.mev_total if name == "mev_total" else _current(base, name)
        out[name] = cur * float(rng.uniform(1 - jitter, 1 + jitter))
    return out


def _current(config, name):
    label, _, fld = name.partition(".")
    c = config.get(label)
    if fld in ("fixed", "variable_coeff", "exponent"):
        return getattr(c.cost, fld)
    return getattr(c, fld)


def calibration_grid(c_t_range=None, c_r_range=None, reference_shares=REFERENCE_SHARES,
                     n_cells: int = 20, base: MarketConfig | None = None,
                     labels=("expert", "techie", "retailer"), n_reps: int = 1,
                     jitter: float = 0.1, seed: int = 0) -> CalibrationSurface:
    """L2 distance between simulated and reference shares over a (c_t, c_r) grid.

    With ``n_reps == 1`` each cell is one solve at the calibrated values of all
    other parameters. With ``n_reps > 1`` the cell value is the median distance
    over draws in which every other non-exponent parameter is scaled by a
    uniform factor in ``[1 - jitter, 1 + jitter]``, seeded by ``(seed, cell, rep)``.
    """
    base = baseline_config() if base is None else base
    ct0 = base.get("techie").cost.variable_coeff
    cr0 = base.get("retailer").cost.variable_coeff
    c_t_range = c_t_range or (0.5 * ct0, 2 * ct0)
    c_r_range = c_r_range or (0.5 * cr0, 2 * cr0)
    if abs(sum(reference_shares) - 1) > 1e-9:
        raise ConfigError("calibrate.reference", "reference shares must sum to 1")
    if n_reps < 1:
        raise ConfigError("calibrate.reps", "must be >= 1")
    skip = {"techie.variable_coeff", "retailer.variable_coeff"}
    cts = np.linspace(*c_t_range, n_cells)
    crs = np.linspace(*c_r_range, n_cells)
    dist = np.full((n_cells, n_cells), np.nan)
    for i, ct in enumerate(cts):
        for j, cr in enumerate(crs):
            cell = base.with_class("techie", variable_coeff=ct).with_class("retailer", variable_coeff=cr)
            ds = []
            for rep in range(n_reps):
                cfg = cell if n_reps == 1 else apply_params(
                    cell, _jitter_params(cell, seed, (i, j), rep, jitter, skip))
                try:
                    eq = solve(cfg)
                except StakeGameError as exc:
                    log.warning("calibration cell (%g, %g) failed: %s", ct, cr, exc)
                    continue
                if eq.corner:
                    continue
                ds.append(share_distance([eq.share_of(lab) for lab in labels], reference_shares))
            if ds:
                dist[i, j] = float(np.median(ds))
    return CalibrationSurface(cts, crs, dist, tuple(reference_shares))
