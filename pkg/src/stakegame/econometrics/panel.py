"""Daily staking panels: CSV ingestion, log/lag transforms and weekly aggregation.

Expected CSV layout: a ``date`` column (ISO ``YYYY-MM-DD``, strictly increasing)
followed by numeric columns. Recognised names are

    staked_total, staked_solo, staked_dssp, staked_cssp   ETH staked by category
    rewards_usd                                           annualised staking rewards
    gas_fees_usd                                          gas fees paid
    risk_free_rate
    bellatrix, paris, shapella, dencun, london,
    eth_flash_crash, ftx_collapse                         0/1 event dummies

Unrecognised columns are accepted as plain numeric series.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import date

import numpy as np
import pandas as pd

from ..errors import StakeGameError

DUMMIES = ("bellatrix", "paris", "shapella", "dencun", "london", "eth_flash_crash", "ftx_collapse")
VALUE_COLUMNS = ("staked_total", "staked_solo", "staked_dssp", "staked_cssp", "rewards_usd",
                 "gas_fees_usd", "risk_free_rate")

# Mainnet activation dates. Dummies are regime indicators: 0 before, 1 from the date on.
FORK_DATES = {
    "london": date(2021, 8, 5),
    "bellatrix": date(2022, 9, 6),
    "paris": date(2022, 9, 15),
    "shapella": date(2023, 4, 12),
    "dencun": date(2024, 3, 13),
}


class PanelError(StakeGameError, ValueError):
    def __init__(self, message, lines=()):
        self.lines = list(lines)
        shown = ", ".join(map(str, self.lines[:10])) + (f", ... ({len(self.lines)} total)"
                                                        if len(self.lines) > 10 else "")
        super().__init__(message + (f" (lines {shown})" if self.lines else ""))


@dataclass
class Panel:
    frame: pd.DataFrame  # DatetimeIndex named "date"
    missing: dict[str, list[int]] = field(default_factory=dict)  # column -> CSV line numbers
    line_numbers: list[int] = field(default_factory=list)

    def __len__(self):
        return len(self.frame)

    @property
    def columns(self) -> list[str]:
        return list(self.frame.columns)


def load_panel(path_or_file) -> Panel:
    """Read and validate a panel CSV. Missing cells are recorded, not rejected."""
    fh = open(path_or_file, newline="") if isinstance(path_or_file, (str, bytes)) or hasattr(
        path_or_file, "__fspath__") else path_or_file
    try:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise PanelError("empty file") from None
        if not header or header[0] != "date":
            raise PanelError("first column must be 'date'", [1])
        if len(set(header)) != len(header):
            raise PanelError(f"duplicate column names in header {header}", [1])
        dates, rows, lines, bad = [], [], [], []
        missing: dict[str, list[int]] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                bad.append(lineno)
                continue
            try:
                d = date.fromisoformat(row[0].strip())
            except ValueError:
                bad.append(lineno)
                continue
            vals = []
            ok = True
            for name, cell in zip(header[1:], row[1:]):
                cell = cell.strip()
                if cell == "" or cell.lower() in ("na", "nan"):
                    missing.setdefault(name, []).append(lineno)
                    vals.append(math.nan)
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    ok = False
                    break
                if name in DUMMIES and v not in (0.0, 1.0):
                    ok = False
                    break
                vals.append(v)
            if not ok:
                bad.append(lineno)
                continue
            dates.append(d)
            rows.append(vals)
            lines.append(lineno)
    finally:
        if fh is not path_or_file:
            fh.close()
    if bad:
        raise PanelError("malformed rows", bad)
    out_of_order = [lines[i] for i in range(1, len(dates)) if dates[i] <= dates[i - 1]]
    if out_of_order:
        raise PanelError("dates must be strictly increasing", out_of_order)
    frame = pd.DataFrame(rows, columns=header[1:], index=pd.DatetimeIndex(dates, name="date"))
    return Panel(frame, missing, lines)


def event_dummies(index: pd.DatetimeIndex, events: dict[str, date] | None = None) -> pd.DataFrame:
    """Step dummies, 1 on and after each event date."""
    events = FORK_DATES if events is None else events
    return pd.DataFrame({k: (index >= pd.Timestamp(v)).astype(float) for k, v in events.items()},
                        index=index)


@dataclass
class ModelSpec:
    dependent: str
    endogenous: list[str] = field(default_factory=list)
    exogenous: list[str] = field(default_factory=list)
    instruments: list[str] = field(default_factory=list)
    log: list[str] = field(default_factory=list)
    lags: dict[str, int] = field(default_factory=dict)
    weekly: bool = False

    @property
    def columns(self) -> list[str]:
        seen = []
        for c in [self.dependent, *self.endogenous, *self.exogenous, *self.instruments]:
            if c not in seen:
                seen.append(c)
        return seen


@dataclass
class Design:
    y: np.ndarray
    endogenous: np.ndarray
    exogenous: np.ndarray
    instruments: np.ndarray
    names: dict[str, list[str]]
    index: pd.DatetimeIndex
    frame: pd.DataFrame


def weekly_mean(frame: pd.DataFrame) -> pd.DataFrame:
    """Mean of levels within each ISO-8601 week, indexed by the week's Monday."""
    iso = frame.index.isocalendar()
    g = frame.groupby([iso["year"].to_numpy(int), iso["week"].to_numpy(int)], sort=True).mean()
    g.index = pd.DatetimeIndex([pd.Timestamp(date.fromisocalendar(y, w, 1)) for y, w in g.index],
                               name="week")
    return g


def transform(panel: Panel, spec: ModelSpec) -> Design:
    """Weekly aggregation (optional), then natural logs, then lags.

    A lag of ``k`` periods shifts the column and drops the first rows so every
    retained row is complete.
    """
    frame = panel.frame
    cols = spec.columns
    unknown = [c for c in cols + spec.log + list(spec.lags) if c not in frame.columns]
    if unknown:
        raise PanelError(f"unknown columns {sorted(set(unknown))}")
    sub = frame[cols].copy()
    holes = {c: panel.missing[c] for c in cols if c in panel.missing}
    if holes:
        raise PanelError(f"missing values in referenced columns {sorted(holes)}",
                         sorted(x for v in holes.values() for x in v))
    if spec.weekly:
        sub = weekly_mean(sub)
    for c in spec.log:
        bad = sub.index[sub[c] <= 0]
        if len(bad):
            raise PanelError(f"log of non-positive value in column {c!r} at {bad[0].date()}")
        sub[c] = np.log(sub[c])
    max_lag = 0
    for c, k in spec.lags.items():
        if k < 0:
            raise PanelError(f"negative lag for {c!r}")
        sub[c] = sub[c].shift(k)
        max_lag = max(max_lag, k)
    sub = sub.iloc[max_lag:]
    pick = lambda names: sub[names].to_numpy(dtype=float) if names else np.empty((len(sub), 0))
    return Design(
        sub[spec.dependent].to_numpy(dtype=float), pick(spec.endogenous), pick(spec.exogenous),
        pick(spec.instruments),
        {"endogenous": list(spec.endogenous), "exogenous": list(spec.exogenous),
         "instruments": list(spec.instruments)},
        sub.index, sub)


def fit_spec(panel: Panel, spec: ModelSpec, robust=True):
    """OLS when no endogenous regressors are named, 2SLS otherwise."""
    from .estimators import ols, tsls

    d = transform(panel, spec)
    if not spec.endogenous:
        return [], ols(d.y, d.exogenous, robust=robust, names=spec.exogenous, dependent=spec.dependent)
    return tsls(d.y, d.endogenous, d.exogenous, d.instruments, robust=robust,
                endog_names=spec.endogenous, exog_names=spec.exogenous,
                instrument_names=spec.instruments, dependent=spec.dependent)
