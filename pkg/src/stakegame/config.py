"""INI configuration files.

One section per module. ``[market] profile`` picks a calibrated starting point
(``baseline``, ``mev_variance``, ``inattentive``, ``intermediary``) and
``[class.<label>]`` sections override or add agent classes. See
``configs/default.ini`` for every key.
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, replace

from .errors import ConfigError
from .intermediary import IntermediaryConfig
from .issuance import get_schedule
from .market import PROFILES, AgentClass, CostTriple, MarketConfig
from .sweep import REFERENCE_SHARES

COST_KEYS = {"fixed": "fixed", "variable_coeff": "variable_coeff", "exponent": "exponent"}
CLASS_KEYS = {"population", "fee", "defi_yield", "has_mev", "mev_risk", "fixed_deposit", *COST_KEYS}


@dataclass
class SweepSettings:
    draws: int = 10_000
    seed: int = 0
    bins: int = 20
    workers: int = 1
    ranges: dict[str, tuple[float, float]] | None = None
    trends: list[tuple[str, str]] = field(default_factory=lambda: [
        ("expert.fixed", "pct_expert"), ("expert.variable_coeff", "pct_expert"),
        ("expert.exponent", "pct_expert"), ("mev_total", "pct_techie"),
        ("techie.defi_yield", "pct_techie"), ("techie.defi_yield", "pct_expert"),
    ])


@dataclass
class CalibrateSettings:
    n_cells: int = 20
    c_t: tuple[float, float] | None = None
    c_r: tuple[float, float] | None = None
    reference: tuple[float, ...] = REFERENCE_SHARES
    reps: int = 1
    jitter: float = 0.1
    seed: int = 0


@dataclass
class DynamicsSettings:
    initial_supply: float = 120e6
    horizon: int = 20


@dataclass
class RegressSettings:
    csv: str | None = None
    dependent: str | None = None
    endogenous: list[str] = field(default_factory=list)
    exogenous: list[str] = field(default_factory=list)
    instruments: list[str] = field(default_factory=list)
    log: list[str] = field(default_factory=list)
    lags: dict[str, int] = field(default_factory=dict)
    weekly: bool = False
    robust: str = "HC1"
    add_event_dummies: bool = False


@dataclass
class RunConfig:
    profile: str
    market: MarketConfig
    intermediary: IntermediaryConfig
    sweep: SweepSettings
    calibrate: CalibrateSettings
    dynamics: DynamicsSettings
    regress: RegressSettings
    path: str | None = None


def _float(sec, key, path):
    try:
        return float(sec[key])
    except ValueError:
        raise ConfigError(path, f"expected a number, got {sec[key]!r}") from None


def _int(sec, key, path):
    try:
        return int(float(sec[key]))
    except ValueError:
        raise ConfigError(path, f"expected an integer, got {sec[key]!r}") from None


def _bool(sec, key, path):
    try:
        return sec.getboolean(key)
    except ValueError:
        raise ConfigError(path, f"expected true/false, got {sec[key]!r}") from None


def _list(value):
    return [v.strip() for v in value.split(",") if v.strip()]


def _pair(value, path):
    parts = _list(value)
    if len(parts) != 2:
        raise ConfigError(path, f"expected 'lo, hi', got {value!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise ConfigError(path, f"expected numbers, got {value!r}") from None


def _class_from_section(sec, label, existing: AgentClass | None):
    path = f"class.{label}"
    unknown = set(sec) - CLASS_KEYS - {"remove"}
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}", "unknown key")
    kw, cost = {}, {}
    for key in sec:
        p = f"{path}.{key}"
        if key == "remove":
            continue
        if key in COST_KEYS:
            cost[COST_KEYS[key]] = _float(sec, key, p)
        elif key == "has_mev":
            kw[key] = _bool(sec, key, p)
        elif key == "mev_risk":
            kw[key] = sec[key].strip()
        elif key == "fixed_deposit":
            kw[key] = None if sec[key].strip() in ("", "none") else _float(sec, key, p)
        else:
            kw[key] = _float(sec, key, p)
    if "population" in kw and float(kw["population"]).is_integer():
        kw["population"] = int(kw["population"])
    try:
        if existing is None:
            if "population" not in kw:
                raise ConfigError(f"{path}.population", "required for a new class")
            return AgentClass(label, cost=CostTriple(**cost), **kw)
        if cost:
            kw["cost"] = replace(existing.cost, **cost)
        return replace(existing, **kw)
    except ConfigError as exc:
        if exc.path.startswith("cost."):
            raise ConfigError(f"{path}.{exc.path[5:]}", str(exc).split(": ", 1)[1]) from None
        raise


def load_config(path: str | None = None, text: str | None = None) -> RunConfig:
    """Parse a config file (or ``text``); missing sections fall back to defaults."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    if text is not None:
        cp.read_string(text)
    elif path is not None:
        if not os.path.exists(path):
            raise ConfigError("config", f"file not found: {path}")
        with open(path) as fh:
            cp.read_file(fh)
    m = cp["market"] if cp.has_section("market") else {}
    profile = m.get("profile", "baseline").strip() if m else "baseline"
    if profile not in PROFILES:
        raise ConfigError("market.profile", f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
    market = PROFILES[profile]()

    if cp.has_section("market"):
        sec = cp["market"]
        known = {"profile", "mev_total", "max_supply", "foc", "participation"}
        for key in sec:
            if key not in known:
                raise ConfigError(f"market.{key}", "unknown key")
        kw = {}
        for key in ("mev_total", "max_supply"):
            if key in sec:
                kw[key] = _float(sec, key, f"market.{key}")
        for key in ("foc", "participation"):
            if key in sec:
                kw[key] = sec[key].strip()
        market = replace(market, **kw)

    if cp.has_section("issuance"):
        sec = cp["issuance"]
        name = sec.get("schedule", "current").strip()
        cf = _float(sec, "cf", "issuance.cf") if "cf" in sec else None
        k = _float(sec, "k", "issuance.k") if "k" in sec else None
        if name != "custom" and (cf is not None or k is not None):
            name = "custom"
            cf = market.schedule.cf if cf is None else cf
            k = market.schedule.k if k is None else k
        market = replace(market, schedule=get_schedule(name, cf, k))

    classes = list(market.classes)
    for secname in cp.sections():
        if not secname.startswith("class."):
            continue
        label = secname[len("class."):]
        idx = next((i for i, c in enumerate(classes) if c.label == label), None)
        if cp[secname].get("remove", "").strip().lower() == "true":
            if idx is not None:
                classes.pop(idx)
            continue
        new = _class_from_section(cp[secname], label, classes[idx] if idx is not None else None)
        if idx is None:
            classes.append(new)
        else:
            classes[idx] = new
    market = replace(market, classes=tuple(classes))

    inter = IntermediaryConfig()
    if cp.has_section("intermediary"):
        sec = cp["intermediary"]
        kw = {}
        for key in sec:
            p = f"intermediary.{key}"
            if key in ("user_fee", "passthrough_fee", "cssp_direct_fee", "cssp_cost_scale", "net_margin"):
                kw[key] = _float(sec, key, p)
            elif key == "cssp_count":
                kw[key] = _int(sec, key, p)
            elif key == "intermediary_cost_scale":
                kw[key] = None if sec[key].strip() in ("", "auto") else _float(sec, key, p)
            elif key in ("techie_label", "direct_label"):
                kw[key] = sec[key].strip()
            else:
                raise ConfigError(p, "unknown key")
        inter = IntermediaryConfig(**kw)
    if profile == "intermediary" or cp.has_section("intermediary"):
        market = market.with_class(inter.techie_label, fee=inter.user_fee) \
            if any(c.label == inter.techie_label for c in market.classes) else market

    sw = SweepSettings()
    if cp.has_section("sweep"):
        sec = cp["sweep"]
        ranges = {}
        for key in sec:
            p = f"sweep.{key}"
            if key in ("draws", "seed", "bins", "workers"):
                setattr(sw, key, _int(sec, key, p))
            elif key.startswith("range."):
                ranges[key[len("range."):]] = _pair(sec[key], p)
            elif key == "trends":
                pairs = []
                for item in _list(sec[key]):
                    param, _, col = item.partition(":")
                    if not col:
                        raise ConfigError(p, f"expected 'parameter:column', got {item!r}")
                    pairs.append((param.strip(), col.strip()))
                sw.trends = pairs
            else:
                raise ConfigError(p, "unknown key")
        sw.ranges = ranges or None

    cal = CalibrateSettings()
    if cp.has_section("calibrate"):
        sec = cp["calibrate"]
        for key in sec:
            p = f"calibrate.{key}"
            if key in ("n_cells", "reps", "seed"):
                setattr(cal, key, _int(sec, key, p))
            elif key == "jitter":
                cal.jitter = _float(sec, key, p)
            elif key in ("c_t", "c_r"):
                setattr(cal, key, _pair(sec[key], p))
            elif key == "reference":
                vals = [float(v) for v in _list(sec[key])]
                tot = sum(vals)
                cal.reference = tuple(v / tot for v in vals)
            else:
                raise ConfigError(p, "unknown key")

    dyn = DynamicsSettings()
    if cp.has_section("dynamics"):
        sec = cp["dynamics"]
        for key in sec:
            p = f"dynamics.{key}"
            if key == "initial_supply":
                dyn.initial_supply = _float(sec, key, p)
            elif key == "horizon":
                dyn.horizon = _int(sec, key, p)
            else:
                raise ConfigError(p, "unknown key")

    reg = RegressSettings()
    if cp.has_section("regress"):
        sec = cp["regress"]
        for key in sec:
            p = f"regress.{key}"
            if key == "csv":
                csv_path = sec[key].strip()
                if path and not os.path.isabs(csv_path):
                    csv_path = os.path.join(os.path.dirname(os.path.abspath(path)), csv_path)
                reg.csv = csv_path
            elif key == "dependent":
                reg.dependent = sec[key].strip()
            elif key in ("endogenous", "exogenous", "instruments", "log"):
                setattr(reg, key, _list(sec[key]))
            elif key == "lags":
                lags = {}
                for item in _list(sec[key]):
                    col, _, k = item.partition(":")
                    try:
                        lags[col.strip()] = int(k)
                    except ValueError:
                        raise ConfigError(p, f"expected 'column:periods', got {item!r}") from None
                reg.lags = lags
            elif key in ("weekly", "add_event_dummies"):
                setattr(reg, key, _bool(sec, key, p))
            elif key == "robust":
                reg.robust = sec[key].strip()
            else:
                raise ConfigError(p, "unknown key")

    return RunConfig(profile, market, inter, sw, cal, dyn, reg, path)
