"""Command-line entry point: ``stakegame <command> [options]``."""
from __future__ import annotations

import argparse
import io
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import replace

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .dynamics import project, trajectory_csv
from .equilibrium import compare, fixed_point_gap, foc_residuals, solve
from .errors import ConfigError, StakeGameError
from .intermediary import profit_matching_fee, report as intermediary_report
from .issuance import CURRENT, TEMPERED, get_schedule
from .sweep import bin_trend, calibration_grid, records_to_csv, run_sweep

log = logging.getLogger("stakegame")

OUT_ENV = "STAKEGAME_OUT_DIR"


def manifest(command, args, schedules, outputs):
    return {
        "command": command,
        "config": os.path.basename(args.config) if args.config else None,
        "seed": getattr(args, "seed", None),
        "schedules": schedules,
        "outputs": outputs,
        "version": __version__,
    }


def g6(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "NA"
    return f"{x:.6g}"


def pct(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "NA"
    return f"{100 * x:.6g}%"


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(type(o).__name__)


def dumps(obj) -> str:
    # NaN is emitted as null so the files stay valid JSON
    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return None
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        if isinstance(v, np.ndarray):
            return clean(v.tolist())
        if isinstance(v, (np.floating, np.integer, np.bool_)):
            return clean(v.item())
        return v
    return json.dumps(clean(obj), indent=2, sort_keys=False, default=_json_default) + "\n"


def write_atomic(path: str, text: str):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def out_dir(args):
    return args.out or os.environ.get(OUT_ENV)


def emit(args, name: str, text: str, outputs: list):
    """Write ``text`` to ``<out>/<name>`` or, with no output directory, to stdout."""
    d = out_dir(args)
    if d:
        write_atomic(os.path.join(d, name), text)
        outputs.append(name)
    else:
        sys.stdout.write(text)


def _ext(fmt):
    return {"json": "json", "csv": "csv", "table": "txt"}[fmt]


# ---------------------------------------------------------------------------
# formatting

def equilibrium_table(eq) -> str:
    lines = [f"schedule: {eq.schedule}",
             f"{'type':<12}{'num':>12}{'deps':>14}{'ratio':>12}{'profit/ETH':>14}"]
    for r in eq.rows():
        lines.append(f"{r['label']:<12}{g6(r['num']):>12}{g6(r['deps']):>14}{pct(r['ratio']):>12}"
                     f"{pct(r['profit']):>14}")
    lines.append(f"{'total':<12}{'':>12}{g6(eq.total):>14}")
    if eq.corner:
        lines.append(f"corner: {eq.corner}")
    if eq.excluded:
        lines.append(f"inactive: {', '.join(eq.excluded)}")
    for c in eq.constraints:
        lines.append(f"constraint {c.name}: slack {g6(c.slack)} ({'ok' if c.satisfied else 'VIOLATED'})")
    return "\n".join(lines) + "\n"


def comparison_table(rep) -> str:
    a, b = rep.baseline.schedule, rep.alternative.schedule
    head = (f"{'type':<12}{'num':>10}{'deps[' + a + ']':>18}{'ratio':>11}{'profit':>11}"
            f"{'deps[' + b + ']':>18}{'ratio':>11}{'profit':>11}{'d deps':>11}{'d profit':>11}")
    lines = [head]
    for r in rep.rows():
        lines.append(
            f"{r['label']:<12}{g6(r['num']):>10}{g6(r['deps_a']):>18}{pct(r['ratio_a']):>11}"
            f"{pct(r['profit_a']):>11}{g6(r['deps_b']):>18}{pct(r['ratio_b']):>11}"
            f"{pct(r['profit_b']):>11}{pct(r['delta_deps']):>11}{pct(r['delta_profit']):>11}")
    lines.append(f"{'total':<12}{'':>10}{g6(rep.baseline.total):>18}{'':>22}"
                 f"{g6(rep.alternative.total):>18}{'':>22}{pct(rep.total_change):>11}")
    return "\n".join(lines) + "\n"


def csv_text(rows: list[dict], header_lines=()) -> str:
    import csv

    buf = io.StringIO()
    for h in header_lines:
        buf.write(f"# {h}\n")
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in r.items()})
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands

def _schedule(args, cfg: RunConfig, default="current"):
    name = args.schedule or default
    if name == "custom":
        return cfg.market.schedule if cfg.market.schedule.name == "custom" else get_schedule(
            "custom", cfg.market.schedule.cf, cfg.market.schedule.k)
    return get_schedule(name)


def cmd_solve(args, cfg):
    sched = _schedule(args, cfg, default=cfg.market.schedule.name if cfg.market.schedule.name != "custom" else "custom")
    market = cfg.market.with_schedule(sched)
    eq = solve(market)
    outputs = []
    name = f"solve.{_ext(args.format)}"
    man = manifest("solve", args, [sched.name], [name])
    if args.format == "json":
        body = {"manifest": man, "equilibrium": eq.to_dict(),
                "diagnostics": {"fixed_point_gap": fixed_point_gap(eq, market),
                                "foc_residuals": foc_residuals(eq, market)}}
        text = dumps(body)
    elif args.format == "csv":
        text = csv_text(eq.rows(), [f"manifest: {json.dumps(man)}"])
    else:
        text = f"# manifest: {json.dumps(man)}\n" + equilibrium_table(eq)
    emit(args, name, text, outputs)
    return 0


def cmd_compare(args, cfg):
    alt = _schedule(args, cfg, default="tempered")
    base_sched = CURRENT if alt.name != "current" else TEMPERED
    name = f"compare.{_ext(args.format)}"
    man = manifest("compare", args, [base_sched.name, alt.name], [name])
    fee_info = None
    if cfg.profile == "intermediary":
        inter = cfg.intermediary
        search = profit_matching_fee(inter, cfg.market, base_sched, alt)
        ra = intermediary_report(inter, cfg.market.with_schedule(base_sched), inter.user_fee, search.kappa)
        rb = intermediary_report(inter, cfg.market.with_schedule(alt), search.fee, search.kappa)
        fee_info = {"search": search.to_dict(), "baseline": ra.to_dict(), "alternative": rb.to_dict()}
        rep = compare_with_fees(cfg, base_sched, alt, inter.user_fee, search.fee)
    else:
        rep = compare(cfg.market, base_sched, alt)
    if args.format == "json":
        body = {"manifest": man, "comparison": rep.to_dict()}
        if fee_info:
            body["intermediary"] = fee_info
        text = dumps(body)
    elif args.format == "csv":
        text = csv_text(rep.rows(), [f"manifest: {json.dumps(man)}"])
    else:
        text = f"# manifest: {json.dumps(man)}\n" + comparison_table(rep)
        if fee_info:
            s = fee_info["search"]
            text += (f"dSSP fee: {pct(s['baseline_fee'])} -> {pct(s['fee'])}"
                     f" (baseline profit {g6(s['baseline_profit'])}, achieved {g6(s['achieved_profit'])}"
                     f"{', SHORTFALL' if s['shortfall'] else ''})\n")
    emit(args, name, text, [])
    return 0


def compare_with_fees(cfg, sa, sb, fee_a, fee_b):
    from .equilibrium import ComparisonReport, pct_change

    lab = cfg.intermediary.techie_label
    ea = solve(cfg.market.with_schedule(sa).with_class(lab, fee=fee_a))
    eb = solve(cfg.market.with_schedule(sb).with_class(lab, fee=fee_b))
    dep = {l: pct_change(x, y) for l, x, y in zip(ea.labels, ea.totals, eb.totals)}
    prof = {l: pct_change(x, y) for l, x, y in zip(ea.labels, ea.per_eth_profits, eb.per_eth_profits)}
    return ComparisonReport(ea, eb, dep, prof, pct_change(ea.total, eb.total))


def cmd_sweep(args, cfg):
    s = cfg.sweep
    draws = args.draws if args.draws is not None else s.draws
    seed = args.seed if args.seed is not None else s.seed
    bins = args.bins if args.bins is not None else s.bins
    workers = args.workers if args.workers is not None else s.workers
    args.seed = seed
    alt = _schedule(args, cfg, default="tempered")
    records = run_sweep(s.ranges, draws, seed, cfg.market, workers, CURRENT, alt)
    trends, summary = [], []
    for p, c in s.trends:
        try:
            tr = bin_trend(records, p, c, bins, bounds=s.ranges.get(p) if s.ranges else None)
        except (KeyError, ValueError) as exc:
            summary.append(f"{p} vs {c}: unavailable ({exc})")
            continue
        summary.append(f"{p} vs {c}: spearman {g6(tr.spearman())}")
        trends.append((f"trend_{p}_{c}.csv", tr))
    names = ["sweep_records.csv"] + ([n for n, _ in trends] if out_dir(args) else [])
    man = manifest("sweep", args, ["current", alt.name], names)
    header = f"manifest: {json.dumps(man)}"
    outputs = []
    emit(args, names[0], records_to_csv(records, header_lines=[header]), outputs)
    if out_dir(args):
        for fname, tr in trends:
            emit(args, fname, f"# {header}\n" + tr.to_csv(), outputs)
    ok = sum(r.ok for r in records)
    sys.stderr.write(f"{ok}/{len(records)} draws valid\n" + "\n".join(summary) + "\n")
    return 0


def cmd_calibrate(args, cfg):
    c = cfg.calibrate
    surf = calibration_grid(c.c_t, c.c_r, c.reference, c.n_cells, cfg.market,
                            n_reps=c.reps, jitter=c.jitter, seed=args.seed if args.seed is not None else c.seed)
    name = "calibration.csv"
    man = manifest("calibrate", args, [cfg.market.schedule.name], [name])
    emit(args, name, f"# manifest: {json.dumps(man)}\n" + surf.to_csv(), [])
    i, j = surf.argmin()
    sys.stderr.write(f"min distance {g6(surf.distance[i, j])} at c_t={g6(surf.c_t[i])}, c_r={g6(surf.c_r[j])}; "
                     f"{surf.near_minimal(1.1)} cells within 1.1x of the minimum\n")
    return 0


def cmd_dynamics(args, cfg):
    d = cfg.dynamics
    names = []
    texts = []
    schedules = [CURRENT, TEMPERED] if not args.schedule else [_schedule(args, cfg)]
    for sched in schedules:
        market = cfg.market.with_schedule(sched)
        eq = solve(market)
        pts = project(eq, market, d.initial_supply, d.horizon)
        names.append(f"dynamics_{sched.name}.csv")
        texts.append(pts)
    man = manifest("dynamics", args, [s.name for s in schedules], names)
    man["initial_supply"] = d.initial_supply
    for name, pts in zip(names, texts):
        emit(args, name, trajectory_csv(pts, header_lines=[f"manifest: {json.dumps(man)}"]), [])
    return 0


def cmd_regress(args, cfg):
    from .econometrics import ModelSpec, event_dummies, fit_spec, load_panel

    r = cfg.regress
    if not r.csv:
        raise ConfigError("regress.csv", "no panel CSV given")
    if not r.dependent:
        raise ConfigError("regress.dependent", "required")
    panel = load_panel(r.csv)
    if r.add_event_dummies:
        dums = event_dummies(panel.frame.index)
        for col in dums:
            if col not in panel.frame:
                panel.frame[col] = dums[col]
    spec = ModelSpec(r.dependent, r.endogenous, r.exogenous, r.instruments, r.log, r.lags, r.weekly)
    firsts, second = fit_spec(panel, spec, robust=r.robust)
    name = f"regress.{_ext(args.format)}"
    man = manifest("regress", args, [], [name])
    man["panel"] = os.path.basename(r.csv)
    if args.format == "table":
        parts = [f"# manifest: {json.dumps(man)}"] + [f.summary() for f in firsts] + [second.summary()]
        text = "\n\n".join(parts) + "\n"
    elif args.format == "csv":
        rows = []
        for res in [*firsts, second]:
            for n, b, se, t, p in zip(res.names, res.params, res.bse, res.tvalues, res.pvalues):
                rows.append({"stage": res.stage, "dependent": res.dependent, "term": n, "coef": float(b),
                             "se": float(se), "t": float(t), "p": float(p), "nobs": res.nobs,
                             "rsquared": res.rsquared, "fvalue": res.fvalue})
        text = csv_text(rows, [f"manifest: {json.dumps(man)}"])
    else:
        text = dumps({"manifest": man, "first_stage": [f.to_dict() for f in firsts],
                      "second_stage": second.to_dict()})
    emit(args, name, text, [])
    return 0


COMMANDS = {
    "solve": cmd_solve,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
    "calibrate": cmd_calibrate,
    "dynamics": cmd_dynamics,
    "regress": cmd_regress,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stakegame", description="Ethereum staking-market equilibrium engine")
    p.add_argument("--version", action="version", version=f"stakegame {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="INI config file (defaults embody the calibrated profile)")
        sp.add_argument("--schedule", choices=["current", "tempered", "custom"])
        sp.add_argument("--seed", type=int)
        sp.add_argument("--draws", type=int)
        sp.add_argument("--bins", type=int)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--out", help=f"output directory (env {OUT_ENV}); stdout when unset")
        sp.add_argument("--format", choices=["json", "csv", "table"], default="table")
        sp.add_argument("--json-errors", action="store_true", help="report failures as JSON on stderr")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except (StakeGameError, OSError) as exc:
        code = 2 if isinstance(exc, ConfigError) else 1
        if args.json_errors:
            err = {"error": type(exc).__name__, "message": str(exc)}
            if isinstance(exc, ConfigError):
                err["path"] = exc.path
            sys.stderr.write(json.dumps(err) + "\n")
        else:
            sys.stderr.write(f"stakegame {args.command}: error: {exc}\n")
        return code


if __name__ == "__main__":
    sys.exit(main())
