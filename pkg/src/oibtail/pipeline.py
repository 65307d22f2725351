"""File-based pipeline behind the CLI subcommands.

Layout under ``output_dir``::

    orders/<instrument>.csv, calendar.txt     synth
    series/<instrument>_<kind>_dt<dt>.csv     imbalance
    table1_<kind>_dt<dt>.{csv,json}           imbalance
    table2.{csv,json}, fits/, plots/          fit
    table3.{csv,json}, traces/                tail

Reports embed the analysis configuration. Nothing in them depends on the
output directory or the worker count, so identical configurations give
byte-identical files.
"""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import distfit
from .distfit import Estimator, Model
from .errors import EstimationError, OIBError, ParameterError
from .imbalance import (SeriesKind, aggregate_timescale, compute_imbalance_series,
                        pool_standardized, read_series, series_path, standardize,
                        summary_stats, write_series)
from .ingest import (EventTable, TradingCalendar, filter_continuous_auction, int_to_date,
                     read_order_file, write_order_file)
from .synth import gen_order_flow
from .tailfit import GofKind, Side, gof_test, scan_smin, write_trace

log = logging.getLogger(__name__)


@dataclass
class StageResult:
    outputs: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.failures


def _clean(v):
    """JSON-safe value: NaN/inf become None, numpy scalars become Python."""
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def _write_json(path, payload):
    Path(path).write_text(json.dumps(_clean(payload), indent=2) + "\n")


def _config_comment(cfg):
    return "# config=" + json.dumps(_clean(cfg.analysis_dict()), sort_keys=True, separators=(",", ":"))


def _f2(v):
    return "NA" if v is None or not math.isfinite(v) else f"{v:.2f}"


def _f4(v):
    return "NA" if v is None or not math.isfinite(v) else f"{v:.4f}"


def _write_table(path, cfg, header, rows):
    lines = [_config_comment(cfg), ",".join(header)]
    lines.extend(",".join(r) for r in rows)
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------- synth

def run_synth(cfg):
    if cfg.synth is None:
        raise ParameterError("no synth configuration given")
    out = Path(cfg.output_dir)
    (out / "orders").mkdir(parents=True, exist_ok=True)
    events = gen_order_flow(cfg.synth, workers=cfg.workers)
    calendar = cfg.synth.calendar()
    result = StageResult()
    for code in cfg.synth.instruments:
        path = out / "orders" / f"{code}.csv"
        write_order_file(events.for_instrument(code), path)
        result.outputs.append(path)
    cal_path = out / "calendar.txt"
    calendar.write(cal_path)
    result.outputs.append(cal_path)
    return result


def _synth_inputs(cfg):
    out = Path(cfg.output_dir)
    return [out / "orders" / f"{c}.csv" for c in cfg.synth.instruments], out / "calendar.txt"


# ---------------------------------------------------------------- imbalance

def load_events(cfg):
    """Parse and filter every input file; returns (events, calendar, skipped per file)."""
    inputs = [Path(p) for p in cfg.inputs]
    cal_path = Path(cfg.calendar) if cfg.calendar else None
    if not inputs and cfg.synth is not None:
        inputs, cal_path = _synth_inputs(cfg)
    if not inputs:
        raise ParameterError("no input order files")
    for p in inputs + ([cal_path] if cal_path else []):
        if not p.is_file():
            raise FileNotFoundError(f"input not found: {p}")
    tables, skipped = [], {}
    for p in inputs:
        parsed = read_order_file(p)
        tables.append(parsed.events)
        skipped[p.name] = parsed.skipped
    events = EventTable.concat(tables)
    if cal_path is not None:
        calendar = TradingCalendar.read(cal_path)
    else:
        calendar = TradingCalendar(tuple(int_to_date(d) for d in np.unique(events.date)))
    return filter_continuous_auction(events, calendar), calendar, skipped


def _select_instruments(available, wanted):
    if wanted is None:
        return list(available)
    chosen = [c for c in available if c in set(wanted)]
    if not chosen:
        raise ParameterError(
            f"no instrument matches {list(wanted)}; available: {', '.join(available) or 'none'}")
    return chosen


def imbalance_timescales(cfg):
    return sorted({1, *cfg.timescales})


def run_imbalance(cfg):
    events, calendar, skipped = load_events(cfg)
    codes = _select_instruments(events.instruments(), cfg.instruments)
    out = Path(cfg.output_dir)
    (out / "series").mkdir(parents=True, exist_ok=True)
    result = StageResult()
    header = ["code", "mu", "sigma", "S", "K", "P%", "N%", "Z%"]
    for kind in cfg.kinds:
        for dt in imbalance_timescales(cfg):
            rows, records = [], []
            for code in codes:
                series = compute_imbalance_series(events.for_instrument(code), kind, dt, calendar, code)
                path = series_path(out / "series", code, kind, dt)
                write_series(series, path)
                result.outputs.append(path)
                st = summary_stats(series)
                rows.append([code, _f2(st.mu), _f2(st.sigma), _f2(st.skewness), _f2(st.kurtosis),
                             _f2(st.pct_positive), _f2(st.pct_negative), _f2(st.pct_zero)])
                records.append({"code": code, **st.__dict__})
            stem = out / f"table1_{kind}_dt{dt}"
            _write_table(stem.with_suffix(".csv"), cfg, header, rows)
            _write_json(stem.with_suffix(".json"), {
                "config": cfg.analysis_dict(), "kind": kind, "dt": dt,
                "skipped_rows": skipped, "rows": records})
            result.outputs += [stem.with_suffix(".csv"), stem.with_suffix(".json")]
    return result


def load_series(cfg, kind, dt=1):
    """1-minute series of the selected instruments, sorted by code."""
    directory = Path(cfg.output_dir) / "series"
    paths = sorted(directory.glob(f"*_{SeriesKind(kind).value}_dt{dt}.csv"))
    if not paths:
        raise FileNotFoundError(f"no {kind} dt={dt} series files in {directory}")
    series = [read_series(p) for p in paths]
    codes = _select_instruments([s.instrument for s in series], cfg.instruments)
    return [s for s in series if s.instrument in set(codes)]


# ---------------------------------------------------------------- fit

def _fit_cell(samples, model, estimator, bins):
    try:
        return distfit.fit(samples, model, estimator, bins), None
    except OIBError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def _stock_preferences(args):
    """Fit both models to one stock and return the preferred model name, or an error."""
    values, estimator, bins = args
    fits = {}
    for model in (Model.STUDENT, Model.QEXP):
        f, err = _fit_cell(values, model, estimator, bins)
        if err:
            return None, err
        fits[model] = f
    return distfit.compare_models(fits[Model.STUDENT], fits[Model.QEXP]).preferred.value, None


def _map(fn, items, workers):
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def run_fit(cfg):
    out = Path(cfg.output_dir)
    for d in ("fits", "plots"):
        (out / d).mkdir(parents=True, exist_ok=True)
    result = StageResult()
    header = ["kind", "estimator", "alpha", "chi_t", "p_t", "q+", "alpha+", "q-", "alpha-", "chi_q", "p_q"]
    rows, records = [], []
    for kind in cfg.kinds:
        series = load_series(cfg, kind)
        pooled, excluded = pool_standardized(series)
        per_stock = []
        for s in series:
            try:
                per_stock.append((s.instrument, standardize(s).values))
            except ParameterError:
                pass
        bd = distfit.make_binned_density(pooled, distfit.TWO_SIDED, cfg.bins)
        curves = {}
        coverage = {
            "abs_le_3_pct": 100.0 * float(np.mean(np.abs(pooled) <= 3)),
            "abs_le_5_pct": 100.0 * float(np.mean(np.abs(pooled) <= 5)),
        }
        for est in cfg.estimators:
            cells, errors = {}, {}
            for model in cfg.models:
                f, err = _fit_cell(pooled, model, est, cfg.bins)
                if err:
                    errors[model] = err
                    result.failures.append(f"fit {kind} {est} {model}: {err}")
                    continue
                cells[model] = f
                distfit.write_fit_record(f, out / "fits" / f"{kind}_{est}_{model}.txt")
                curves[f"{est}_{model}"] = f.pdf(bd.centers)
            tallies, stock_errors = {"Student": 0, "QExp": 0}, {}
            if set(cfg.models) == {"Student", "QExp"}:
                prefs = _map(_stock_preferences,
                             [(v, est, cfg.bins) for _, v in per_stock], cfg.workers)
                for (code, _), (pref, err) in zip(per_stock, prefs):
                    if err:
                        stock_errors[code] = err
                    else:
                        tallies[pref] += 1
            n_ok = sum(tallies.values())
            st, qe = cells.get("Student"), cells.get("QExp")
            q_pos = qe.params[0].q if qe and qe.params[0] else math.nan
            q_neg = qe.params[1].q if qe and qe.params[1] else math.nan
            row = {
                "kind": kind, "estimator": est,
                "alpha": st.params.alpha if st else math.nan,
                "chi_t": st.chi if st else math.nan,
                "p_t": f"{tallies['Student']}/{n_ok}" if n_ok else "NA",
                "q_pos": q_pos, "alpha_pos": qe.tail_indices[0] if qe else math.nan,
                "q_neg": q_neg, "alpha_neg": qe.tail_indices[1] if qe else math.nan,
                "chi_q": qe.chi if qe else math.nan,
                "p_q": f"{tallies['QExp']}/{n_ok}" if n_ok else "NA",
            }
            rows.append([kind, est, _f2(row["alpha"]), _f4(row["chi_t"]), row["p_t"],
                         _f2(row["q_pos"]), _f2(row["alpha_pos"]), _f2(row["q_neg"]),
                         _f2(row["alpha_neg"]), _f4(row["chi_q"]), row["p_q"]])
            records.append({**row, "n_pooled": int(pooled.size), "n_stocks": len(series),
                            "excluded_degenerate": excluded, "cell_errors": errors,
                            "stock_errors": stock_errors, "coverage": coverage,
                            "fits": {m: distfit.fit_record(f) for m, f in cells.items()}})
        plot = out / "plots" / f"density_{kind}.csv"
        distfit.write_binned_density(bd, plot, curves)
        result.outputs.append(plot)
    _write_table(out / "table2.csv", cfg, header, rows)
    _write_json(out / "table2.json", {"config": cfg.analysis_dict(), "rows": records})
    result.outputs += [out / "table2.csv", out / "table2.json"]
    return result


# ---------------------------------------------------------------- tail

def gof_seed(seed, kind_idx, dt, side_idx, test_idx):
    ss = np.random.SeedSequence([seed, kind_idx, dt, side_idx, test_idx])
    return int(ss.generate_state(1)[0])


def pooled_at(series_1min, dt):
    agg = [s if dt == 1 else aggregate_timescale(s, dt) for s in series_1min]
    return pool_standardized(agg)


def analyse_tail(pooled, side, cfg, seeds, workers=1):
    """Scan one tail and run both GoF tests. Returns (record, trace fit)."""
    t = cfg.tail
    fit_ = scan_smin(pooled, side, t.min_tail, t.max_candidates)
    verdicts = {}
    for test, sd in zip((GofKind.KS, GofKind.CVM), seeds):
        v = gof_test(pooled, fit_, test, t.n_boot, sd, t.significance, t.strict, workers,
                     t.min_tail, t.max_candidates)
        verdicts[test.value] = {"statistic": v.statistic, "p_value": v.p_value,
                                "pass": int(v.passed), "n_boot": v.n_boot, "seed": v.seed,
                                "significance": v.significance, "strict": v.strict}
    rec = {"s_min": fit_.s_min, "beta": fit_.beta, "n_tail": fit_.n_tail, "ks": fit_.ks,
           "tests": verdicts}
    return rec, fit_


def run_tail(cfg):
    out = Path(cfg.output_dir)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    result = StageResult()
    header = ["kind", "dt", "skewness", "kurtosis", "smin+", "beta+", "smin-", "beta-",
              "KS+", "KS-", "CvM+", "CvM-", "notes"]
    rows, records = [], []
    for k_idx, kind in enumerate(cfg.kinds):
        series = load_series(cfg, kind)
        for dt in cfg.timescales:
            pooled, excluded = pooled_at(series, dt)
            rec = {"kind": kind, "dt": dt, "n": int(pooled.size), "excluded_degenerate": excluded,
                   "tails": {}, "unavailable": {}}
            st = summary_stats(pooled) if pooled.size else None
            rec["skewness"] = st.skewness if st else math.nan
            rec["kurtosis"] = st.kurtosis if st else math.nan
            for s_idx, side in enumerate((Side.POSITIVE, Side.NEGATIVE)):
                seeds = [gof_seed(cfg.seed, k_idx, dt, s_idx, t_idx) for t_idx in (0, 1)]
                try:
                    tail_rec, fit_ = analyse_tail(pooled, side, cfg, seeds, cfg.workers)
                except (ParameterError, EstimationError) as exc:
                    reason = f"{type(exc).__name__}: {exc}"
                    rec["unavailable"][side.value] = reason
                    result.failures.append(f"tail {kind} dt={dt} {side.value}: {reason}")
                    continue
                rec["tails"][side.value] = tail_rec
                trace = out / "traces" / f"{kind}_dt{dt}_{side.value}.csv"
                write_trace(fit_, trace)
                result.outputs.append(trace)

            def cell(side, key, test=None):
                t = rec["tails"].get(side)
                if t is None:
                    return "NA"
                return str(t["tests"][test]["pass"]) if test else _f2(t[key])

            notes = "; ".join(f"{s}: {r}" for s, r in rec["unavailable"].items())
            rows.append([kind, str(dt), _f2(rec["skewness"]), _f2(rec["kurtosis"]),
                         cell("positive", "s_min"), cell("positive", "beta"),
                         cell("negative", "s_min"), cell("negative", "beta"),
                         cell("positive", None, "KS"), cell("negative", None, "KS"),
                         cell("positive", None, "CvM"), cell("negative", None, "CvM"),
                         notes.replace(",", ";")])
            records.append(rec)
    _write_table(out / "table3.csv", cfg, header, rows)
    _write_json(out / "table3.json", {"config": cfg.analysis_dict(), "rows": records})
    result.outputs += [out / "table3.csv", out / "table3.json"]
    return result


# ---------------------------------------------------------------- report

def run_report(cfg):
    """synth (when configured and no inputs given), imbalance, fit, tail."""
    stages = []
    if cfg.synth is not None and not cfg.inputs:
        stages.append(run_synth(cfg))
    stages.append(run_imbalance(cfg))
    stages.append(run_fit(cfg))
    stages.append(run_tail(cfg))
    merged = StageResult()
    for st in stages:
        merged.outputs += st.outputs
        merged.failures += st.failures
    return merged
