"""Order-imbalance series on the trading-minute grid.

OIBNUM counts buy submissions minus sell submissions in a bucket; OIBVOL
does the same with order sizes. The grid only contains trading minutes, so
the lunch break and overnight gaps vanish and a bucket never spans a session
boundary within a day.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateSeriesError, FormatError, ParameterError
from .ingest import CS_PER_SECOND, EventTable, OrderKind, TradingCalendar


class SeriesKind(str, enum.Enum):
    NUM = "NUM"
    VOL = "VOL"


@dataclass(frozen=True, eq=False)
class ImbalanceSeries:
    instrument: str
    kind: SeriesKind
    dt: int
    values: np.ndarray = field(repr=False)
    bucket_start: np.ndarray = field(repr=False)
    minutes_per_day: int = 240

    def __post_init__(self):
        object.__setattr__(self, "kind", SeriesKind(self.kind))
        values = np.asarray(self.values)
        if self.kind is SeriesKind.NUM:
            if values.size and not np.all(np.equal(np.mod(values, 1), 0)):
                raise ParameterError("OIBNUM values must be integers")
            values = values.astype(np.int64)
        else:
            values = values.astype(float)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "bucket_start", np.asarray(self.bucket_start, dtype="datetime64[s]"))
        if self.dt <= 0 or self.minutes_per_day % self.dt:
            raise ParameterError(f"dt={self.dt} does not divide {self.minutes_per_day}")
        if self.values.shape != self.bucket_start.shape:
            raise ParameterError("values and grid differ in length")

    @property
    def buckets_per_day(self):
        return self.minutes_per_day // self.dt

    @property
    def minutes_covered(self):
        return self.values.size * self.dt

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, ImbalanceSeries):
            return NotImplemented
        return (
            (self.instrument, self.kind, self.dt, self.minutes_per_day)
            == (other.instrument, other.kind, other.dt, other.minutes_per_day)
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.bucket_start, other.bucket_start)
        )


@dataclass(frozen=True, eq=False)
class StandardizedSeries:
    instrument: str
    kind: SeriesKind
    dt: int
    values: np.ndarray = field(repr=False)
    mu_oib: float
    sigma_oib: float


@dataclass(frozen=True)
class SummaryStats:
    mu: float
    sigma: float
    skewness: float
    kurtosis: float
    pct_positive: float
    pct_negative: float
    pct_zero: float
    n: int


def trading_grid(calendar, dt):
    """Start time of every ``dt``-minute bucket across the calendar."""
    mpd = calendar.minutes_per_day
    if dt <= 0 or mpd % dt:
        raise ParameterError(f"dt={dt} does not divide {mpd} trading minutes per day")
    starts = calendar.minute_starts_cs()[::dt] // CS_PER_SECOND
    days = np.array(calendar.days, dtype="datetime64[D]").astype("datetime64[s]")
    return (days[:, None] + starts[None, :].astype("timedelta64[s]")).ravel()


def compute_imbalance_series(events, kind, dt, calendar, instrument=None):
    """Bucketed buy-minus-sell imbalance for one instrument.

    Only submissions count. Buckets with no events are 0. Events outside the
    calendar's days or sessions are ignored.
    """
    kind = SeriesKind(kind)
    if not calendar.days:
        raise ParameterError("calendar has no trading days")
    if not isinstance(events, EventTable):
        events = EventTable.from_events(events)
    codes = events.instruments()
    if instrument is None:
        if len(codes) > 1:
            raise ParameterError(f"events hold several instruments {codes}; pass instrument=")
        instrument = codes[0] if codes else ""
    else:
        events = events.for_instrument(instrument)
    grid = trading_grid(calendar, dt)
    per_day = calendar.minutes_per_day // dt

    day = calendar.day_index(events.date)
    minute = calendar.trading_minute(events.time_cs)
    ok = (day >= 0) & (minute >= 0) & (events.kind == OrderKind.SUBMISSION)
    bucket = day[ok] * per_day + minute[ok] // dt
    sign = events.direction[ok].astype(np.int64)
    weight = sign if kind is SeriesKind.NUM else sign * events.size[ok]
    values = np.zeros(grid.size, dtype=np.int64)
    np.add.at(values, bucket, weight)
    return ImbalanceSeries(instrument, kind, dt, values, grid, calendar.minutes_per_day)


def compute_all(events, kinds, dt, calendar):
    """Series for every instrument and kind, keyed by (instrument, kind), sorted."""
    if not isinstance(events, EventTable):
        events = EventTable.from_events(events)
    out = {}
    for code in events.instruments():
        sub = events.for_instrument(code)
        for k in kinds:
            out[(code, SeriesKind(k))] = compute_imbalance_series(sub, k, dt, calendar, code)
    return out


def window_sums(values, per_day, width):
    """Sums over consecutive ``width``-long windows that never cross a day boundary."""
    values = np.asarray(values)
    if width <= 0 or per_day % width:
        raise ParameterError(f"window {width} does not divide {per_day} buckets per day")
    if values.size % per_day:
        raise ParameterError("series does not cover whole trading days")
    return values.reshape(-1, per_day // width, width).sum(axis=2)


def aggregate_timescale(series, target_dt):
    """Aggregate a 1-minute series into ``target_dt``-minute buckets."""
    if series.dt != 1:
        raise ParameterError(f"aggregation needs a 1-minute series, got dt={series.dt}")
    mpd = series.minutes_per_day
    if target_dt <= 0 or mpd % target_dt:
        raise ParameterError(f"target_dt={target_dt} does not divide {mpd}")
    if series.values.size % mpd:
        raise ParameterError("series ends with a partial trading day")
    summed = window_sums(series.values, mpd, target_dt).ravel()
    return ImbalanceSeries(series.instrument, series.kind, target_dt, summed,
                           series.bucket_start[::target_dt], mpd)


def standardize(series):
    """Z-score with the series' own mean and population standard deviation."""
    x = np.asarray(series.values, dtype=float)
    if x.size < 2:
        raise ParameterError("standardisation needs at least 2 values")
    mu = float(np.mean(x))
    sigma = float(np.std(x))
    if sigma == 0.0:
        raise DegenerateSeriesError(f"{series.instrument} {series.kind.value} series is constant")
    return StandardizedSeries(series.instrument, series.kind, series.dt, (x - mu) / sigma, mu, sigma)


def summary_stats(values):
    """Population moments (raw kurtosis) and sign percentages.

    Accepts an ImbalanceSeries or an array. With zero spread the skewness
    and kurtosis are NaN.
    """
    x = np.asarray(getattr(values, "values", values), dtype=float)
    n = x.size
    if n == 0:
        raise ParameterError("summary statistics of an empty series")
    mu = float(np.mean(x))
    d = x - mu
    m2 = float(np.mean(d * d))
    sigma = float(np.sqrt(m2))
    if sigma > 0:
        skew = float(np.mean(d ** 3)) / sigma ** 3
        kurt = float(np.mean(d ** 4)) / m2 ** 2
    else:
        skew = kurt = float("nan")
    pos = np.count_nonzero(x > 0)
    neg = np.count_nonzero(x < 0)
    zero = n - pos - neg
    return SummaryStats(mu, sigma, skew, kurt, 100.0 * pos / n, 100.0 * neg / n, 100.0 * zero / n, n)


def pool_standardized(series_list):
    """Standardise each series on its own and concatenate.

    Returns the pooled values and the instruments left out because their
    series were constant.
    """
    parts, excluded = [], []
    for s in series_list:
        try:
            parts.append(standardize(s).values)
        except DegenerateSeriesError:
            excluded.append(s.instrument)
    pooled = np.concatenate(parts) if parts else np.empty(0)
    return pooled, excluded


def series_path(directory, instrument, kind, dt):
    return Path(directory) / f"{instrument}_{SeriesKind(kind).value}_dt{dt}.csv"


def write_series(series, path):
    """Header block of ``# key=value`` lines, then ``bucket_start,value`` rows."""
    lines = [
        f"# instrument={series.instrument}",
        f"# kind={series.kind.value}",
        f"# dt={series.dt}",
        f"# minutes_per_day={series.minutes_per_day}",
        "bucket_start,value",
    ]
    stamps = np.datetime_as_string(series.bucket_start, unit="s")
    if series.kind is SeriesKind.NUM:
        vals = (str(int(v)) for v in series.values)
    else:
        vals = (f"{v:.6f}" for v in series.values)
    lines.extend(f"{t},{v}" for t, v in zip(stamps, vals))
    Path(path).write_text("\n".join(lines) + "\n")


def read_series(path):
    meta = {}
    stamps, vals = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key.strip()] = value.strip()
                continue
            if line == "bucket_start,value":
                continue
            try:
                t, v = line.split(",")
                stamps.append(np.datetime64(t, "s"))
                vals.append(v)
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: bad series row {line!r}") from exc
    try:
        kind = SeriesKind(meta["kind"])
        dt = int(meta["dt"])
        mpd = int(meta.get("minutes_per_day", 240))
        instrument = meta["instrument"]
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: incomplete series header {meta}") from exc
    values = np.array([int(v) for v in vals], dtype=np.int64) if kind is SeriesKind.NUM \
        else np.array([float(v) for v in vals], dtype=float)
    return ImbalanceSeries(instrument, kind, dt, values, np.array(stamps, dtype="datetime64[s]"), mpd)
