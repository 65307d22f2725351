"""Order-flow records: parsing, serialisation and trading-session filtering.

Events are held column-wise in an :class:`EventTable`, which behaves as a
sequence of :class:`OrderEvent` but keeps numpy arrays underneath so a year
of order flow fits comfortably in memory.

Times are integer centiseconds since midnight; dates are integers YYYYMMDD.
"""
from __future__ import annotations

import csv
import datetime as _dt
import enum
import io
import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import FormatError, ParameterError

log = logging.getLogger(__name__)

CS_PER_SECOND = 100
CS_PER_MINUTE = 60 * CS_PER_SECOND
CS_PER_HOUR = 60 * CS_PER_MINUTE


def clock_cs(hour, minute, second=0, centi=0):
    return hour * CS_PER_HOUR + minute * CS_PER_MINUTE + second * CS_PER_SECOND + centi


# Recorded timestamps must fall between the call auction open and the close.
DAY_FIRST_CS = clock_cs(9, 15)
DAY_LAST_CS = clock_cs(15, 0)
DEFAULT_SESSIONS = ((clock_cs(9, 30), clock_cs(11, 30)), (clock_cs(13, 0), clock_cs(15, 0)))


class Direction(enum.IntEnum):
    BUY = 1
    SELL = -1


class OrderKind(enum.IntEnum):
    SUBMISSION = 0
    CANCELLATION = 1


def date_to_int(d):
    return d.year * 10000 + d.month * 100 + d.day


def int_to_date(v):
    v = int(v)
    return _dt.date(v // 10000, (v // 100) % 100, v % 100)


@dataclass(frozen=True)
class OrderEvent:
    instrument: str
    date: _dt.date
    time_cs: int
    direction: Direction
    kind: OrderKind
    size: int
    price: float

    def __post_init__(self):
        if not DAY_FIRST_CS <= self.time_cs <= DAY_LAST_CS:
            raise ParameterError(f"time {self.time_cs} cs outside 09:15:00.00-15:00:00.00")
        if self.kind is OrderKind.SUBMISSION and self.size <= 0:
            raise ParameterError("submission size must be positive")
        if self.size < 0:
            raise ParameterError("size must be non-negative")
        if not self.price >= 0:
            raise ParameterError("price must be non-negative")

    @property
    def timestamp(self):
        return _dt.datetime.combine(self.date, _dt.time()) + _dt.timedelta(
            milliseconds=10 * self.time_cs
        )


class EventTable(Sequence):
    """Column store of order events; indexing with an int yields an OrderEvent."""

    __slots__ = ("instrument", "date", "time_cs", "direction", "kind", "size", "price")

    def __init__(self, instrument, date, time_cs, direction, kind, size, price):
        self.instrument = np.asarray(instrument, dtype=str)
        self.date = np.asarray(date, dtype=np.int64)
        self.time_cs = np.asarray(time_cs, dtype=np.int64)
        self.direction = np.asarray(direction, dtype=np.int8)
        self.kind = np.asarray(kind, dtype=np.int8)
        self.size = np.asarray(size, dtype=np.int64)
        self.price = np.asarray(price, dtype=float)
        n = self.date.size
        if self.instrument.size == 0 and n == 0:
            self.instrument = np.empty(0, dtype="<U1")
        for name in self.__slots__:
            if getattr(self, name).shape != (n,):
                raise ParameterError(f"column {name!r} does not have length {n}")

    @classmethod
    def empty(cls):
        return cls([], [], [], [], [], [], [])

    @classmethod
    def from_events(cls, events):
        events = list(events)
        return cls(
            [e.instrument for e in events],
            [date_to_int(e.date) for e in events],
            [e.time_cs for e in events],
            [int(e.direction) for e in events],
            [int(e.kind) for e in events],
            [e.size for e in events],
            [e.price for e in events],
        )

    @classmethod
    def concat(cls, tables):
        tables = [t for t in tables if len(t)]
        if not tables:
            return cls.empty()
        cols = [np.concatenate([getattr(t, c) for t in tables]) for c in cls.__slots__]
        return cls(*cols)

    def __len__(self):
        return self.date.size

    def __getitem__(self, item):
        if isinstance(item, (int, np.integer)):
            i = int(item)
            return OrderEvent(
                str(self.instrument[i]),
                int_to_date(self.date[i]),
                int(self.time_cs[i]),
                Direction(int(self.direction[i])),
                OrderKind(int(self.kind[i])),
                int(self.size[i]),
                float(self.price[i]),
            )
        return self.take(item)

    def take(self, selector):
        return EventTable(*(getattr(self, c)[selector] for c in self.__slots__))

    def __eq__(self, other):
        if not isinstance(other, EventTable):
            return NotImplemented
        return all(np.array_equal(getattr(self, c), getattr(other, c)) for c in self.__slots__)

    def __repr__(self):
        return f"EventTable(n={len(self)}, instruments={self.instruments()})"

    def instruments(self):
        return sorted(set(self.instrument.tolist()))

    def for_instrument(self, code):
        return self.take(self.instrument == code)

    def submissions(self):
        return self.take(self.kind == OrderKind.SUBMISSION)


@dataclass(frozen=True)
class TradingCalendar:
    """Trading days plus half-open intraday session windows in centiseconds."""

    days: tuple
    sessions: tuple = DEFAULT_SESSIONS

    def __post_init__(self):
        days = tuple(sorted(set(self.days)))
        object.__setattr__(self, "days", days)
        sessions = tuple(tuple(int(v) for v in s) for s in self.sessions)
        object.__setattr__(self, "sessions", sessions)
        prev_end = -1
        for start, end in sessions:
            if start % CS_PER_MINUTE or end % CS_PER_MINUTE:
                raise ParameterError("session bounds must fall on whole minutes")
            if not prev_end <= start < end:
                raise ParameterError("sessions must be ordered, non-overlapping and non-empty")
            prev_end = end

    @classmethod
    def weekdays(cls, start, n_days, sessions=DEFAULT_SESSIONS):
        """``n_days`` consecutive Monday-Friday dates from ``start``."""
        days, d = [], start
        while len(days) < n_days:
            if d.weekday() < 5:
                days.append(d)
            d += _dt.timedelta(days=1)
        return cls(tuple(days), sessions)

    @property
    def minutes_per_day(self):
        return sum((e - s) // CS_PER_MINUTE for s, e in self.sessions)

    @property
    def total_minutes(self):
        return self.minutes_per_day * len(self.days)

    def day_ints(self):
        return np.array([date_to_int(d) for d in self.days], dtype=np.int64)

    def minute_starts_cs(self):
        """Clock time of each trading minute of a day, in order."""
        return np.concatenate(
            [np.arange(s, e, CS_PER_MINUTE) for s, e in self.sessions]
        ).astype(np.int64)

    def in_session(self, time_cs):
        t = np.asarray(time_cs)
        mask = np.zeros(t.shape, dtype=bool)
        for s, e in self.sessions:
            mask |= (t >= s) & (t < e)
        return mask

    def trading_minute(self, time_cs):
        """Index of the trading minute containing each time, or -1 outside sessions."""
        t = np.asarray(time_cs, dtype=np.int64)
        out = np.full(t.shape, -1, dtype=np.int64)
        offset = 0
        for s, e in self.sessions:
            inside = (t >= s) & (t < e)
            out[inside] = offset + (t[inside] - s) // CS_PER_MINUTE
            offset += (e - s) // CS_PER_MINUTE
        return out

    def day_index(self, date_ints):
        """Position of each YYYYMMDD date in ``days``, or -1 for non-trading days."""
        days = self.day_ints()
        d = np.asarray(date_ints, dtype=np.int64)
        if days.size == 0:
            return np.full(d.shape, -1, dtype=np.int64)
        pos = np.minimum(np.searchsorted(days, d), days.size - 1)
        return np.where(days[pos] == d, pos, -1)

    def to_text(self):
        lines = []
        if self.sessions != DEFAULT_SESSIONS:
            for s, e in self.sessions:
                lines.append(f"session {_hhmm(s)}-{_hhmm(e)}")
        lines.extend(f"{date_to_int(d)}" for d in self.days)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        days, sessions = [], []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("session"):
                try:
                    a, b = line.split()[1].split("-")
                    sessions.append((_parse_hhmm(a), _parse_hhmm(b)))
                except (IndexError, ValueError) as exc:
                    raise FormatError(f"calendar line {lineno}: bad session {raw!r}") from exc
                continue
            try:
                days.append(int_to_date(int(line)))
            except ValueError as exc:
                raise FormatError(f"calendar line {lineno}: bad date {raw!r}") from exc
        return cls(tuple(days), tuple(sessions) if sessions else DEFAULT_SESSIONS)

    @classmethod
    def read(cls, path):
        return cls.from_text(Path(path).read_text())

    def write(self, path):
        Path(path).write_text(self.to_text())


def _hhmm(cs):
    return f"{cs // CS_PER_HOUR:02d}{(cs // CS_PER_MINUTE) % 60:02d}"


def _parse_hhmm(s):
    if len(s) != 4 or not s.isdigit():
        raise ValueError(s)
    return clock_cs(int(s[:2]), int(s[2:]))


CANONICAL_COLUMNS = ("instrument", "date", "time", "direction", "kind", "size", "price")


@dataclass(frozen=True)
class FormatConfig:
    """Column layout and code tables for delimiter-separated order records.

    A layout may carry a single ``aggressiveness`` column instead of the
    ``direction``/``kind`` pair; its codes then map to both at once.
    """

    columns: tuple = CANONICAL_COLUMNS
    delimiter: str = ","
    header: bool = True
    direction_codes: Mapping = field(
        default_factory=lambda: {"B": Direction.BUY, "S": Direction.SELL})
    kind_codes: Mapping = field(
        default_factory=lambda: {"S": OrderKind.SUBMISSION, "C": OrderKind.CANCELLATION})
    aggressiveness_codes: Mapping | None = None
    encoding: str = "utf-8"

    def __post_init__(self):
        cols = tuple(self.columns)
        object.__setattr__(self, "columns", cols)
        required = {"instrument", "date", "time", "size", "price"}
        if "aggressiveness" in cols:
            if self.aggressiveness_codes is None:
                raise ParameterError("aggressiveness column needs aggressiveness_codes")
        else:
            required |= {"direction", "kind"}
        missing = required - set(cols)
        if missing:
            raise ParameterError(f"format is missing columns: {sorted(missing)}")


class ParseResult(NamedTuple):
    events: EventTable
    skipped: int


def _parse_time(text):
    if len(text) != 8 or not text.isdigit():
        raise ValueError(f"time {text!r} is not HHMMSScc")
    h, m, s, c = int(text[:2]), int(text[2:4]), int(text[4:6]), int(text[6:])
    if m >= 60 or s >= 60:
        raise ValueError(f"time {text!r} out of range")
    return clock_cs(h, m, s, c)


def _parse_date(text):
    if len(text) != 8 or not text.isdigit():
        raise ValueError(f"date {text!r} is not YYYYMMDD")
    v = int(text)
    int_to_date(v)  # validates the calendar date
    return v


def _text_stream(stream, encoding):
    if isinstance(stream, io.TextIOBase):
        return stream
    if isinstance(stream, (bytes, bytearray)):
        return io.StringIO(bytes(stream).decode(encoding))
    if isinstance(stream, str):
        return io.StringIO(stream)
    return io.TextIOWrapper(stream, encoding=encoding, newline="")


def parse_order_records(stream, config=None):
    """Parse delimiter-separated order rows.

    Malformed rows are skipped and counted; a header that does not match
    ``config.columns`` raises :class:`FormatError`.
    """
    config = config or FormatConfig()
    text = _text_stream(stream, config.encoding)
    reader = csv.reader(text, delimiter=config.delimiter)
    cols = {name: i for i, name in enumerate(config.columns)}
    width = len(config.columns)

    if config.header:
        header = next(reader, None)
        if header is None:
            return ParseResult(EventTable.empty(), 0)
        if tuple(h.strip() for h in header) != config.columns:
            raise FormatError(f"header {header!r} does not match schema {list(config.columns)}")

    inst, date, tcs, dirn, kind, size, price = [], [], [], [], [], [], []
    skipped = 0
    first_line = 2 if config.header else 1
    for lineno, row in enumerate(reader, first_line):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        try:
            if len(row) != width:
                raise ValueError(f"expected {width} fields, got {len(row)}")
            f = [v.strip() for v in row]
            code = f[cols["instrument"]]
            if not code:
                raise ValueError("empty instrument")
            d = _parse_date(f[cols["date"]])
            t = _parse_time(f[cols["time"]])
            if not DAY_FIRST_CS <= t <= DAY_LAST_CS:
                raise ValueError("time outside 09:15:00.00-15:00:00.00")
            if "aggressiveness" in cols:
                dr, kd = config.aggressiveness_codes[f[cols["aggressiveness"]]]
            else:
                dr = config.direction_codes[f[cols["direction"]]]
                kd = config.kind_codes[f[cols["kind"]]]
            sz = int(f[cols["size"]])
            if sz < 0 or (kd == OrderKind.SUBMISSION and sz == 0):
                raise ValueError(f"bad size {sz}")
            px = float(f[cols["price"]])
            if not (px >= 0 and np.isfinite(px)):
                raise ValueError(f"bad price {px}")
        except (ValueError, KeyError) as exc:
            skipped += 1
            log.debug("skipping malformed line %d: %s", lineno, exc)
            continue
        inst.append(code)
        date.append(d)
        tcs.append(t)
        dirn.append(int(dr))
        kind.append(int(kd))
        size.append(sz)
        price.append(px)
    if skipped:
        log.warning("skipped %d malformed order rows", skipped)
    if not date:
        return ParseResult(EventTable.empty(), skipped)
    return ParseResult(EventTable(inst, date, tcs, dirn, kind, size, price), skipped)


def read_order_file(path, config=None):
    with open(path, "rb") as fh:
        return parse_order_records(fh, config)


def _format_time(cs):
    return (f"{cs // CS_PER_HOUR:02d}{(cs // CS_PER_MINUTE) % 60:02d}"
            f"{(cs // CS_PER_SECOND) % 60:02d}{cs % CS_PER_SECOND:02d}")


def write_order_records(events, stream, config=None):
    """Inverse of :func:`parse_order_records` for a text stream."""
    config = config or FormatConfig()
    if not isinstance(events, EventTable):
        events = EventTable.from_events(events)
    cols = config.columns
    if "aggressiveness" in cols:
        agg = {(int(d), int(k)): code for code, (d, k) in config.aggressiveness_codes.items()}
    dir_code = {int(v): k for k, v in config.direction_codes.items()}
    kind_code = {int(v): k for k, v in config.kind_codes.items()}
    sep = config.delimiter
    if config.header:
        stream.write(sep.join(cols) + "\n")
    inst = events.instrument.tolist()
    date = events.date.tolist()
    tcs = events.time_cs.tolist()
    dirn = events.direction.tolist()
    kind = events.kind.tolist()
    size = events.size.tolist()
    price = events.price.tolist()
    for i in range(len(events)):
        fields = {
            "instrument": inst[i],
            "date": str(date[i]),
            "time": _format_time(tcs[i]),
            "size": str(size[i]),
            "price": repr(price[i]),
        }
        if "aggressiveness" in cols:
            fields["aggressiveness"] = agg[(dirn[i], kind[i])]
        else:
            fields["direction"] = dir_code[dirn[i]]
            fields["kind"] = kind_code[kind[i]]
        stream.write(sep.join(fields[c] for c in cols) + "\n")


def write_order_file(events, path, config=None):
    with open(path, "w", newline="", encoding=(config or FormatConfig()).encoding) as fh:
        write_order_records(events, fh, config)


def filter_continuous_auction(events, calendar):
    """Keep the events on a trading day whose time lies inside a session window."""
    if not isinstance(events, EventTable):
        events = EventTable.from_events(events)
    keep = (calendar.day_index(events.date) >= 0) & calendar.in_session(events.time_cs)
    return events.take(keep)
