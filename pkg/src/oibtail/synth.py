"""Seeded generators: heavy-tailed samples with known parameters and
synthetic order flow.

Every generator is a pure function of its parameters and seed. Order flow
for each (instrument, day) pair draws from its own stream derived from
``SeedSequence([seed, instrument_index, day_index])``, so pairs can be
generated in any order or in parallel with identical output.
"""
from __future__ import annotations

import datetime as _dt
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .ingest import CS_PER_MINUTE, EventTable, OrderKind, TradingCalendar, date_to_int


def _rng(seed):
    return np.random.default_rng(seed)


def pareto_from_uniform(u, beta, s_min):
    return s_min * np.asarray(u, dtype=float) ** (-1.0 / beta)


def gen_pareto(n, beta, s_min=1.0, seed=0):
    """``s_min * U**(-1/beta)`` with U uniform on (0, 1]."""
    if n < 1 or not beta > 0 or not s_min > 0:
        raise ParameterError(f"invalid Pareto parameters n={n}, beta={beta}, s_min={s_min}")
    u = 1.0 - _rng(seed).random(n)
    return pareto_from_uniform(u, beta, s_min)


def gen_student(n, alpha, L=1.0, seed=0):
    """Draws from the (alpha, mu=0, L) Student density: t variate / sqrt(L)."""
    if n < 1 or not alpha > 0 or not L > 0:
        raise ParameterError(f"invalid Student parameters n={n}, alpha={alpha}, L={L}")
    return _rng(seed).standard_t(alpha, n) / math.sqrt(L)


def qexp_from_uniform(u, nu, q):
    """Inverse of ``F(s) = 1 - (1 + (q-1) nu s) ** (-1/(q-1))``."""
    r = q - 1.0
    return np.expm1(-r * np.log1p(-np.asarray(u, dtype=float))) / (r * nu)


def gen_qexp(n, nu, q, seed=0):
    """Half-line q-exponential draws by inverse CDF."""
    if n < 1 or not nu > 0 or not q > 1:
        raise ParameterError(f"invalid q-exponential parameters n={n}, nu={nu}, q={q}")
    return qexp_from_uniform(_rng(seed).random(n), nu, q)


# ---------------------------------------------------------------- order flow

@dataclass(frozen=True)
class SizeLaw:
    """Order size law: ``pareto`` (beta, s_min), ``lognormal`` (m, s) or ``constant`` (k)."""

    name: str = "constant"
    params: tuple = (100,)

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        ok = {
            "pareto": lambda p: len(p) == 2 and p[0] > 0 and p[1] > 0,
            "lognormal": lambda p: len(p) == 2 and p[1] > 0,
            "constant": lambda p: len(p) == 1 and p[0] >= 1 and p[0] == int(p[0]),
        }
        if self.name not in ok or not ok[self.name](self.params):
            raise ParameterError(f"invalid size law {self.name}{self.params}")

    def draw(self, rng, n):
        if self.name == "constant":
            return np.full(n, int(self.params[0]), dtype=np.int64)
        if self.name == "pareto":
            x = pareto_from_uniform(1.0 - rng.random(n), self.params[0], self.params[1])
        else:
            x = rng.lognormal(self.params[0], self.params[1], n)
        return np.maximum(1, np.rint(np.minimum(x, 1e15))).astype(np.int64)


@dataclass(frozen=True)
class Driver:
    """Buy-probability driver: ``iid`` or ``student`` (alpha, L, gain)."""

    name: str = "iid"
    params: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.name == "iid":
            ok = self.params == ()
        elif self.name == "student":
            ok = len(self.params) == 3 and self.params[0] > 0 and self.params[1] > 0
        else:
            ok = False
        if not ok:
            raise ParameterError(f"invalid driver {self.name}{self.params}")


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    instruments: tuple = ("000001",)
    n_days: int = 5
    start_date: str = "2003-01-02"
    events_per_minute: float = 5.0
    buy_prob: float = 0.5
    cancel_prob: float = 0.0
    size_law: SizeLaw = field(default_factory=SizeLaw)
    driver: Driver = field(default_factory=Driver)
    base_price: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "instruments", tuple(str(i) for i in self.instruments))
        if isinstance(self.size_law, dict):
            object.__setattr__(self, "size_law", SizeLaw(**self.size_law))
        if isinstance(self.driver, dict):
            object.__setattr__(self, "driver", Driver(**self.driver))
        if not self.instruments or len(set(self.instruments)) != len(self.instruments):
            raise ParameterError("instruments must be non-empty and unique")
        if self.n_days < 1 or not self.events_per_minute > 0 or not self.base_price > 0:
            raise ParameterError("n_days, events_per_minute and base_price must be positive")
        if not (0 <= self.buy_prob <= 1 and 0 <= self.cancel_prob <= 1):
            raise ParameterError("probabilities must lie in [0, 1]")
        _dt.date.fromisoformat(self.start_date)

    def calendar(self):
        return TradingCalendar.weekdays(_dt.date.fromisoformat(self.start_date), self.n_days)

    def as_dict(self):
        return {
            "seed": self.seed,
            "instruments": list(self.instruments),
            "n_days": self.n_days,
            "start_date": self.start_date,
            "events_per_minute": self.events_per_minute,
            "buy_prob": self.buy_prob,
            "cancel_prob": self.cancel_prob,
            "size_law": {"name": self.size_law.name, "params": list(self.size_law.params)},
            "driver": {"name": self.driver.name, "params": list(self.driver.params)},
            "base_price": self.base_price,
        }


def _day_events(config, calendar, inst_idx, day_idx):
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, inst_idx, day_idx]))
    starts = calendar.minute_starts_cs()
    n_min = starts.size
    counts = rng.poisson(config.events_per_minute, n_min)
    if config.driver.name == "student":
        alpha, L, gain = config.driver.params
        x = rng.standard_t(alpha, n_min) / math.sqrt(L)
        p_buy = np.clip(0.5 + gain * x, 0.02, 0.98)
    else:
        p_buy = np.full(n_min, config.buy_prob)
    total = int(counts.sum())
    minute = np.repeat(np.arange(n_min), counts)
    time_cs = np.sort(starts[minute] + rng.integers(0, CS_PER_MINUTE, total))
    # sorting keeps minutes grouped because offsets stay inside each minute
    direction = np.where(rng.random(total) < p_buy[minute], 1, -1).astype(np.int8)
    kind = np.where(rng.random(total) < config.cancel_prob,
                    OrderKind.CANCELLATION, OrderKind.SUBMISSION).astype(np.int8)
    size = config.size_law.draw(rng, total)
    steps = rng.integers(-1, 2, total)
    price = np.round(np.maximum(0.01, config.base_price + 0.01 * np.cumsum(steps)), 2)
    date = np.full(total, date_to_int(calendar.days[day_idx]), dtype=np.int64)
    inst = np.full(total, config.instruments[inst_idx])
    return EventTable(inst, date, time_cs, direction, kind, size, price)


def gen_order_flow(config, workers=1):
    """Synthetic continuous-auction order flow, instrument-major then by day."""
    if not isinstance(config, GenConfig):
        raise ParameterError("gen_order_flow needs a GenConfig")
    calendar = config.calendar()
    jobs = [(i, d) for i in range(len(config.instruments)) for d in range(config.n_days)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda j: _day_events(config, calendar, *j), jobs))
    else:
        parts = [_day_events(config, calendar, i, d) for i, d in jobs]
    return EventTable.concat(parts)
