"""Power-law tail index estimation with KS-minimising cutoff selection.

One tail is handled at a time as a set of positive magnitudes (the negative
tail is passed in as ``|S|`` of the negative values). For a cutoff ``s_min``
the tail exponent is the closed-form maximum-likelihood estimate

    beta = n / sum(log(S_i / s_min)),   S_i >= s_min

and the cutoff itself is the candidate minimising the Kolmogorov-Smirnov
distance between the empirical tail CDF and ``1 - (S / s_min) ** -beta``.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

DEFAULT_MIN_TAIL = 100
DEFAULT_MAX_CANDIDATES = 500
DEFAULT_N_BOOT = 1000
DEFAULT_SIGNIFICANCE = 0.1
# Replicas per RNG stream. Fixed so the stream layout never depends on the
# worker count.
BOOT_CHUNK = 100


class Side(str, enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


class GofKind(str, enum.Enum):
    KS = "KS"
    CVM = "CvM"


@dataclass(frozen=True, eq=False)
class TailFit:
    side: Side
    s_min: float
    beta: float
    n_tail: int
    ks: float
    trace_s_min: np.ndarray = field(repr=False)
    trace_ks: np.ndarray = field(repr=False)
    trace_beta: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not (self.beta > 0 and self.s_min > 0):
            raise ParameterError(f"invalid tail fit: beta={self.beta}, s_min={self.s_min}")
        if not 0.0 <= self.ks <= 1.0:
            raise ParameterError(f"KS statistic {self.ks} outside [0, 1]")

    @property
    def trace(self):
        """(s_min, ks, beta) triples in candidate order."""
        return list(zip(self.trace_s_min.tolist(), self.trace_ks.tolist(), self.trace_beta.tolist()))

    def __eq__(self, other):
        if not isinstance(other, TailFit):
            return NotImplemented
        return (
            (self.side, self.s_min, self.beta, self.n_tail, self.ks)
            == (other.side, other.s_min, other.beta, other.n_tail, other.ks)
            and np.array_equal(self.trace_s_min, other.trace_s_min)
            and np.array_equal(self.trace_ks, other.trace_ks)
            and np.array_equal(self.trace_beta, other.trace_beta)
        )


@dataclass(frozen=True)
class GofVerdict:
    test: GofKind
    statistic: float
    p_value: float
    passed: bool
    n_boot: int
    seed: int
    significance: float
    strict: bool = False


def _tail_array(samples, s_min):
    x = np.asarray(samples, dtype=float)
    if not s_min > 0:
        raise ParameterError(f"s_min must be positive, got {s_min}")
    if x.size < 1:
        raise ParameterError("empty tail sample")
    if np.any(x < s_min):
        raise ParameterError("tail samples must all be >= s_min")
    return x


def csn_beta(samples, s_min):
    """Closed-form maximum-likelihood tail exponent above ``s_min``."""
    x = _tail_array(samples, s_min)
    if x.size < 2:
        raise ParameterError("need at least 2 tail samples")
    total = float(np.sum(np.log(x / s_min)))
    if total <= 0.0:
        raise ParameterError("all tail samples equal s_min: beta is infinite")
    return x.size / total


def pareto_cdf(x, s_min, beta):
    return -np.expm1(-beta * np.log(np.asarray(x, dtype=float) / s_min))


def _ks_logratio(lr, beta):
    """KS distance for ascending log-ratios ``log(x / s_min)``."""
    n = lr.size
    cdf = -np.expm1(-beta * lr)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))


def _ks_sorted(xs, s_min, beta):
    return _ks_logratio(np.log(xs / s_min), beta)


def _cvm_sorted(xs, s_min, beta):
    n = xs.size
    cdf = pareto_cdf(xs, s_min, beta)
    i = np.arange(1, n + 1)
    return float(1.0 / (12 * n) + np.sum(((2 * i - 1) / (2 * n) - cdf) ** 2))


def ks_statistic(samples, s_min, beta):
    """Two-sided sup distance between the empirical tail CDF and the power law."""
    x = _tail_array(samples, s_min)
    return _ks_sorted(np.sort(x), s_min, beta)


def cvm_statistic(samples, s_min, beta):
    """Cramer-von Mises statistic, order-statistic form."""
    x = _tail_array(samples, s_min)
    return _cvm_sorted(np.sort(x), s_min, beta)


def _candidate_indices(xs, min_tail, max_candidates):
    """Indices into ascending ``xs`` of the first occurrence of each candidate value."""
    n = xs.size
    values, first = np.unique(xs, return_index=True)
    tail_sizes = n - first
    lo = np.quantile(xs, 0.5)
    keep = (values >= lo) & (tail_sizes >= min_tail)
    idx = first[keep]
    if idx.size > max_candidates:
        pick = np.unique(np.round(np.linspace(0, idx.size - 1, max_candidates)).astype(int))
        idx = idx[pick]
    return idx


def one_sided(samples, side):
    """Magnitudes of the strictly positive (or strictly negative) values."""
    x = np.asarray(samples, dtype=float)
    side = Side(side)
    if side is Side.POSITIVE:
        return x[x > 0]
    return -x[x < 0]


def scan_smin(samples, side=Side.POSITIVE, min_tail=DEFAULT_MIN_TAIL,
              max_candidates=DEFAULT_MAX_CANDIDATES):
    """Select ``s_min`` by minimising the KS distance over a candidate grid.

    ``samples`` are already-signed values; the requested side is extracted
    (negative values enter as magnitudes). Candidates are the unique sample
    values from the median up to the largest value still leaving
    ``min_tail`` points at or above it, thinned to ``max_candidates``.
    Ties in KS go to the smallest cutoff.
    """
    side = Side(side)
    xs = np.sort(one_sided(samples, side))
    if xs.size < min_tail + 1:
        raise ParameterError(
            f"{side.value} tail has {xs.size} samples, need at least {min_tail + 1}"
        )
    idx = _candidate_indices(xs, min_tail, max_candidates)
    if idx.size == 0:
        raise ParameterError(f"no cutoff candidate leaves {min_tail} tail samples")

    n_tail = xs.size - idx
    s_mins = xs[idx]
    betas = np.full(idx.size, np.inf)
    ks = np.full(idx.size, np.inf)
    for j, k in enumerate(idx):
        # log-ratios, not differences of logs, so rescaling the data is exact
        lr = np.log(xs[k:] / s_mins[j])
        total = lr.sum()
        if total <= 0.0:
            continue
        betas[j] = lr.size / total
        ks[j] = _ks_logratio(lr, betas[j])
    if not np.any(np.isfinite(ks)):
        raise ParameterError("every candidate cutoff has a degenerate tail")
    best = int(np.argmin(ks))  # first minimum == smallest s_min
    return TailFit(
        side=side,
        s_min=float(s_mins[best]),
        beta=float(betas[best]),
        n_tail=int(n_tail[best]),
        ks=float(ks[best]),
        trace_s_min=s_mins.astype(float),
        trace_ks=ks,
        trace_beta=betas.astype(float),
    )


def fit_tail_at(samples, s_min, side=Side.POSITIVE):
    """TailFit at a fixed, externally chosen cutoff (single-candidate trace)."""
    side = Side(side)
    x = one_sided(samples, side)
    tail = np.sort(x[x >= s_min])
    beta = csn_beta(tail, s_min)
    ks = _ks_sorted(tail, s_min, beta)
    return TailFit(side, float(s_min), float(beta), int(tail.size), ks,
                   np.array([float(s_min)]), np.array([ks]), np.array([beta]))


def _statistic_rows(rows, s_min, kind):
    """Statistic for each row of an (m, n) block of sorted tail samples, beta re-fit per row."""
    m, n = rows.shape
    betas = n / np.sum(np.log(rows / s_min), axis=1)
    cdf = -np.expm1(-betas[:, None] * np.log(rows / s_min))
    i = np.arange(1, n + 1)
    if kind is GofKind.KS:
        d_plus = np.max(i / n - cdf, axis=1)
        d_minus = np.max(cdf - (i - 1) / n, axis=1)
        return np.maximum(d_plus, d_minus)
    return 1.0 / (12 * n) + np.sum(((2 * i - 1) / (2 * n) - cdf) ** 2, axis=1)


def _tail_conditional_chunk(seed_seq, size, n_tail, s_min, beta, kind):
    rng = np.random.default_rng(seed_seq)
    u = 1.0 - rng.random((size, n_tail))
    rows = np.sort(s_min * u ** (-1.0 / beta), axis=1)
    return _statistic_rows(rows, s_min, kind)


def _strict_chunk(seed_seq, size, body, n_total, fit, kind, min_tail, max_candidates):
    """Semiparametric replicas: body resampled, tail Pareto, cutoff re-scanned."""
    rng = np.random.default_rng(seed_seq)
    out = np.empty(size)
    p_tail = fit.n_tail / n_total
    for r in range(size):
        n_t = rng.binomial(n_total, p_tail)
        tail = fit.s_min * (1.0 - rng.random(n_t)) ** (-1.0 / fit.beta)
        b = rng.choice(body, size=n_total - n_t, replace=True) if body.size else np.empty(0)
        sample = np.concatenate([b, tail])
        try:
            refit = scan_smin(sample, Side.POSITIVE, min_tail, max_candidates)
        except ParameterError:
            out[r] = np.inf
            continue
        xs = np.sort(sample[sample >= refit.s_min])
        out[r] = refit.ks if kind is GofKind.KS else _cvm_sorted(xs, refit.s_min, refit.beta)
    return out


def gof_test(samples, fit, test=GofKind.KS, n_boot=DEFAULT_N_BOOT, seed=0,
             significance=DEFAULT_SIGNIFICANCE, strict=False, workers=1,
             min_tail=DEFAULT_MIN_TAIL, max_candidates=DEFAULT_MAX_CANDIDATES):
    """Bootstrap goodness-of-fit test of a power-law tail fit.

    The default replicas draw ``n_tail`` points from the fitted Pareto at the
    fitted cutoff and re-estimate beta at that same cutoff. With
    ``strict=True`` the body below the cutoff is resampled as well and the
    cutoff is re-scanned in every replica. The p-value is the fraction of
    replicas whose statistic is at least the observed one.
    """
    test = GofKind(test)
    if not isinstance(n_boot, (int, np.integer)) or n_boot < 100:
        raise ParameterError(f"n_boot must be an integer >= 100, got {n_boot!r}")
    if not 0.0 < significance < 1.0:
        raise ParameterError(f"significance must lie in (0, 1), got {significance}")

    x = one_sided(samples, fit.side)
    tail = np.sort(x[x >= fit.s_min])
    if tail.size != fit.n_tail:
        raise ParameterError("fit does not match samples: tail size differs")
    if test is GofKind.KS:
        observed = _ks_sorted(tail, fit.s_min, fit.beta)
    else:
        observed = _cvm_sorted(tail, fit.s_min, fit.beta)

    n_chunks = math.ceil(n_boot / BOOT_CHUNK)
    streams = np.random.SeedSequence(seed).spawn(n_chunks)
    sizes = [min(BOOT_CHUNK, n_boot - c * BOOT_CHUNK) for c in range(n_chunks)]
    if strict:
        body = x[x < fit.s_min]
        jobs = [(_strict_chunk, (s, m, body, x.size, fit, test, min_tail, max_candidates))
                for s, m in zip(streams, sizes)]
    else:
        jobs = [(_tail_conditional_chunk, (s, m, fit.n_tail, fit.s_min, fit.beta, test))
                for s, m in zip(streams, sizes)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda job: job[0](*job[1]), jobs))
    else:
        parts = [fn(*args) for fn, args in jobs]
    stats = np.concatenate(parts)
    p = float(np.count_nonzero(stats >= observed)) / n_boot
    return GofVerdict(test, observed, p, p >= significance, int(n_boot), int(seed),
                      float(significance), bool(strict))


def write_trace(fit, path):
    """Write the scan trace as ``s_min,ks,beta`` rows."""
    with open(path, "w", newline="") as fh:
        fh.write("s_min,ks,beta\n")
        for s, k, b in zip(fit.trace_s_min, fit.trace_ks, fit.trace_beta):
            fh.write(f"{s:.10g},{k:.10g},{b:.10g}\n")


def read_trace(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1], data[:, 2]
