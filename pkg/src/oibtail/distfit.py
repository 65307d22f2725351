"""Student and q-exponential densities, calibrated by MLE and by NLSE.

Densities
---------
Student, location ``mu`` (pinned at 0 for standardised data), shape
``alpha`` and inverse-squared scale ``L``::

    f_t(s) = sqrt(L) * alpha**(alpha/2) / B(1/2, alpha/2)
             * (alpha + L*(s - mu)**2) ** (-(alpha + 1)/2)

q-exponential on one half-line, evaluated on ``|s|``::

    f_q(s) = nu * (1 + (q - 1)*nu*|s|) ** (-q/(q - 1)),   q > 1

Both decay as power laws, with tail index ``alpha`` and ``1/(q - 1)``.

Estimators
----------
MLE maximises the log-likelihood. NLSE minimises the squared distance
between log10 of the binned empirical density and log10 of the model at
the bin centres. Both use Nelder-Mead from the best five points of a
coarse grid and finish with a gradient polish; a fit counts as converged
when the gradient of the objective in log-parameters is below ``GRAD_TOL``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize, special

from .errors import EstimationError, ParameterError
from .tailfit import Side

LN10 = math.log(10.0)
GRAD_TOL = 1e-8
N_STARTS = 5
# log-parameter box; outside it the objective is +inf
LOG_BOUND = 30.0

STUDENT_GRID = [(a, L) for a in (0.5, 1.0, 2.0, 4.0, 8.0) for L in (0.1, 1.0, 10.0)]
QEXP_GRID = [(nu, q) for nu in (0.1, 1.0, 10.0) for q in (1.05, 1.2, 1.5, 2.0, 3.0)]


class Model(str, enum.Enum):
    STUDENT = "Student"
    QEXP = "QExp"


class Estimator(str, enum.Enum):
    MLE = "MLE"
    NLSE = "NLSE"


TWO_SIDED = "two-sided"


@dataclass(frozen=True)
class StudentParams:
    alpha: float
    L: float
    mu: float = 0.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.L > 0 and math.isfinite(self.mu)):
            raise ParameterError(f"invalid Student parameters {self}")


@dataclass(frozen=True)
class QExpParams:
    nu: float
    q: float
    side: Side = Side.POSITIVE

    def __post_init__(self):
        object.__setattr__(self, "side", Side(self.side))
        if not (self.nu > 0 and self.q > 1):
            raise ParameterError(f"invalid q-exponential parameters nu={self.nu}, q={self.q}")


# ---------------------------------------------------------------- densities

def student_logpdf(s, p):
    a, L = p.alpha, p.L
    z = L * (np.asarray(s, dtype=float) - p.mu) ** 2 / a
    return 0.5 * math.log(L / a) - special.betaln(0.5, 0.5 * a) - 0.5 * (a + 1) * np.log1p(z)


def student_pdf(s, p):
    """Student density; scalar in, scalar out."""
    if not isinstance(p, StudentParams):
        raise ParameterError("student_pdf needs StudentParams")
    out = np.exp(student_logpdf(s, p))
    return float(out) if np.ndim(out) == 0 else out


def student_cdf(s, p):
    t = (np.asarray(s, dtype=float) - p.mu) * math.sqrt(p.L)
    return special.stdtr(p.alpha, t)


def qexp_logpdf(s, p):
    r = p.q - 1.0
    x = np.abs(np.asarray(s, dtype=float))
    return math.log(p.nu) - (p.q / r) * np.log1p(r * p.nu * x)


def qexp_pdf(s, p):
    """q-exponential density at ``|s|``."""
    if not isinstance(p, QExpParams):
        raise ParameterError("qexp_pdf needs QExpParams")
    out = np.exp(qexp_logpdf(s, p))
    return float(out) if np.ndim(out) == 0 else out


def qexp_cdf(s, p):
    """CDF on the half-line: ``1 - (1 + (q-1) nu s) ** (-1/(q-1))``."""
    r = p.q - 1.0
    x = np.asarray(s, dtype=float)
    return -np.expm1(-np.log1p(r * p.nu * x) / r)


def qexp_sf(s, p):
    r = p.q - 1.0
    return np.exp(-np.log1p(r * p.nu * np.asarray(s, dtype=float)) / r)


def alpha_from_q(q):
    if not q > 1:
        raise ParameterError(f"q={q} <= 1 has no power-law tail")
    return 1.0 / (q - 1.0)


def q_from_alpha(alpha):
    if not alpha > 0:
        raise ParameterError(f"alpha={alpha} must be positive")
    return 1.0 + 1.0 / alpha


# Per-point log-density and its gradient in log-parameters.

def _student_terms(s, theta, grad=True):
    la, lL = theta
    a, L = math.exp(la), math.exp(lL)
    y = np.asarray(s) ** 2
    z = L * y / a
    lz = np.log1p(z)
    logf = 0.5 * (lL - la) - special.betaln(0.5, 0.5 * a) - 0.5 * (a + 1) * lz
    if not grad:
        return logf, None, None
    frac = z / (1 + z)
    dpsi = special.digamma(0.5 * a) - special.digamma(0.5 * (a + 1))
    d_la = -0.5 - 0.5 * a * dpsi - 0.5 * a * lz + 0.5 * (a + 1) * frac
    d_lL = 0.5 - 0.5 * (a + 1) * frac
    return logf, d_la, d_lL


def _qexp_terms(x, theta, grad=True):
    lnu, lr = theta
    nu, r = math.exp(lnu), math.exp(lr)
    u = r * nu * np.asarray(x)
    lu = np.log1p(u)
    logf = lnu - (1 + r) / r * lu
    if not grad:
        return logf, None, None
    frac = u / (1 + u)
    d_lnu = 1 - (1 + r) / r * frac
    # r * d/dr of -(1+r)/r * log1p(r nu x)
    d_lr = lu / r - (1 + r) / r * frac
    return logf, d_lnu, d_lr


def _student_theta(p):
    return np.array([math.log(p.alpha), math.log(p.L)])


def _qexp_theta(nu, q):
    return np.array([math.log(nu), math.log(q - 1.0)])


# ---------------------------------------------------------------- optimiser

@dataclass(frozen=True)
class OptResult:
    theta: np.ndarray
    value: float
    grad_norm: float
    converged: bool
    n_evals: int
    n_starts: int


def _guard(fun):
    def wrapped(theta, grad=True):
        theta = np.asarray(theta, dtype=float)
        if not np.all(np.abs(theta) <= LOG_BOUND + 1e-9):
            return math.inf, np.zeros_like(theta)
        with np.errstate(all="ignore"):
            f, g = fun(theta, grad)
        if not math.isfinite(f) or (grad and not np.all(np.isfinite(g))):
            return math.inf, np.zeros_like(theta)
        return f, g
    return wrapped


def _projected(theta, g):
    """Gradient with components zeroed where a bound blocks descent."""
    at_bound = np.abs(theta) >= LOG_BOUND - 1e-3
    blocked = at_bound & (np.sign(theta) * -g > 0)
    return np.where(blocked, 0.0, g), ~blocked


def _newton_polish(fun, theta, grad_tol, counter, max_iter=20, h=1e-5):
    """Newton steps on the free coordinates, Hessian by central differences.

    Near the optimum, objective differences fall below float resolution
    before the gradient does, so line searches on the objective stall; a
    step is kept here whenever it shrinks the projected gradient without
    raising the objective by more than rounding. Coordinates pinned at the
    log bound with descent pointing outward stay fixed.
    """
    theta = np.clip(theta, -LOG_BOUND, LOG_BOUND)
    f, g = fun(theta)
    pg, free = _projected(theta, g)
    gnorm = np.linalg.norm(pg)
    for _ in range(max_iter):
        if gnorm < grad_tol / 100 or not free.any():
            break
        idx = np.flatnonzero(free)
        H = np.empty((idx.size, idx.size))
        for k, j in enumerate(idx):
            e = np.zeros_like(theta)
            e[j] = h
            H[:, k] = ((fun(theta + e)[1] - fun(theta - e)[1]) / (2 * h))[idx]
        counter[0] += 2 * idx.size + 1
        H = 0.5 * (H + H.T)
        try:
            step = np.zeros_like(theta)
            step[idx] = np.linalg.solve(H, g[idx])
        except np.linalg.LinAlgError:
            break
        cand = np.clip(theta - step, -LOG_BOUND, LOG_BOUND)
        if not np.all(np.isfinite(cand)):
            break
        f_new, g_new = fun(cand)
        pg_new, free_new = _projected(cand, g_new)
        slack = 1e-12 * max(abs(f), 1.0)
        if not (np.linalg.norm(pg_new) < gnorm and f_new <= f + slack):
            break
        theta, f, g, free, gnorm = cand, f_new, g_new, free_new, np.linalg.norm(pg_new)
    return theta, f


def _minimize(fun, grid, grad_tol=GRAD_TOL):
    """Nelder-Mead multi-start from the best grid points, then BFGS and Newton polish."""
    fun = _guard(fun)
    counter = [0]

    def f_only(theta):
        counter[0] += 1
        return fun(theta, False)[0]

    def f_grad(theta):
        counter[0] += 1
        return fun(theta)

    grid_vals = [f_only(t) for t in grid]
    order = sorted(range(len(grid)), key=lambda i: (grid_vals[i], i))
    starts = [np.asarray(grid[i], dtype=float) for i in order[:N_STARTS]
              if math.isfinite(grid_vals[i])]
    if not starts:
        raise EstimationError("objective is not finite at any starting point")

    best = None
    for x0 in starts:
        f0 = f_only(x0)
        res = optimize.minimize(
            f_only, x0, method="Nelder-Mead",
            options={"xatol": 1e-8, "fatol": 1e-10 * max(abs(f0), 1e-300),
                     "maxiter": 5000, "maxfev": 10000},
        )
        if best is None or res.fun < best.fun:
            best = res
    theta, value = np.asarray(best.x, dtype=float), float(best.fun)
    pol = optimize.minimize(f_grad, theta, jac=True, method="BFGS",
                            options={"gtol": grad_tol / 10, "maxiter": 1000})
    if pol.fun <= value:
        theta, value = np.asarray(pol.x, dtype=float), float(pol.fun)
    theta, value = _newton_polish(fun, theta, grad_tol, counter)
    gnorm = float(np.linalg.norm(_projected(theta, fun(theta)[1])[0]))
    return OptResult(theta, value, gnorm, bool(math.isfinite(value) and gnorm < grad_tol),
                     counter[0], len(starts))


def _require_converged(opt, what, extra):
    diag = {"grad_norm": opt.grad_norm, "objective": opt.value, "n_evals": opt.n_evals,
            "n_starts": opt.n_starts,
            "at_bound": bool(np.any(np.abs(opt.theta) >= LOG_BOUND - 1e-3)), **extra}
    if not opt.converged:
        raise EstimationError(f"{what} did not converge (gradient norm {opt.grad_norm:.3g})", diag)
    return diag


# ---------------------------------------------------------------- binning

@dataclass(frozen=True)
class BinSpec:
    n_bins: int = 25
    s_lo: float = 0.1
    min_count: int = 3
    edges: tuple | None = None  # explicit edges on |S|, overrides the log grid

    def __post_init__(self):
        if self.edges is None and (self.n_bins < 1 or not self.s_lo > 0):
            raise ParameterError(f"invalid bin spec {self}")


@dataclass(frozen=True, eq=False)
class BinnedDensity:
    """Empirical density on |S| bins.

    ``centers`` carry the sign of their side: two-sided densities list the
    negative side (negative centres) first. ``n_total`` is the size of the
    whole sample, so each side's densities integrate to that side's share of
    the mass inside the binned range.
    """

    centers: np.ndarray
    densities: np.ndarray
    counts: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    side: str
    n_total: int
    n_positive: int
    n_negative: int

    @property
    def widths(self):
        return self.hi - self.lo

    def part(self, side):
        """Bins of one side (centres still signed)."""
        mask = self.centers > 0 if Side(side) is Side.POSITIVE else self.centers < 0
        return self.centers[mask], self.densities[mask], self.counts[mask]

    def side_weight(self, side):
        n = self.n_positive if Side(side) is Side.POSITIVE else self.n_negative
        return n / self.n_total


def _side_edges(x, spec):
    if spec.edges is not None:
        return np.asarray(spec.edges, dtype=float)
    top = x.max() if x.size else 0.0
    if top <= spec.s_lo:
        return None
    edges = np.logspace(math.log10(spec.s_lo), math.log10(top), spec.n_bins + 1)
    edges[0], edges[-1] = spec.s_lo, top  # logspace may round the ends inward
    return edges


def make_binned_density(samples, side=TWO_SIDED, spec=None):
    """Log-binned empirical density; empty bins omitted."""
    spec = spec or BinSpec()
    s = np.asarray(samples, dtype=float)
    if s.size == 0:
        raise ParameterError("cannot bin an empty sample")
    sides = [Side.NEGATIVE, Side.POSITIVE] if side == TWO_SIDED else [Side(side)]
    n_pos = int(np.count_nonzero(s > 0))
    n_neg = int(np.count_nonzero(s < 0))
    parts = []
    for sd in sides:
        x = s[s > 0] if sd is Side.POSITIVE else -s[s < 0]
        edges = _side_edges(x, spec)
        if edges is None:
            continue
        counts, _ = np.histogram(x, bins=edges)
        lo, hi = edges[:-1], edges[1:]
        if spec.edges is None:
            centers = np.sqrt(lo * hi)
        else:
            centers = 0.5 * (lo + hi)
        keep = counts > 0
        sign = 1.0 if sd is Side.POSITIVE else -1.0
        dens = counts / (s.size * (hi - lo))
        part = (sign * centers[keep], dens[keep], counts[keep], lo[keep], hi[keep])
        if sd is Side.NEGATIVE:
            part = tuple(a[::-1] for a in part)
        parts.append(part)
    if not parts or all(p[0].size == 0 for p in parts):
        raise ParameterError(f"no samples above s_lo={spec.s_lo} on the requested side")
    cols = [np.concatenate([p[i] for p in parts]) for i in range(5)]
    return BinnedDensity(cols[0], cols[1], cols[2].astype(np.int64), cols[3], cols[4],
                         side if side == TWO_SIDED else Side(side).value, int(s.size), n_pos, n_neg)


def exact_binned_density(pdf, edges, side=TWO_SIDED, n_total=10 ** 12, weights=(1.0, 1.0)):
    """Noise-free BinnedDensity holding ``pdf`` evaluated at the bin centres.

    ``pdf`` takes signed positions. ``weights`` are the (positive, negative)
    side shares of probability mass. Counts are the expected counts for
    ``n_total`` draws.
    """
    edges = np.asarray(edges, dtype=float)
    lo, hi = edges[:-1], edges[1:]
    mags = np.sqrt(lo * hi)
    sides = [Side.NEGATIVE, Side.POSITIVE] if side == TWO_SIDED else [Side(side)]
    parts = []
    for sd in sides:
        sign = 1.0 if sd is Side.POSITIVE else -1.0
        c = sign * mags
        d = np.asarray(pdf(c), dtype=float)
        cnt = np.round(n_total * d * (hi - lo)).astype(np.int64)
        part = (c, d, cnt, lo, hi)
        if sd is Side.NEGATIVE:
            part = tuple(a[::-1] for a in part)
        parts.append(part)
    cols = [np.concatenate([p[i] for p in parts]) for i in range(5)]
    w_pos, w_neg = weights
    return BinnedDensity(cols[0], cols[1], cols[2], cols[3], cols[4],
                         side if side == TWO_SIDED else Side(side).value,
                         int(n_total), int(round(w_pos * n_total)), int(round(w_neg * n_total)))


# ---------------------------------------------------------------- fits

@dataclass(frozen=True)
class SideFit:
    params: QExpParams
    weight: float
    log_likelihood: float | None
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ParamFit:
    """One calibrated model.

    For the q-exponential ``params`` is a ``(positive, negative)`` pair of
    QExpParams (either may be None when only one side was fitted) and
    ``weights`` holds the empirical share of samples on each side.
    """

    model: Model
    estimator: Estimator
    params: object
    chi: float
    tail_indices: tuple
    log_likelihood: float | None = None
    weights: tuple = (0.5, 0.5)
    diagnostics: dict = field(default_factory=dict)

    def pdf(self, s):
        s = np.asarray(s, dtype=float)
        if self.model is Model.STUDENT:
            return np.exp(student_logpdf(s, self.params))
        out = np.zeros_like(s)
        for sd, p, w in zip((Side.POSITIVE, Side.NEGATIVE), self.params, self.weights):
            if p is None:
                continue
            mask = s > 0 if sd is Side.POSITIVE else s < 0
            out[mask] = w * np.exp(qexp_logpdf(s[mask], p))
        # s == 0: both sides meet; use the mean of the two side limits
        zero = s == 0
        if np.any(zero):
            out[zero] = sum(w * p.nu for p, w in zip(self.params, self.weights) if p is not None) / \
                max(sum(1 for p in self.params if p is not None), 1)
        return out


def _check_samples(samples, n_min=100):
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or x.size < n_min:
        raise ParameterError(f"need at least {n_min} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ParameterError("samples contain non-finite values")
    if np.ptp(x) == 0:
        raise EstimationError("constant sample: likelihood is unbounded", {"n": x.size})
    return x


def chi_rms(bd, model_fit):
    """R.m.s. of plain-density residuals over the bins of ``bd``."""
    resid = bd.densities - model_fit.pdf(bd.centers)
    return float(np.sqrt(np.mean(resid ** 2)))


def fit_student_mle(samples, bins=None, grad_tol=GRAD_TOL):
    """Student (alpha, L) by maximum likelihood with mu pinned at 0."""
    x = _check_samples(samples)

    def nll(theta, grad=True):
        logf, da, dl = _student_terms(x, theta, grad)
        g = -np.array([np.mean(da), np.mean(dl)]) if grad else None
        return -float(np.mean(logf)), g

    grid = [tuple(_student_theta(StudentParams(a, L))) for a, L in STUDENT_GRID]
    opt = _minimize(nll, grid, grad_tol)
    diag = _require_converged(opt, "Student MLE", {"n": x.size})
    p = StudentParams(math.exp(opt.theta[0]), math.exp(opt.theta[1]))
    fit = ParamFit(Model.STUDENT, Estimator.MLE, p, math.nan, (p.alpha,),
                   -opt.value * x.size, (0.5, 0.5), diag)
    bd = make_binned_density(x, TWO_SIDED, bins)
    return _with_chi(fit, bd)


def _with_chi(fit, bd):
    return ParamFit(fit.model, fit.estimator, fit.params, chi_rms(bd, fit), fit.tail_indices,
                    fit.log_likelihood, fit.weights, fit.diagnostics)


def fit_qexp_mle(samples, side, grad_tol=GRAD_TOL):
    """q-exponential (nu, q) by maximum likelihood on ``|S|`` of one side."""
    side = Side(side)
    s = np.asarray(samples, dtype=float)
    x = s[s > 0] if side is Side.POSITIVE else -s[s < 0]
    if x.size == 0:
        raise ParameterError(f"no samples on the {side.value} side")
    x = _check_samples(x)

    def nll(theta, grad=True):
        logf, dn, dr = _qexp_terms(x, theta, grad)
        g = -np.array([np.mean(dn), np.mean(dr)]) if grad else None
        return -float(np.mean(logf)), g

    grid = [tuple(_qexp_theta(nu, q)) for nu, q in QEXP_GRID]
    opt = _minimize(nll, grid, grad_tol)
    diag = _require_converged(opt, f"q-exponential MLE ({side.value})", {"n": x.size})
    p = QExpParams(math.exp(opt.theta[0]), 1.0 + math.exp(opt.theta[1]), side)
    return SideFit(p, x.size / s.size, -opt.value * x.size, diag)


def _assemble_qexp(estimator, pos, neg, bd, extra_diag=None):
    params = (pos.params if pos else None, neg.params if neg else None)
    weights = (pos.weight if pos else 0.0, neg.weight if neg else 0.0)
    tails = tuple(alpha_from_q(p.q) if p else math.nan for p in params)
    ll = None
    if pos is not None and neg is not None and pos.log_likelihood is not None:
        # two-sided density: side share times the half-line density
        ll = (pos.log_likelihood + neg.log_likelihood
              + bd.n_positive * math.log(weights[0]) + bd.n_negative * math.log(weights[1]))
    diag = {"positive": pos.diagnostics if pos else None,
            "negative": neg.diagnostics if neg else None, **(extra_diag or {})}
    fit = ParamFit(Model.QEXP, estimator, params, math.nan, tails, ll, weights, diag)
    return _with_chi(fit, bd)


def fit_qexp_mle_two_sided(samples, bins=None, grad_tol=GRAD_TOL):
    s = np.asarray(samples, dtype=float)
    pos = fit_qexp_mle(s, Side.POSITIVE, grad_tol)
    neg = fit_qexp_mle(s, Side.NEGATIVE, grad_tol)
    return _assemble_qexp(Estimator.MLE, pos, neg, make_binned_density(s, TWO_SIDED, bins))


def _nlse_objective(terms, centers, target, free_amplitude):
    """Sum of squared log10 residuals and its gradient."""
    def fun(theta, grad=True):
        logf, d1, d2 = terms(centers, theta, grad)
        r = target - logf / LN10
        if free_amplitude:
            r = r - r.mean()
        f = float(np.sum(r * r))
        if not grad:
            return f, None
        return f, np.array([np.sum(r * d1), np.sum(r * d2)]) * (-2.0 / LN10)
    return fun


def fit_nlse(bd, model, min_count=3, min_bins=8, free_amplitude=False, grad_tol=GRAD_TOL):
    """Least squares in log10-density on the bins of ``bd``.

    The Student model is fitted to both sides jointly, the q-exponential to
    each side present in ``bd`` separately with the side's empirical share as
    fixed weight. Bins with fewer than ``min_count`` samples are ignored.
    ``free_amplitude`` profiles out a constant log offset, so only the shape
    is fitted.
    """
    model = Model(model)
    usable = bd.counts >= min_count
    sides_present = [sd for sd in (Side.POSITIVE, Side.NEGATIVE)
                     if np.any(usable & ((bd.centers > 0) if sd is Side.POSITIVE else (bd.centers < 0)))]
    for sd in sides_present:
        mask = usable & ((bd.centers > 0) if sd is Side.POSITIVE else (bd.centers < 0))
        if np.count_nonzero(mask) < min_bins:
            raise ParameterError(f"{sd.value} side has {np.count_nonzero(mask)} usable bins, need {min_bins}")
    if not sides_present:
        raise ParameterError("no usable bins")

    if model is Model.STUDENT:
        c = bd.centers[usable]
        target = np.log10(bd.densities[usable])
        grid = [tuple(_student_theta(StudentParams(a, L))) for a, L in STUDENT_GRID]
        opt = _minimize(_nlse_objective(_student_terms, c, target, free_amplitude), grid, grad_tol)
        diag = _require_converged(opt, "Student NLSE", {"n_bins": int(c.size)})
        p = StudentParams(math.exp(opt.theta[0]), math.exp(opt.theta[1]))
        fit = ParamFit(Model.STUDENT, Estimator.NLSE, p, math.nan, (p.alpha,), None, (0.5, 0.5), diag)
        return _with_chi(fit, bd)

    fits = {}
    for sd in sides_present:
        mask = usable & ((bd.centers > 0) if sd is Side.POSITIVE else (bd.centers < 0))
        w = bd.side_weight(sd)
        c = np.abs(bd.centers[mask])
        target = np.log10(bd.densities[mask]) - math.log10(w)
        grid = [tuple(_qexp_theta(nu, q)) for nu, q in QEXP_GRID]
        opt = _minimize(_nlse_objective(_qexp_terms, c, target, free_amplitude), grid, grad_tol)
        diag = _require_converged(opt, f"q-exponential NLSE ({sd.value})", {"n_bins": int(c.size)})
        p = QExpParams(math.exp(opt.theta[0]), 1.0 + math.exp(opt.theta[1]), sd)
        fits[sd] = SideFit(p, w, None, diag)
    return _assemble_qexp(Estimator.NLSE, fits.get(Side.POSITIVE), fits.get(Side.NEGATIVE), bd)


def fit(samples, model, estimator, bins=None):
    """Convenience dispatcher over the four (model, estimator) cells."""
    model, estimator = Model(model), Estimator(estimator)
    bins = bins or BinSpec()
    if estimator is Estimator.MLE:
        if model is Model.STUDENT:
            return fit_student_mle(samples, bins)
        return fit_qexp_mle_two_sided(samples, bins)
    x = _check_samples(samples)
    bd = make_binned_density(x, TWO_SIDED, bins)
    return fit_nlse(bd, model, min_count=bins.min_count)


@dataclass(frozen=True)
class Preference:
    preferred: Model
    chi_a: float
    chi_b: float
    tie: bool


def compare_models(fit_a, fit_b):
    """Prefer the fit with the smaller residual r.m.s.; Student wins exact ties."""
    if fit_a.estimator != fit_b.estimator:
        raise ParameterError(
            f"cannot compare a {fit_a.estimator.value} fit with a {fit_b.estimator.value} fit")
    tie = fit_a.chi == fit_b.chi
    if tie:
        models = {fit_a.model, fit_b.model}
        preferred = Model.STUDENT if Model.STUDENT in models else fit_a.model
    else:
        preferred = fit_a.model if fit_a.chi < fit_b.chi else fit_b.model
    return Preference(preferred, fit_a.chi, fit_b.chi, tie)


# ---------------------------------------------------------------- I/O

def fit_record(fit_):
    """Flat key/value view of a fit, in a fixed key order."""
    rec = {"model": fit_.model.value, "estimator": fit_.estimator.value}
    if fit_.model is Model.STUDENT:
        rec.update(alpha=fit_.params.alpha, L=fit_.params.L, mu=fit_.params.mu,
                   tail_index=fit_.tail_indices[0])
    else:
        for label, p, w, a in zip(("pos", "neg"), fit_.params, fit_.weights, fit_.tail_indices):
            rec[f"nu_{label}"] = p.nu if p else math.nan
            rec[f"q_{label}"] = p.q if p else math.nan
            rec[f"weight_{label}"] = w
            rec[f"alpha_{label}"] = a
    rec["chi"] = fit_.chi
    rec["log_likelihood"] = fit_.log_likelihood if fit_.log_likelihood is not None else math.nan
    for key, value in _flatten(fit_.diagnostics).items():
        rec[f"diag.{key}"] = value
    return rec


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        if isinstance(v, dict):
            out.update(_flatten(v, f"{prefix}{k}."))
        elif v is not None:
            out[f"{prefix}{k}"] = v
    return out


def _fmt(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_fit_record(fit_, path):
    lines = [f"{k}={_fmt(v)}" for k, v in fit_record(fit_).items()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_fit_record(path):
    out = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        k, _, v = line.partition("=")
        try:
            out[k] = float(v) if k not in ("model", "estimator") else v
        except ValueError:
            out[k] = v
    return out


def write_binned_density(bd, path, curves=None):
    """``bin_center,density,count`` rows, plus one column per fitted curve."""
    curves = curves or {}
    names = list(curves)
    header = ["bin_center", "density", "count"] + names
    lines = [",".join(header)]
    for i in range(bd.centers.size):
        row = [f"{bd.centers[i]:.10g}", f"{bd.densities[i]:.10g}", str(int(bd.counts[i]))]
        row += [f"{curves[nm][i]:.10g}" for nm in names]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")
