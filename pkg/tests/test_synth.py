import io
import math

import numpy as np
import pytest
from scipy import stats

from oibtail.distfit import QExpParams, StudentParams, qexp_cdf, student_cdf
from oibtail.errors import ParameterError
from oibtail.imbalance import compute_imbalance_series
from oibtail.ingest import filter_continuous_auction, parse_order_records, write_order_records
from oibtail.synth import (Driver, GenConfig, SizeLaw, gen_order_flow, gen_pareto, gen_qexp,
                           gen_student, pareto_from_uniform, qexp_from_uniform)
from oibtail.tailfit import scan_smin

N = 100_000
KS_GATE = 1.63 / math.sqrt(N)


def test_pareto_inverse_cdf_example():
    assert pareto_from_uniform(0.25, 2.0, 1.0) == 2.0


def test_pareto_ccdf():
    x = gen_pareto(1_000_000, 3.0, 1.0, seed=1)
    assert abs(np.mean(x > 2) - 0.125) < 0.002
    assert x.min() >= 1.0


def test_determinism():
    for gen, args in [(gen_pareto, (1000, 2.0, 1.0)), (gen_student, (1000, 2.6, 1.0)),
                      (gen_qexp, (1000, 1.0, 1.4))]:
        assert np.array_equal(gen(*args, seed=3), gen(*args, seed=3))
        assert not np.array_equal(gen(*args, seed=3), gen(*args, seed=4))


def test_invalid_parameters():
    bad = [(gen_pareto, (0, 2.0, 1.0)), (gen_pareto, (10, -1.0, 1.0)), (gen_pareto, (10, 2.0, 0.0)),
           (gen_student, (10, 0.0, 1.0)), (gen_student, (10, 1.0, -1.0)),
           (gen_qexp, (10, 0.0, 1.5)), (gen_qexp, (10, 1.0, 1.0))]
    for gen, args in bad:
        with pytest.raises(ParameterError):
            gen(*args)


def test_cauchy_draws():
    x = gen_student(N, 1.0, 1.0, seed=2)
    assert abs(np.mean(x <= 1) - 0.75) < 0.005
    assert abs(np.median(x)) < 0.01


def test_qexp_inverse_cdf_example():
    assert qexp_from_uniform(0.75, 1.0, 2.0) == pytest.approx(3.0, rel=1e-14)


@pytest.mark.xfail(strict=True, reason="local CCDF slope of (1 + 0.4 s)**-2.5 is still 1.9 at s = 8; "
                                       "the asymptotic 2.5 is only approached where 1e5 draws leave ~30 points")
def test_qexp_tail_index():
    fit = scan_smin(gen_qexp(N, 1.0, 1.4, seed=3))
    assert abs(fit.beta - 2.5) < 0.1


def test_qexp_scan_follows_local_slope():
    fit = scan_smin(gen_qexp(N, 1.0, 1.4, seed=3))
    r = 0.4 * fit.s_min
    local = 2.5 * r / (1 + r)
    assert local < fit.beta < 2.5


def test_qexp_exponential_limit():
    x = gen_qexp(N, 1.0, 1.0001, seed=4)
    assert abs(x.mean() - 1) < 0.02


@pytest.mark.parametrize("name", ["pareto", "student", "qexp"])
def test_ks_gate(name):
    if name == "pareto":
        x, cdf = gen_pareto(N, 2.5, 1.5, seed=10), lambda s: 1 - (s / 1.5) ** -2.5
    elif name == "student":
        p = StudentParams(2.6, 2.0)
        x, cdf = gen_student(N, p.alpha, p.L, seed=11), lambda s: student_cdf(s, p)
    else:
        p = QExpParams(2.0, 1.4)
        x, cdf = gen_qexp(N, p.nu, p.q, seed=12), lambda s: qexp_cdf(s, p)
    assert stats.kstest(x, cdf).statistic < KS_GATE


def test_config_validation():
    with pytest.raises(ParameterError):
        GenConfig(buy_prob=1.5)
    with pytest.raises(ParameterError):
        GenConfig(events_per_minute=0)
    with pytest.raises(ParameterError):
        GenConfig(instruments=("A", "A"))
    with pytest.raises(ParameterError):
        SizeLaw("constant", (2.5,))
    with pytest.raises(ParameterError):
        Driver("student", (2.6, 1.0))
    with pytest.raises(ValueError):
        GenConfig(start_date="2003-13-01")
    cfg = GenConfig(size_law={"name": "pareto", "params": [1.5, 100]},
                    driver={"name": "student", "params": [2.6, 1, 0.1]})
    assert GenConfig(**cfg.as_dict()) == cfg


def test_order_flow_mean_near_zero():
    cfg = GenConfig(seed=1, n_days=241, events_per_minute=3.0)
    events = gen_order_flow(cfg)
    s = compute_imbalance_series(events, "NUM", 1, cfg.calendar())
    assert s.values.size == 57_840
    se = s.values.std() / math.sqrt(s.values.size)
    assert abs(s.values.mean()) < 3 * se


def test_constant_sizes_give_proportional_volume():
    cfg = GenConfig(seed=2, n_days=3, size_law=SizeLaw("constant", (100,)),
                    driver=Driver("student", (2.6, 1.0, 0.1)), cancel_prob=0.1)
    events = gen_order_flow(cfg)
    num = compute_imbalance_series(events, "NUM", 1, cfg.calendar())
    vol = compute_imbalance_series(events, "VOL", 1, cfg.calendar())
    assert np.array_equal(vol.values, 100 * num.values)


def test_full_year_grid():
    cfg = GenConfig(n_days=241, events_per_minute=0.01)
    assert cfg.calendar().total_minutes == 57_840
    s = compute_imbalance_series(gen_order_flow(cfg), "VOL", 1, cfg.calendar())
    assert s.values.size == 57_840


def test_round_trip_and_validation():
    cfg = GenConfig(seed=5, instruments=("000001", "200002"), n_days=2, cancel_prob=0.3,
                    size_law=SizeLaw("lognormal", (6.0, 1.5)), driver=Driver("student", (2.6, 1.0, 0.2)))
    events = gen_order_flow(cfg)
    assert np.all(np.diff(events.time_cs[events.date == events.date[0]][:500]) >= 0)
    buf = io.StringIO()
    write_order_records(events, buf)
    parsed = parse_order_records(buf.getvalue())
    assert parsed.skipped == 0 and parsed.events == events
    assert filter_continuous_auction(events, cfg.calendar()) == events


def test_parallel_generation_identical():
    cfg = GenConfig(seed=8, instruments=("A", "B", "C"), n_days=4)
    assert gen_order_flow(cfg, workers=1) == gen_order_flow(cfg, workers=3)


def test_student_driver_variance():
    # Var(OIB) = lam + 4 lam^2 Var(p) for Poisson(lam) events with buy probability p
    lam, gain = 20.0, 0.05
    base = dict(seed=6, n_days=40, events_per_minute=lam)
    cfg = GenConfig(**base, driver=Driver("student", (2.6, 1.0, gain)))
    iid = compute_imbalance_series(gen_order_flow(GenConfig(**base)), "NUM", 1, cfg.calendar()).values
    drv = compute_imbalance_series(gen_order_flow(cfg), "NUM", 1, cfg.calendar()).values
    p = np.clip(0.5 + gain * np.random.default_rng(0).standard_t(2.6, 2_000_000), 0.02, 0.98)
    expected = lam + 4 * lam ** 2 * p.var()
    assert iid.var() == pytest.approx(lam, rel=0.03)
    assert drv.var() == pytest.approx(expected, rel=0.06)
