"""Order-imbalance distributions: series construction, Student and
q-exponential fits, and power-law tail estimation."""

from .distfit import (BinSpec, BinnedDensity, Estimator, Model, ParamFit, QExpParams,
                      StudentParams, alpha_from_q, compare_models, fit_nlse,
                      fit_qexp_mle, fit_student_mle, make_binned_density, qexp_pdf,
                      student_pdf)
from .errors import (DegenerateSeriesError, EstimationError, FormatError, OIBError,
                     ParameterError)
from .imbalance import (ImbalanceSeries, SeriesKind, SummaryStats, aggregate_timescale,
                        compute_imbalance_series, standardize, summary_stats)
from .ingest import (EventTable, FormatConfig, OrderEvent, TradingCalendar,
                     filter_continuous_auction, parse_order_records)
from .synth import GenConfig, gen_order_flow, gen_pareto, gen_qexp, gen_student
from .tailfit import (GofKind, GofVerdict, Side, TailFit, csn_beta, cvm_statistic,
                      gof_test, ks_statistic, scan_smin)

__version__ = "0.1.0"
