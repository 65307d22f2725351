"""Tail index of pooled iid Student minutes as the aggregation window grows.

Prints beta per dt and side with the Spearman correlation between dt and beta.

    python3 scripts/timescale_trend.py --stocks 43 --days 241 --alpha 2.6 --seeds 0 1 2
"""
import argparse
import datetime

from scipy import stats

from oibtail.imbalance import ImbalanceSeries, trading_grid
from oibtail.ingest import TradingCalendar
from oibtail.pipeline import pooled_at
from oibtail.synth import gen_student
from oibtail.tailfit import Side, scan_smin

TIMESCALES = (1, 5, 10, 15, 30, 60, 120, 240)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--stocks", type=int, default=43)
    ap.add_argument("--days", type=int, default=241)
    ap.add_argument("--alpha", type=float, default=2.6)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    args = ap.parse_args()

    grid = trading_grid(TradingCalendar.weekdays(datetime.date(2003, 1, 2), args.days), 1)
    print("seed side  " + " ".join(f"{dt:>6d}" for dt in TIMESCALES) + "  rho(dt>=5)")
    for seed in args.seeds:
        series = [ImbalanceSeries(f"{k:06d}", "VOL", 1,
                                  gen_student(grid.size, args.alpha, 1.0, seed=seed * 1000 + k), grid)
                  for k in range(args.stocks)]
        for side in Side:
            betas = []
            for dt in TIMESCALES:
                try:
                    betas.append(scan_smin(pooled_at(series, dt)[0], side).beta)
                except ValueError:  # too few pooled values for a tail
                    betas.append(float("nan"))
            rho = stats.spearmanr(TIMESCALES[1:], betas[1:], nan_policy="omit").statistic
            print(f"{seed:4d} {side.value[:3]:4s}  " + " ".join(f"{b:6.2f}" for b in betas) + f"  {rho:+.2f}")


if __name__ == "__main__":
    main()
