"""Rejection rate of the bootstrap tail test on true Pareto and exponential tails.

    python3 scripts/gof_calibration.py --reps 500 --n-boot 1000 --n 1000
"""
import argparse

import numpy as np

from oibtail.synth import gen_pareto
from oibtail.tailfit import GofKind, fit_tail_at, gof_test


def rate(draw, kind, reps, n_boot, significance):
    rej = 0
    for r in range(reps):
        x = draw(r)
        rej += not gof_test(x, fit_tail_at(x, 1.0), kind, n_boot=n_boot, seed=r,
                            significance=significance).passed
    return rej / reps


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--n-boot", type=int, default=500)
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--beta", type=float, default=2.5)
    ap.add_argument("--significance", type=float, default=0.1)
    args = ap.parse_args()

    pareto = lambda r: gen_pareto(args.n, args.beta, 1.0, seed=r)
    expo = lambda r: 1.0 + np.random.default_rng(r).exponential(1.0, args.n)
    for kind in GofKind:
        size = rate(pareto, kind, args.reps, args.n_boot, args.significance)
        power = rate(expo, kind, args.reps, args.n_boot, args.significance)
        print(f"{kind.value:4s} size {size:.3f}  power {power:.3f}")


if __name__ == "__main__":
    main()
