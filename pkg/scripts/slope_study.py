"""Growth of the worst-case delay with the threshold.

For mean-shift pairs tuned to binned KL values K, estimates
(ADD(b + h) - ADD(b)) / h with the change at sample 1 and compares it with
1/K.  Convergence is slow for large N; N = 4 gets close by b = 20.
"""
import argparse
import csv
import sys

from scipy import optimize

from bgcusum import DetectorConfig, gaussian
from bgcusum.evaluation import add_slope_study, binned_kl


def shift_for_kl(n, k):
    f = gaussian()
    return optimize.brentq(lambda d: binned_kl(f, gaussian(d, 1.0), n) - k, 1e-3, 10.0, xtol=1e-12)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=4)
    ap.add_argument("--kl", type=float, nargs="+", default=[1.0, 0.5, 0.25])
    ap.add_argument("--b", type=float, nargs="+", default=[5.0, 10.0, 20.0])
    ap.add_argument("--h", type=float, default=10.0)
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out")
    args = ap.parse_args()

    rows = []
    for k in args.kl:
        delta = shift_for_kl(args.n, k)
        for r in add_slope_study(gaussian(), gaussian(delta, 1.0), DetectorConfig(args.n), args.b, args.h,
                                 args.trials, args.seed, args.workers):
            rows.append({"kl": k, "shift": delta, "b": r.b, "add": r.add, "add_next": r.add_next,
                         "slope": r.delta, "slope_se": r.se_delta, "inverse_kl": 1 / k})
            print(f"K={k:<5} b={r.b:<6} slope {r.delta:7.3f} +- {r.se_delta:.3f}   1/K {1 / k:.3f}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
