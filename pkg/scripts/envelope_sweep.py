"""Moment envelope (m_N, M_N) over doubling N, written as CSV."""
import argparse
import csv
import sys

from bgcusum.cli import load_model
from bgcusum.nselect import NSelectionParams, mn_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--model", default="gaussian:0,1")
    ap.add_argument("--k", type=int, default=2)
    ap.add_argument("--C", type=float, default=11.0)
    ap.add_argument("--xi", type=float, default=4.0)
    ap.add_argument("--max-power", type=int, default=12)
    ap.add_argument("--out", default="-")
    args = ap.parse_args()

    params = NSelectionParams(k=args.k, eps=1.0, C=args.C, xi=args.xi)
    sweep = mn_sweep(load_model(args.model), params, [2**d for d in range(2, args.max_power + 1)])
    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["n", "m_n", "M_n"])
    for n, m, big in sweep:
        w.writerow([n, repr(float(m)), repr(float(big))])
    if fh is not sys.stdout:
        fh.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
