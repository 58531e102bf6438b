"""Detection delay at ARL 500 for the standard N(0,1) pre-change suite.

Calibrates b once for N = R = 16, then runs every post-change model with
the change at sample 300.  Prints a table and optionally writes CSV.
"""
import argparse
import csv
import sys

from bgcusum import DetectorConfig, gaussian, laplace
from bgcusum.evaluation import ExperimentSpec, calibrate_threshold, estimate_add

CASES = [
    ("mean 3", gaussian(3.0, 1.0), 2.3),
    ("mean 1.5", gaussian(1.5, 1.0), 6.6),
    ("sd 0.2", gaussian(0.0, 0.04), 10.5),
    ("sd 2", gaussian(0.0, 4.0), 21.5),
    ("laplace 0.7071", laplace(0.0, 0.7071), 154.0),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=16)
    ap.add_argument("--r", type=float, default=None)
    ap.add_argument("--target-arl", type=float, default=500)
    ap.add_argument("--nu", type=int, default=300)
    ap.add_argument("--trials", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out")
    args = ap.parse_args()

    f = gaussian()
    cfg = DetectorConfig(args.n, args.r)
    cal = calibrate_threshold(f, cfg, args.target_arl, master_seed=args.seed, workers=args.workers)
    print(f"N={cfg.n} R={cfg.r} b={cal.b:.4f} ARL={cal.arl:.1f}")
    rows = []
    for label, g, target in CASES:
        spec = ExperimentSpec(f, cfg.with_threshold(cal.b), g, args.nu, args.trials, 1_000_000,
                              args.seed + 1, args.workers)
        rep = estimate_add(spec)
        rows.append({"case": label, "add": rep.estimate, "se": rep.se, "target": target,
                     "false_alarms": rep.extra["false_alarms"]})
        print(f"{label:>16}  ADD {rep.estimate:8.2f} +- {rep.se:.2f}   target {target:6.1f}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
