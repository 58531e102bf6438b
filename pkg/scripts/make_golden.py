"""Regenerate the pinned regression files under tests/golden.

Run only after a deliberate behaviour change; the tests compare against
these files exactly.
"""
import argparse
import csv
import json
import math
from pathlib import Path

import numpy as np

from bgcusum.binning import partition_from_pdf
from bgcusum.detector import DetectorConfig, run_until_stop, shat_statistic
from bgcusum.distributions import gaussian, mixture, Gaussian, sample

GOLDEN = Path(__file__).resolve().parent.parent / "tests" / "golden"


def shat_streams():
    """Ten seeded streams with the full-search statistic after every sample."""
    f = gaussian()
    post = [gaussian(1.0, 1.0), gaussian(0.0, 4.0)]
    cases = []
    for seed in range(10):
        rng = np.random.default_rng([99, seed])
        model = f if seed < 8 else mixture([(1.0, Gaussian(0, 1))], atoms=[(-1.0, 0.25), (1.0, 0.25)])
        n = 4 if seed % 2 == 0 else 8
        p = partition_from_pdf(model, n)
        if model is f:
            x = np.concatenate([sample(f, rng, 40), sample(post[seed % 2], rng, 40)])
        else:
            shifted = mixture([(1.0, Gaussian(0, 1))], atoms=[(-1.0, 0.33), (1.0, 0.17)])
            x = np.concatenate([sample(model, rng, 40), sample(shifted, rng, 40)])
        r = float(n)
        cases.append({
            "seed": seed,
            "model": model.to_dict(),
            "n": n,
            "r": r,
            "stream": x.tolist(),
            # literal evaluation at every prefix, independent of the compiled kernel
            "shat": [shat_statistic(x[:t], p, r) for t in range(1, x.size + 1)],
        })
    return cases


def detect_golden(out: Path):
    """Stream of 300 pre-change N(0,1) samples followed by N(3,1), plus its trace."""
    rng = np.random.default_rng(2024)
    x = np.concatenate([rng.standard_normal(300), rng.normal(3.0, 1.0, 100)])
    (out / "detect_stream.txt").write_text("".join(f"{float(v)!r}\n" for v in x))
    p = partition_from_pdf(gaussian(), 16)
    p.save(out / "detect_partition.json")
    b = math.log(50.0)
    rep = run_until_stop(x, DetectorConfig(16, 16.0, b), p, trace=True)
    with open(out / "detect_trace.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "stat", "lambda"])
        for t, s, lam in rep.trace:
            w.writerow([t, repr(float(s)), lam])
    meta = {"b": b, "r": 16.0, "tau": rep.tau, "lambda": rep.lambda_at_stop, "stat": rep.stat_at_stop}
    (out / "detect_expected.json").write_text(json.dumps(meta, indent=1) + "\n")
    return meta


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=GOLDEN)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "shat_streams.json").write_text(json.dumps(shat_streams(), indent=1) + "\n")
    meta = detect_golden(args.out)
    print(f"wrote goldens to {args.out}; detect tau = {meta['tau']}")


if __name__ == "__main__":
    main()
