"""Command-line front end.

Exit codes: 0 change declared (or command succeeded), 10 stream ended
without an alarm, 1 usage error, 2 data or model error.

Every command accepts ``--config file.json`` whose keys use the flag names
(``target_arl`` for ``--target-arl``); flags given on the command line win.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path
from typing import Iterator

import numpy as np

from .binning import BinPartition, partition_from_pdf, partition_from_samples, smallest_distinguishable_n
from .detector import DetectorConfig, run_until_stop
from .distributions import GeneralizedPdf, gaussian, laplace, uniform
from .errors import BGCuSumError
from .evaluation import (
    ExperimentSpec,
    calibrate_threshold,
    estimate_add,
    estimate_arl_direct,
    estimate_arl_renewal,
    write_bench_csv,
)
from .nselect import NSelectionParams, check_prop_a1, choose_n_search, crossing_set

EXIT_ALARM, EXIT_NO_ALARM, EXIT_USAGE, EXIT_DATA = 0, 10, 1, 2

DEFAULTS = {
    "r": None,
    "b": None,
    "trials": 5000,
    "cap": None,
    "nu": 1,
    "seed": 0,
    "workers": 1,
    "cycles": 1_000_000,
    "tol": 0.05,
    "n_max": 10_000,
    "metrics": "arl_renewal",
    "guard": 1,
}

METRICS = ("arl", "arl_renewal", "arl_hat", "add", "add_hat")


class UsageError(Exception):
    pass


class DataError(BGCuSumError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- parsing helpers

_SHORTHAND = {"gaussian": gaussian, "normal": gaussian, "laplace": laplace, "uniform": uniform}


def load_model(spec) -> GeneralizedPdf:
    """A model from a dict, inline JSON, a JSON file, or ``family:a,b`` shorthand."""
    if isinstance(spec, GeneralizedPdf):
        return spec
    if isinstance(spec, dict):
        return GeneralizedPdf.from_dict(spec)
    text = str(spec).strip()
    if text.startswith("{"):
        return GeneralizedPdf.from_json(text)
    family, sep, params = text.partition(":")
    if sep and family.lower() in _SHORTHAND:
        try:
            args = [float(v) for v in params.split(",")] if params else []
        except ValueError as exc:
            raise UsageError(f"bad model shorthand {text!r}") from exc
        return _SHORTHAND[family.lower()](*args)
    path = Path(text)
    if not path.exists():
        raise UsageError(f"model {text!r} is neither a file, JSON, nor family:params")
    return GeneralizedPdf.from_json(path.read_text())


def _open_text(path: str):
    return sys.stdin if path == "-" else open(path, newline="")


def read_values(path: str, column: str | None = None, strict: bool = False) -> Iterator[float]:
    """Lazily yield reals from newline-delimited text or one CSV column.

    Blank lines are ignored.  A malformed or non-finite entry is skipped
    with a warning, or raises under ``strict``.
    """
    fh = _open_text(path)
    try:
        if column is None:
            rows = ((i, line.strip()) for i, line in enumerate(fh, 1))
        else:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                return
            if column in header:
                col = header.index(column)
            elif column.isdigit() and int(column) < len(header):
                col = int(column)
            else:
                raise UsageError(f"column {column!r} not in header {header}")
            rows = ((i, row[col].strip() if col < len(row) else "") for i, row in enumerate(reader, 2))
        for lineno, field in rows:
            if not field and column is None:
                continue
            try:
                x = float(field)
                if not math.isfinite(x):
                    raise ValueError("non-finite")
            except ValueError:
                msg = f"line {lineno}: cannot use {field!r}"
                if strict:
                    raise DataError(msg) from None
                print(f"warning: {msg}, skipped", file=sys.stderr)
                continue
            yield x
    finally:
        if fh is not sys.stdin:
            fh.close()


def _merge_config(args: argparse.Namespace, required: tuple[str, ...] = ()) -> argparse.Namespace:
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        known = set(vars(args)) | {"experiments"}
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise UsageError(f"unknown config keys: {unknown}")
    for key, value in vars(args).items():
        if value is None:
            setattr(args, key, cfg.get(key, DEFAULTS.get(key)))
    args.experiments = cfg.get("experiments")
    missing = [k for k in required if getattr(args, k) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))
    return args


def _emit_json(obj, out: str | None) -> None:
    if out:
        Path(out).write_text(json.dumps(obj, indent=1) + "\n")


# ---------------------------------------------------------------- commands


def cmd_calibrate(args) -> int:
    _merge_config(args, ("n",))
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    if args.input is not None:
        values = np.fromiter(read_values(args.input, args.column, args.strict), dtype=float)
        model = load_model(args.model) if args.model else None
        atoms = model.thetas if model else ()
        masses = model.atom_masses if model else ()
        p0 = model.p0 if model else 1.0
        part = partition_from_samples(values, args.n, atoms, p0, masses)
    elif args.model is not None:
        part = partition_from_pdf(load_model(args.model), args.n)
    else:
        raise UsageError("calibrate needs --model or --input")
    artifact = part.to_dict()
    if args.target_arl is not None:
        if args.model is None or args.input is not None:
            raise UsageError("--target-arl needs an analytic --model to simulate from")
        cal = calibrate_threshold(
            load_model(args.model), DetectorConfig(args.n, args.r), args.target_arl,
            tol=args.tol, cycles=args.cycles, master_seed=args.seed, guard=args.guard,
        )
        artifact["detector"] = {"r": DetectorConfig(args.n, args.r).r, "b": cal.b, "target_arl": args.target_arl,
                                "achieved_arl": cal.arl, "within_tol": cal.within_tol}
        print(f"threshold b = {cal.b!r} (ARL {cal.arl:.1f})")
        if not cal.within_tol:
            print(f"note: ARL jumps past the {args.tol:.0%} band at this N; kept the smallest b above target")
    print(f"N = {part.n_continuous}, atoms = {part.atoms.tolist()}")
    print("boundaries: " + (" ".join(f"{z:.6g}" for z in part.boundaries) or "(none)"))
    if args.out:
        Path(args.out).write_text(json.dumps(artifact, indent=1) + "\n")
    return 0


def cmd_detect(args) -> int:
    _merge_config(args, ("partition",))
    try:
        raw = json.loads(Path(args.partition).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read partition artifact: {exc}") from exc
    part = BinPartition.from_dict(raw)
    stored = raw.get("detector", {})
    b = args.b if args.b is not None else stored.get("b")
    if b is None:
        raise UsageError("missing --b (and the artifact stores no threshold)")
    r = args.r if args.r is not None else stored.get("r")
    config = DetectorConfig(part.n_continuous, r, b)
    source = read_values(args.input or "-", args.column, args.strict)
    report = run_until_stop(source, config, part, cap=args.cap, trace=bool(args.trace))
    if args.trace:
        fh = sys.stdout if args.trace == "-" else open(args.trace, "w", newline="")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "stat", "lambda"])
        for t, s, lam in report.trace:
            w.writerow([t, repr(float(s)), lam])
        if fh is not sys.stdout:
            fh.close()
    if report.alarmed:
        print(f"change declared at tau = {report.tau}, lambda = {report.lambda_at_stop}, stat = {report.stat_at_stop:.6g}")
    else:
        print(f"no change after {report.samples_seen} samples (stat = {report.stat_at_stop:.6g})")
    _emit_json({"tau": report.tau, "lambda": report.lambda_at_stop, "stat": report.stat_at_stop,
                "samples": report.samples_seen, "alarm": report.alarmed}, args.out)
    return EXIT_ALARM if report.alarmed else EXIT_NO_ALARM


def cmd_choose_n(args) -> int:
    _merge_config(args, ("model", "k", "eps", "C", "xi"))
    params = NSelectionParams(args.k, args.eps, args.C, args.xi)
    res = choose_n_search(load_model(args.model), params, args.n_max)
    print(res.n)
    if args.out:
        # sweep as CSV for plotting; blank bounds where the tail bound diverges
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "m_n", "M_n"])
            for n, lo, hi in res.sweep:
                w.writerow([n, "" if lo is None else repr(float(lo)), "" if hi is None else repr(float(hi))])
    return 0


def cmd_check_distinguishable(args) -> int:
    _merge_config(args, ("model", "post"))
    f, g = load_model(args.model), load_model(args.post)
    levels = crossing_set(f, g)
    if args.n is not None:
        ok = check_prop_a1(f, g, args.n, levels)
        print(f"distinguishable at N = {args.n}: {'yes' if ok else 'no'}")
        _emit_json({"n": args.n, "distinguishable": ok, "crossings": list(levels.values)}, args.out)
        return 0
    n_max = min(args.n_max, 4096)
    n = smallest_distinguishable_n(f, g, n_max)
    print(f"smallest N = {n}" if n is not None else f"not distinguishable for N <= {n_max}")
    print("crossing levels: " + " ".join(f"{v:.6g}" for v in levels.values)
          + (f" plus intervals {list(levels.intervals)}" if levels.intervals else ""))
    _emit_json({"smallest_n": n, "crossings": list(levels.values), "intervals": list(levels.intervals)}, args.out)
    return 0


def _bench_experiments(args) -> list[dict]:
    if args.experiments:
        return args.experiments
    if args.model is None or args.n is None:
        raise UsageError("bench needs --model and --n, or a --config with experiments")
    return [{"id": "cli", "f": args.model, "g": args.post, "n": args.n, "r": args.r, "b": args.b,
             "target_arl": args.target_arl, "nu": args.nu, "metrics": args.metrics}]


def run_bench(args) -> list:
    rows = []
    for exp in _bench_experiments(args):
        trials = int(exp.get("trials", args.trials))
        if trials < 1:
            raise UsageError("trials must be >= 1")
        f = load_model(exp["f"])
        g = load_model(exp["g"]) if exp.get("g") else None
        seed = int(exp.get("seed", args.seed))
        config = DetectorConfig(int(exp["n"]), exp.get("r"), 0.0)
        if exp.get("target_arl") is not None:
            cal = calibrate_threshold(f, config, float(exp["target_arl"]), tol=float(exp.get("tol", args.tol)),
                                      cycles=int(exp.get("cycles", args.cycles)), master_seed=seed,
                                      guard=args.guard, workers=args.workers)
            config = config.with_threshold(cal.b)
            cal.report.metric = "calibrated_arl"
            cal.report.extra["b"] = cal.b
            rows.append((exp["id"], cal.report))
        elif exp.get("b") is not None:
            config = config.with_threshold(float(exp["b"]))
        else:
            raise UsageError(f"experiment {exp['id']}: give b or target_arl")
        # trials stop at the alarm, so a generous cap is cheap; e^b only bounds the ARL from below
        expected = exp.get("target_arl") or math.exp(min(config.b, 30.0))
        cap = int(exp.get("cap") or args.cap or max(1_000_000, 50 * math.ceil(expected)))
        spec = ExperimentSpec(f, config, g, int(exp.get("nu", args.nu)), trials, cap, seed, args.workers)
        metrics = exp.get("metrics", args.metrics)
        if isinstance(metrics, str):
            metrics = metrics.split(",")
        for metric in metrics:
            if metric not in METRICS:
                raise UsageError(f"unknown metric {metric!r}; choose from {METRICS}")
            if metric == "arl":
                rep = estimate_arl_direct(spec)
            elif metric == "arl_hat":
                rep = estimate_arl_direct(spec, "hat")
            elif metric == "arl_renewal":
                rep = estimate_arl_renewal(ExperimentSpec(f, config, None, 1, int(exp.get("cycles", args.cycles)),
                                                          cap, seed, args.workers), args.guard)
            else:
                if g is None:
                    raise UsageError(f"experiment {exp['id']}: metric {metric} needs a post-change model")
                rep = estimate_add(spec, "tilde" if metric == "add" else "hat")
            rows.append((exp["id"], rep))
    return rows


def cmd_bench(args) -> int:
    _merge_config(args)
    if args.trials is not None and int(args.trials) < 1:
        raise UsageError("--trials must be >= 1")
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    rows = run_bench(args)
    text = write_bench_csv(rows, args.out, timing=args.timing)
    if not args.out:
        sys.stdout.write(text)
    else:
        for exp_id, rep in rows:
            print(f"{exp_id:>16} {rep.metric:>14} {rep.estimate:12.4f} +- {rep.se:.4f}")
    return 0


# ---------------------------------------------------------------- argparse


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bgcusum", description="Binned generalized CuSum toolkit", allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, *names):
        p.add_argument("--config", help="JSON file with option values (flags override)")
        p.add_argument("--out", help="machine-readable output path")
        opts = {
            "model": dict(help="pre-change model: JSON file, inline JSON, or family:params (gaussian:0,1)"),
            "post": dict(help="post-change model, same formats as --model"),
            "partition": dict(help="partition artifact written by calibrate"),
            "input": dict(help="input file, newline-delimited reals or CSV ('-' for stdin)"),
            "column": dict(help="CSV column name or index; implies a header row"),
            "n": dict(type=int, help="number of continuous bins N"),
            "r": dict(type=float, help="regularizer R (default N)"),
            "b": dict(type=float, help="threshold b"),
            "trials": dict(type=int, help="Monte Carlo trials"),
            "cap": dict(type=int, help="max steps per trial or stream"),
            "nu": dict(type=int, help="change point for ADD runs"),
            "seed": dict(type=int, help="master seed"),
            "target_arl": dict(type=float, help="calibrate b to this ARL"),
            "cycles": dict(type=int, help="renewal cycles per ARL evaluation"),
            "tol": dict(type=float, help="relative ARL tolerance for calibration"),
            "guard": dict(type=int, choices=(1, 2), help="renewal lower-exit guard: 1 exact, 2 literal t > 2"),
            "workers": dict(type=int, help="worker processes"),
            "n_max": dict(type=int, help="largest N to search"),
            "strict": dict(action="store_true", default=None, help="fail on malformed input lines"),
        }
        for name in names:
            p.add_argument("--" + name.replace("_", "-"), dest=name, **opts[name])

    p = sub.add_parser("calibrate", help="build a bin partition artifact (optionally with a threshold)")
    common(p, "model", "input", "column", "n", "r", "target_arl", "cycles", "tol", "guard", "seed", "strict")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("detect", help="run the detector over a stream")
    common(p, "partition", "input", "column", "r", "b", "cap", "strict")
    p.add_argument("--trace", help="write a per-step CSV trace here ('-' for stdout)")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("choose-n", help="moment-envelope search for N")
    common(p, "model", "n_max")
    p.add_argument("--k", type=int, help="moment order")
    p.add_argument("--eps", type=float, help="moment separation")
    p.add_argument("--C", dest="C", type=float, help="tail constant")
    p.add_argument("--xi", type=float, help="tail exponent margin")
    p.set_defaults(func=cmd_choose_n)

    p = sub.add_parser("check-distinguishable", help="exact distinguishability of two models")
    common(p, "model", "post", "n", "n_max")
    p.set_defaults(func=cmd_check_distinguishable)

    p = sub.add_parser("bench", help="Monte Carlo benchmark to CSV")
    common(p, "model", "post", "n", "r", "b", "target_arl", "trials", "cap", "nu", "seed", "cycles", "tol",
           "guard", "workers")
    p.add_argument("--metrics", help=f"comma-separated subset of {','.join(METRICS)}")
    p.add_argument("--timing", action="store_true", default=None, help="fill the seconds column")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BGCuSumError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
