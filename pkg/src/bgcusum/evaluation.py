"""Monte Carlo estimation of run lengths and detection delays.

Every trial draws from its own generator seeded by ``(master_seed, index)``
so results do not depend on how trials are spread over worker processes.
Trials are grouped in fixed-size blocks purely for scheduling.
"""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .binning import BinPartition, assign_bins, bin_masses_of, partition_from_pdf
from .detector import DetectorConfig
from .distributions import GeneralizedPdf, kl_binned, sample
from .errors import CalibrationError, InconclusiveError, ModelError

Z95 = 1.959963984540054
BLOCK = 250
RENEWAL_BLOCK = 20_000

COMPLETED, TRUNCATED, FALSE_ALARM = 0, 1, 2

BENCH_FIELDS = ["experiment_id", "metric", "estimate", "se", "ci_lo", "ci_hi", "trials", "truncated", "seconds"]


def trial_rng(master_seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng([int(master_seed), *map(int, keys)])


@dataclass(frozen=True)
class ExperimentSpec:
    f: GeneralizedPdf
    config: DetectorConfig
    g: GeneralizedPdf | None = None
    nu: int = 1
    trials: int = 5000
    cap: int = 100_000
    master_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ModelError("trials must be >= 1")
        if self.cap < 1:
            raise ModelError("cap must be >= 1")
        if self.nu < 1:
            raise ModelError("change point nu must be >= 1")

    def partition(self) -> BinPartition:
        return partition_from_pdf(self.f, self.config.n)


@dataclass
class MonteCarloReport:
    metric: str
    estimate: float
    se: float
    ci_lo: float
    ci_hi: float
    trials: int
    truncated: int = 0
    seconds: float = 0.0
    extra: dict = field(default_factory=dict)

    def row(self, experiment_id: str, timing: bool = False) -> dict:
        return {
            "experiment_id": experiment_id,
            "metric": self.metric,
            "estimate": repr(float(self.estimate)),
            "se": repr(float(self.se)),
            "ci_lo": repr(float(self.ci_lo)),
            "ci_hi": repr(float(self.ci_hi)),
            "trials": self.trials,
            "truncated": self.truncated,
            "seconds": f"{self.seconds:.3f}" if timing else "",
        }


def _mean_report(metric: str, values: np.ndarray, trials: int, truncated: int, extra=None) -> MonteCarloReport:
    n = values.size
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else float("inf")
    return MonteCarloReport(metric, mean, se, mean - Z95 * se, mean + Z95 * se, trials, truncated, extra=extra or {})


# ---------------------------------------------------------------- trials


class _BinSource:
    """Chunked binned draws from one distribution."""

    def __init__(self, dist: GeneralizedPdf, p: BinPartition, rng: np.random.Generator, first: int = 256):
        self.dist, self.p, self.rng = dist, p, rng
        self.size = first

    def next(self, limit: int) -> np.ndarray:
        n = min(self.size, limit)
        self.size = min(self.size * 2, 1 << 16)
        return assign_bins(self.p, sample(self.dist, self.rng, n))


def _fresh(m: int):
    return np.array([0, 1, 0], dtype=np.int64), np.zeros(1), np.zeros(m, dtype=np.int64)


def _run_to_alarm(src: _BinSource, logf, r, b, ist, fst, counts, cap: int) -> bool:
    while ist[0] < cap:
        chunk = src.next(cap - int(ist[0]))
        if _kernels.first_passage(chunk, logf, r, b, ist, fst, counts) >= 0:
            return True
    return False


def _tilde_trial(i, seed, f, g, p, r, b, nu, cap):
    """One stream: ``f`` before ``nu``, ``g`` from ``nu`` on (``g=None``: pure ``f``)."""
    rng = trial_rng(seed, i)
    logf = np.log(p.f_masses)
    ist, fst, counts = _fresh(p.n_bins)
    if g is None:
        alarmed = _run_to_alarm(_BinSource(f, p, rng), logf, r, b, ist, fst, counts, cap)
        return (int(ist[0]), COMPLETED) if alarmed else (cap, TRUNCATED)
    if nu > 1:
        pre = assign_bins(p, sample(f, rng, min(nu - 1, cap)))
        if _kernels.first_passage(pre, logf, r, b, ist, fst, counts) >= 0:
            return int(ist[0]), FALSE_ALARM
    alarmed = _run_to_alarm(_BinSource(g, p, rng), logf, r, b, ist, fst, counts, cap)
    return (int(ist[0]), COMPLETED) if alarmed else (cap, TRUNCATED)


def _hat_trial(i, seed, f, g, p, r, b, nu, cap):
    """Same stream layout for the full-search statistic (quadratic cost)."""
    rng = trial_rng(seed, i)
    logf = np.log(p.f_masses)
    hist = np.zeros(cap, dtype=np.int64)
    acc = np.zeros(cap + 1)
    t = 0
    if g is not None and nu > 1:
        pre = assign_bins(p, sample(f, rng, min(nu - 1, cap)))
        t, alarm = _kernels.shat_first_passage(pre, logf, r, b, t, hist, acc, cap)
        if alarm:
            return int(t), FALSE_ALARM
    src = _BinSource(f if g is None else g, p, rng)
    while t < cap:
        t, alarm = _kernels.shat_first_passage(src.next(cap - t), logf, r, b, t, hist, acc, cap)
        if alarm:
            return int(t), COMPLETED
    return cap, TRUNCATED


_TRIALS: dict[str, Callable] = {"tilde": _tilde_trial, "hat": _hat_trial}


def _block(kind, start, stop, args):
    fn = _TRIALS[kind]
    out = np.empty((stop - start, 2), dtype=np.int64)
    for i in range(start, stop):
        out[i - start] = fn(i, *args)
    return out


def _run_trials(kind: str, n: int, args: tuple, workers: int = 1) -> np.ndarray:
    bounds = [(s, min(s + BLOCK, n)) for s in range(0, n, BLOCK)]
    if workers <= 1 or len(bounds) == 1:
        parts = [_block(kind, s, e, args) for s, e in bounds]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_block, kind, s, e, args) for s, e in bounds]
            parts = [fut.result() for fut in futures]
    return np.concatenate(parts)


def _trial_args(spec: ExperimentSpec, p: BinPartition, g) -> tuple:
    return (spec.master_seed, spec.f, g, p, float(spec.config.r), float(spec.config.b), spec.nu, spec.cap)


# ---------------------------------------------------------------- ARL


def estimate_arl_direct(spec: ExperimentSpec, statistic: str = "tilde") -> MonteCarloReport:
    """Mean stopping time on pure pre-change streams.

    Truncated trials count as ``cap``, which biases the estimate low; the
    report flags it when more than 1% of trials hit the cap.
    """
    t0 = time.perf_counter()
    p = spec.partition()
    res = _run_trials(statistic, spec.trials, _trial_args(spec, p, None), spec.workers)
    truncated = int((res[:, 1] == TRUNCATED).sum())
    if truncated == spec.trials:
        raise InconclusiveError("every ARL trial hit the cap")
    rep = _mean_report(
        "arl" if statistic == "tilde" else "arl_hat",
        res[:, 0].astype(float),
        spec.trials,
        truncated,
        {"cap_biased": truncated > 0.01 * spec.trials},
    )
    rep.seconds = time.perf_counter() - t0
    return rep


def _renewal_block(k, seed, f, p, r, b, guard, n_cycles):
    rng = trial_rng(seed, k, 1)
    logf = np.log(p.f_masses)
    ist, fst, counts = _fresh(p.n_bins)
    lengths = np.zeros(n_cycles, dtype=np.int64)
    crossed = np.zeros(n_cycles, dtype=np.bool_)
    done = 0
    chunk = max(4 * n_cycles, 4096)
    while done < n_cycles:
        bins = assign_bins(p, sample(f, rng, chunk))
        done = _kernels.renewal_cycles(bins, logf, r, b, guard, ist, fst, counts, lengths, crossed, done)
    return lengths, crossed


def renewal_cycles(spec: ExperimentSpec, guard: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Lengths and crossing flags of ``spec.trials`` independent excursions."""
    p = spec.partition()
    args = (spec.master_seed, spec.f, p, float(spec.config.r), float(spec.config.b), int(guard))
    blocks = [(k, min(RENEWAL_BLOCK, spec.trials - k * RENEWAL_BLOCK)) for k in range(-(-spec.trials // RENEWAL_BLOCK))]
    if spec.workers <= 1 or len(blocks) == 1:
        parts = [_renewal_block(k, *args, n) for k, n in blocks]
    else:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            parts = [fut.result() for fut in [pool.submit(_renewal_block, k, *args, n) for k, n in blocks]]
    return np.concatenate([a for a, _ in parts]), np.concatenate([c for _, c in parts])


def estimate_arl_renewal(spec: ExperimentSpec, guard: int = 1) -> MonteCarloReport:
    """ARL as mean excursion length over upper-crossing frequency.

    An excursion starts from the zero state and ends either when the
    statistic reaches ``b`` or when it is back at zero after more than
    ``guard`` steps.  With ``guard=1`` every lower exit is a genuine reset,
    so the ratio is exactly the ARL; ``guard=2`` is the more conservative
    reading that skips the first possible reset.
    """
    t0 = time.perf_counter()
    lengths, crossed = renewal_cycles(spec, guard)
    n = lengths.size
    hits = int(crossed.sum())
    mean_len = float(lengths.mean())
    p_hat = hits / n
    p_se = math.sqrt(p_hat * (1 - p_hat) / n)
    extra = {"crossings": hits, "p_cross": p_hat, "p_cross_se": p_se, "mean_cycle": mean_len, "lower_bound": False}
    if hits == 0:
        total = float(lengths.sum())
        extra["lower_bound"] = True
        rep = MonteCarloReport("arl_renewal", total, float("inf"), total, float("inf"), n, 0, extra=extra)
    else:
        arl = mean_len / p_hat
        # ratio-of-means delta method
        resid = lengths - arl * crossed
        se = float(resid.std(ddof=1) / math.sqrt(n) / p_hat)
        rep = MonteCarloReport("arl_renewal", arl, se, arl - Z95 * se, arl + Z95 * se, n, 0, extra=extra)
    rep.seconds = time.perf_counter() - t0
    return rep


@dataclass
class Calibration:
    b: float
    arl: float
    report: MonteCarloReport
    history: list[tuple[float, float]]
    # False when the ARL jumps across the tolerance band; b is then the
    # smallest threshold found whose ARL is above the target
    within_tol: bool = True


def _bisect_threshold(
    arl_at: Callable[[float], float], target: float, tol: float, max_iter: int, hi: float | None = None
) -> tuple[float, float, list, bool]:
    history = []

    def ev(b):
        a = arl_at(b)
        history.append((b, a))
        return a

    lo = 0.0
    hi = math.log(target) if hi is None else hi
    a_hi = ev(hi)
    grow = 0
    while a_hi < target:
        lo, hi = hi, hi + 0.5
        a_hi = ev(hi)
        grow += 1
        if grow > 20:
            raise CalibrationError("could not bracket the target ARL")
    if abs(a_hi - target) <= tol * target:
        return hi, a_hi, history, True
    for _ in range(max_iter):
        if hi - lo < 1e-6:
            # the statistic lives on a lattice for small N and the ARL steps over the band
            return hi, a_hi, history, False
        mid = 0.5 * (lo + hi)
        a = ev(mid)
        if abs(a - target) <= tol * target:
            return mid, a, history, True
        if a < target:
            lo = mid
        else:
            hi, a_hi = mid, a
    raise CalibrationError(f"threshold bisection did not reach {tol:.0%} of target {target}")


def calibrate_threshold(
    f: GeneralizedPdf,
    config: DetectorConfig,
    target_arl: float,
    tol: float = 0.05,
    cycles: int = 1_000_000,
    master_seed: int = 0,
    guard: int = 1,
    workers: int = 1,
    max_iter: int = 40,
) -> Calibration:
    """Bisect ``b`` until the renewal ARL estimate is within ``tol`` of target.

    The same random stream is reused for every candidate ``b``.  Since the
    ARL is at least ``e^b``, ``[0, ln target]`` brackets the answer.
    """
    if target_arl < 1:
        raise CalibrationError("target ARL must be >= 1")
    if target_arl == 1:
        # b = 0 alarms at t = 1 with certainty
        return Calibration(0.0, 1.0, MonteCarloReport("arl_renewal", 1.0, 0.0, 1.0, 1.0, 0), [(0.0, 1.0)])
    reports = {}

    def arl_at(b):
        spec = ExperimentSpec(f, config.with_threshold(b), trials=cycles, master_seed=master_seed, workers=workers)
        reports[b] = estimate_arl_renewal(spec, guard)
        return reports[b].estimate

    b, arl, history, ok = _bisect_threshold(arl_at, target_arl, tol, max_iter)
    return Calibration(b, arl, reports[b], history, ok)


def calibrate_threshold_direct(
    spec: ExperimentSpec,
    target_arl: float,
    tol: float = 0.05,
    statistic: str = "tilde",
    max_iter: int = 40,
    b_start: float | None = None,
) -> Calibration:
    """Bisection on ``b`` using direct ARL runs (needed for the full-search statistic).

    ``b_start`` is the first upper guess; it is raised in steps of 0.5 until
    the ARL exceeds the target.  A guess close to the answer keeps the
    quadratic-cost statistic affordable.
    """
    if target_arl <= 1:
        raise CalibrationError("target ARL must exceed 1")
    reports = {}

    def arl_at(b):
        reports[b] = estimate_arl_direct(replace(spec, g=None, config=spec.config.with_threshold(b)), statistic)
        return reports[b].estimate

    b, arl, history, ok = _bisect_threshold(arl_at, target_arl, tol, max_iter, b_start)
    return Calibration(b, arl, reports[b], history, ok)


# ---------------------------------------------------------------- ADD


def estimate_add(spec: ExperimentSpec, statistic: str = "tilde") -> MonteCarloReport:
    """Mean of ``tau - nu + 1`` over trials that did not alarm before ``nu``.

    False alarms are discarded and counted; truncated trials enter at the
    cap.  ``extra`` carries the three outcome counts, which sum to ``trials``.
    """
    if spec.g is None:
        raise ModelError("ADD needs a post-change distribution")
    t0 = time.perf_counter()
    p = spec.partition()
    res = _run_trials(statistic, spec.trials, _trial_args(spec, p, spec.g), spec.workers)
    status = res[:, 1]
    kept = status != FALSE_ALARM
    counts = {
        "completed": int((status == COMPLETED).sum()),
        "truncated": int((status == TRUNCATED).sum()),
        "false_alarms": int((status == FALSE_ALARM).sum()),
    }
    if not kept.any():
        raise InconclusiveError("every trial raised a false alarm before the change")
    delays = (res[kept, 0] - spec.nu + 1).astype(float)
    rep = _mean_report("add" if statistic == "tilde" else "add_hat", delays, spec.trials, counts["truncated"], counts)
    rep.seconds = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------- studies


@dataclass
class GrowthResult:
    ratios: np.ndarray
    kl: float

    @property
    def median_abs_error(self) -> float:
        return float(np.median(np.abs(self.ratios - self.kl)))


def binned_kl(f: GeneralizedPdf, g: GeneralizedPdf, n: int) -> float:
    p = partition_from_pdf(f, n)
    return kl_binned(bin_masses_of(p, g), p.f_masses)


def growth_rate_check(
    f: GeneralizedPdf, g: GeneralizedPdf, config: DetectorConfig, t_horizon: int, seeds: Sequence[int]
) -> GrowthResult:
    """Statistic divided by ``t`` after ``t_horizon`` post-change samples, per seed."""
    p = partition_from_pdf(f, config.n)
    logf = np.log(p.f_masses)
    ratios = []
    for s in seeds:
        bins = assign_bins(p, sample(g, trial_rng(s, 0, 2), t_horizon))
        ist, fst, counts = _fresh(p.n_bins)
        _kernels.first_passage(bins, logf, float(config.r), math.inf, ist, fst, counts)
        ratios.append(fst[0] / t_horizon)
    return GrowthResult(np.array(ratios), kl_binned(bin_masses_of(p, g), p.f_masses))


@dataclass
class SlopeRow:
    b: float
    add: float
    add_next: float
    delta: float
    se_delta: float


def add_slope_study(
    f: GeneralizedPdf,
    g: GeneralizedPdf,
    config: DetectorConfig,
    thresholds: Sequence[float],
    h: float,
    trials: int,
    master_seed: int = 0,
    workers: int = 1,
    cap: int = 1_000_000,
) -> list[SlopeRow]:
    """Finite-difference slope of the worst-case delay against the threshold.

    Uses change point 1 and the same trial streams for ``b`` and ``b + h``.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    if any(b2 <= b1 for b1, b2 in zip(thresholds, thresholds[1:])):
        raise ValueError("thresholds must be increasing")
    if binned_kl(f, g, config.n) < 1e-6:
        raise ModelError("post-change model is not distinguishable at this N; delay is unbounded")
    p = partition_from_pdf(f, config.n)
    rows = []
    for b in thresholds:
        res = []
        for bb in (b, b + h):
            spec = ExperimentSpec(f, config.with_threshold(bb), g, 1, trials, cap, master_seed, workers)
            res.append(_run_trials("tilde", trials, _trial_args(spec, p, g), workers)[:, 0].astype(float))
        diff = (res[1] - res[0]) / h
        rows.append(SlopeRow(b, res[0].mean(), res[1].mean(), diff.mean(), diff.std(ddof=1) / math.sqrt(trials)))
    return rows


def tradeoff_curve(
    f: GeneralizedPdf,
    g: GeneralizedPdf,
    config: DetectorConfig,
    thresholds: Sequence[float],
    trials: int,
    master_seed: int = 0,
    cycles: int = 200_000,
    statistic: str = "tilde",
    cap: int = 1_000_000,
) -> list[dict]:
    """ADD against log-ARL, long format (one row per threshold)."""
    rows = []
    for b in thresholds:
        cfg = config.with_threshold(b)
        if statistic == "tilde":
            arl = estimate_arl_renewal(ExperimentSpec(f, cfg, trials=cycles, master_seed=master_seed))
        else:
            arl = estimate_arl_direct(ExperimentSpec(f, cfg, trials=trials, cap=cap, master_seed=master_seed), statistic)
        add = estimate_add(ExperimentSpec(f, cfg, g, 1, trials, cap, master_seed + 1), statistic)
        rows.append({"statistic": statistic, "b": b, "arl": arl.estimate, "log_arl": math.log(arl.estimate),
                     "add": add.estimate, "add_se": add.se})
    return rows


def write_bench_csv(rows: Sequence[tuple[str, MonteCarloReport]], out=None, timing: bool = False) -> str:
    """Bench CSV; wall time is left blank unless ``timing`` so reruns are byte-identical."""
    buf = io.StringIO()
    w = csv.DictWriter(buf, BENCH_FIELDS, lineterminator="\n")
    w.writeheader()
    for exp_id, rep in rows:
        w.writerow(rep.row(exp_id, timing))
    text = buf.getvalue()
    if out is not None:
        if hasattr(out, "write"):
            out.write(text)
        else:
            with open(out, "w") as fh:
                fh.write(text)
    return text
