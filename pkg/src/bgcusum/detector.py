"""Streaming BG-CuSum detector and its brute-force counterparts.

The streaming path (:func:`detector_step`) costs O(1) per sample.  Two
literal O(T^2) evaluations are kept alongside it: :func:`stilde_direct`
re-evaluates the nested maximisation that the recursion is supposed to
reproduce, and :func:`shat_statistic` is the GLR-style statistic that
searches every candidate change point with its own estimator window.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from . import _kernels
from .binning import BinPartition, assign_bins, bin_index
from .errors import IngestionError, ModelError

TIE_TOL = _kernels.TIE_TOL


@dataclass(frozen=True)
class DetectorConfig:
    n: int
    r: float | None = None
    b: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ModelError("N must be >= 1")
        if self.r is None:
            object.__setattr__(self, "r", float(self.n))
        if not self.r > 0:
            raise ModelError("regularizer R must be positive")
        if not self.b >= 0:
            raise ModelError("threshold b must be nonnegative")

    def with_threshold(self, b: float) -> "DetectorConfig":
        return DetectorConfig(self.n, self.r, b)


@dataclass
class DetectorState:
    t: int = 0
    lam: int = 1
    stat: float = 0.0
    window_counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    window_len: int = 0

    def copy(self) -> "DetectorState":
        return DetectorState(self.t, self.lam, self.stat, self.window_counts.copy(), self.window_len)


@dataclass
class StoppingReport:
    tau: int | None
    lambda_at_stop: int
    stat_at_stop: float
    samples_seen: int
    truncated: bool
    trace: list[tuple[int, float, int]] | None = None

    @property
    def alarmed(self) -> bool:
        return self.tau is not None


def _check(config: DetectorConfig, p: BinPartition) -> None:
    if config.n != p.n_continuous:
        raise ModelError(f"config N={config.n} does not match partition N={p.n_continuous}")


def detector_init(config: DetectorConfig, p: BinPartition) -> DetectorState:
    _check(config, p)
    return DetectorState(window_counts=np.zeros(p.n_bins, dtype=np.int64))


def ghat(state: DetectorState, config: DetectorConfig, p: BinPartition, j: int) -> float:
    """Regularized post-change mass estimate for 1-based bin ``j``."""
    if state.window_len == 0:
        return float(p.f_masses[j - 1])
    return (state.window_counts[j - 1] + config.r) / (p.n_bins * config.r + state.window_len)


def detector_step(state: DetectorState, config: DetectorConfig, p: BinPartition, x: float) -> DetectorState:
    """Consume one observation, updating ``state`` in place and returning it."""
    if not math.isfinite(x):
        raise IngestionError(f"non-finite observation {x!r}")
    j = bin_index(p, x)
    r = math.log(ghat(state, config, p, j) / p.f_masses[j - 1])
    s = state.stat + r
    if s > TIE_TOL or state.lam == state.t + 1:
        state.stat = s if s > TIE_TOL else 0.0
        state.window_counts[j - 1] += 1
        state.window_len += 1
    else:
        state.stat = 0.0
        state.lam = state.t + 2
        state.window_counts[:] = 0
        state.window_len = 0
    state.t += 1
    return state


class BGCuSum:
    """Convenience wrapper holding config, partition and state together.

    >>> from bgcusum.distributions import gaussian
    >>> from bgcusum.binning import partition_from_pdf
    >>> det = BGCuSum(DetectorConfig(n=4, b=5.0), partition_from_pdf(gaussian(), 4))
    >>> det.update(0.3)
    False
    """

    def __init__(self, config: DetectorConfig, partition: BinPartition):
        self.config = config
        self.partition = partition
        self.state = detector_init(config, partition)

    def reset(self) -> None:
        self.state = detector_init(self.config, self.partition)

    @property
    def stat(self) -> float:
        return self.state.stat

    @property
    def change_point(self) -> int:
        return self.state.lam

    def update(self, x: float) -> bool:
        detector_step(self.state, self.config, self.partition, x)
        return self.state.stat >= self.config.b


def run_until_stop(
    source: Iterable[float],
    config: DetectorConfig,
    p: BinPartition,
    cap: int | None = None,
    trace: bool = False,
) -> StoppingReport:
    """Feed ``source`` until the statistic reaches ``config.b`` or ``cap`` steps."""
    if cap is not None and cap < 1:
        raise ValueError("cap must be >= 1")
    state = detector_init(config, p)
    rows: list[tuple[int, float, int]] | None = [] if trace else None
    it: Iterator[float] = iter(source)
    while cap is None or state.t < cap:
        try:
            x = next(it)
        except StopIteration:
            break
        detector_step(state, config, p, float(x))
        if rows is not None:
            rows.append((state.t, state.stat, state.lam))
        if state.stat >= config.b:
            return StoppingReport(state.t, state.lam, state.stat, state.t, False, rows)
    return StoppingReport(None, state.lam, state.stat, state.t, True, rows)


def stilde_direct(stream, config: DetectorConfig, p: BinPartition) -> list[tuple[float, int]]:
    """Literal nested-maximum evaluation of the statistic and change point.

    At each ``t`` the estimator window starts at the previous change point
    ``lam``; all suffix sums over ``k in [lam, t+1]`` are recomputed from
    scratch (``k = lam + 1`` is excluded from the argmax, ties go to the
    largest ``k``).  Quadratic in the stream length; meant as an oracle.
    """
    _check(config, p)
    x = np.asarray(list(stream), dtype=float)
    if x.size == 0:
        return []
    bins = assign_bins(p, x)
    m = p.n_bins
    logf = np.log(p.f_masses)
    r_reg = config.r
    out: list[tuple[float, int]] = []
    lam = 1
    for t in range(1, x.size + 1):
        # samples x_lam..x_t (1-based) -> positions lam-1..t-1
        seg = bins[lam - 1 : t]
        onehot = np.zeros((seg.size, m))
        onehot[np.arange(seg.size), seg] = 1.0
        before = np.cumsum(onehot, axis=0) - onehot  # counts over x_lam..x_{i-1}
        n_before = np.arange(seg.size)
        cnt = before[np.arange(seg.size), seg]
        ghat_vals = np.where(
            n_before == 0,
            p.f_masses[seg],
            (cnt + r_reg) / (m * r_reg + n_before),
        )
        terms = np.log(ghat_vals) - logf[seg]
        # suffix sums for k = lam..t, plus the empty sum for k = t+1
        suffix = np.append(np.cumsum(terms[::-1])[::-1], 0.0)
        ks = np.arange(lam, t + 2)
        allowed = ks != lam + 1
        best = suffix[allowed].max()
        stat = max(best, 0.0) if best > TIE_TOL else 0.0
        if best > TIE_TOL:
            ties = allowed & (suffix >= best - TIE_TOL)
        else:
            ties = allowed & (suffix >= -TIE_TOL)
        lam = int(ks[ties].max())
        out.append((float(stat), lam))
    return out


def shat_statistic(stream, p: BinPartition, r: float) -> float:
    """Statistic maximising over every change point with its own window.

    Evaluated literally for the final time ``t``: for each candidate ``k``
    the estimator uses only ``x_k .. x_{i-1}`` when scoring ``x_i``.
    """
    x = np.asarray(list(stream), dtype=float)
    t = x.size
    if t == 0:
        return 0.0
    bins = assign_bins(p, x).tolist()
    m = p.n_bins
    logf = np.log(p.f_masses).tolist()
    fm = p.f_masses.tolist()
    best = 0.0
    for k in range(1, t + 1):
        counts = [0] * m
        total = 0.0
        for i in range(k, t + 1):
            j = bins[i - 1]
            n_prev = i - k
            g = fm[j] if n_prev == 0 else (counts[j] + r) / (m * r + n_prev)
            total += math.log(g) - logf[j]
            counts[j] += 1
        best = max(best, total)
    return best


def shat_path(stream, p: BinPartition, r: float) -> np.ndarray:
    """The same statistic at every ``t`` (O(T^2), compiled)."""
    bins = assign_bins(p, np.asarray(list(stream), dtype=float))
    out = np.zeros(bins.size)
    if bins.size:
        _kernels.shat_path(bins, np.log(p.f_masses), float(r), out)
    return out


def stat_path(stream, config: DetectorConfig, p: BinPartition) -> tuple[np.ndarray, np.ndarray]:
    """Recursive statistic and change point at every step (compiled)."""
    _check(config, p)
    bins = assign_bins(p, np.asarray(list(stream), dtype=float))
    stats = np.zeros(bins.size)
    lams = np.zeros(bins.size, dtype=np.int64)
    ist = np.array([0, 1, 0], dtype=np.int64)
    fst = np.zeros(1)
    counts = np.zeros(p.n_bins, dtype=np.int64)
    _kernels.stat_path(bins, np.log(p.f_masses), float(config.r), ist, fst, counts, stats, lams)
    return stats, lams


def oracle_cusum_step(stat: float, g_masses, f_masses, j: int) -> float:
    """Page's CuSum update with known bin masses; ``j`` is 1-based."""
    return max(stat + math.log(g_masses[j - 1] / f_masses[j - 1]), 0.0)
