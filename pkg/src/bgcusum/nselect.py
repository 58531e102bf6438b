"""Choosing the number of bins.

Two routes: an exact characterization through the set of CDF crossing
levels, and a moment-based search that only needs a bound on how far the
post-change ``k``-th moment moves and a polynomial tail bound on the
densities.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .binning import DISTINGUISH_TOL, partition_from_pdf
from .distributions import GeneralizedPdf, cdf_continuous, moment, quantile_continuous
from .errors import DivergentBoundError, ModelError, NonTerminationError

MEMBERSHIP_TOL = 1e-7
ZERO_TOL = 1e-13


@dataclass(frozen=True)
class NSelectionParams:
    k: int
    eps: float
    C: float
    xi: float

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ModelError("moment order k must be a positive integer")
        if not (self.eps > 0 and self.C > 0 and self.xi > 0):
            raise ModelError("eps, C and xi must be positive")


@dataclass(frozen=True)
class CrossingSet:
    """Levels ``F_c(x)`` at which the two continuous CDFs coincide.

    ``values`` are isolated levels (always including 0 and 1);
    ``intervals`` are images of stretches where the CDFs agree identically.
    """

    values: tuple[float, ...]
    intervals: tuple[tuple[float, float], ...] = ()
    tolerance: float = MEMBERSHIP_TOL

    def __contains__(self, u: float) -> bool:
        if any(abs(u - v) <= self.tolerance for v in self.values):
            return True
        return any(lo - self.tolerance <= u <= hi + self.tolerance for lo, hi in self.intervals)

    @property
    def cardinality(self) -> int | None:
        """``|I|``, or None when a plateau makes the set infinite."""
        return None if self.intervals else len(self.values)


def _bisect_root(fn, lo: float, hi: float, tol: float) -> float:
    flo = fn(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol or mid in (lo, hi):
            break
        fm = fn(mid)
        if fm == 0.0:
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def crossing_set(
    f: GeneralizedPdf, g: GeneralizedPdf, grid_points: int = 4096, tol: float = 1e-10
) -> CrossingSet:
    """Scan ``F_c - G_c`` on an f-quantile grid and bisect each sign change."""
    if grid_points < 100:
        raise ValueError("grid_points must be >= 100")
    levels = (np.arange(grid_points) + 0.5) / grid_points
    xs = quantile_continuous(f, levels)

    def diff(x):
        return cdf_continuous(f, x) - cdf_continuous(g, x)

    d = diff(xs)
    zero = np.abs(d) <= ZERO_TOL
    values = {0.0, 1.0}
    intervals = []

    # stretches of numerically-zero difference
    i = 0
    while i < grid_points:
        if zero[i]:
            j = i
            while j + 1 < grid_points and zero[j + 1]:
                j += 1
            if j > i:
                lo = 0.0 if i == 0 else float(cdf_continuous(f, xs[i]))
                hi = 1.0 if j == grid_points - 1 else float(cdf_continuous(f, xs[j]))
                intervals.append((lo, hi))
            else:
                values.add(float(cdf_continuous(f, xs[i])))
            i = j + 1
        else:
            i += 1

    sign = np.sign(d)
    for i in range(grid_points - 1):
        if not zero[i] and not zero[i + 1] and sign[i] != sign[i + 1]:
            root = _bisect_root(diff, float(xs[i]), float(xs[i + 1]), tol)
            values.add(float(cdf_continuous(f, root)))

    merged: list[float] = []
    for v in sorted(values):
        if not merged or v - merged[-1] > MEMBERSHIP_TOL:
            merged.append(v)
    return CrossingSet(tuple(merged), tuple(intervals))


def atoms_differ(f: GeneralizedPdf, g: GeneralizedPdf, tol: float = DISTINGUISH_TOL) -> bool:
    if abs(f.p0 - g.p0) > tol:
        return True
    thetas = {t for t, _ in f.atoms} | {t for t, _ in g.atoms}
    return any(abs(f.atom_mass(t) - g.atom_mass(t)) > tol for t in thetas)


def check_prop_a1(f: GeneralizedPdf, g: GeneralizedPdf, n: int, crossings: CrossingSet | None = None) -> bool:
    """Exact distinguishability test: an atom mass differs, or some ``i/N`` is not a crossing level."""
    if atoms_differ(f, g):
        return True
    if crossings is None:
        crossings = crossing_set(f, g)
    return any((i / n) not in crossings for i in range(n + 1))


def _interior_extrema(z: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    a, b = z[:-1], z[1:]
    pa, pb = a**k, b**k
    hi = np.maximum(pa, pb)
    lo = np.minimum(pa, pb)
    straddle = (a < 0) & (b > 0)
    hi = np.where(straddle, np.maximum(hi, 0.0), hi)
    lo = np.where(straddle, np.minimum(lo, 0.0), lo)
    return hi, lo


def mn_bounds(f: GeneralizedPdf, params: NSelectionParams, n: int) -> tuple[float, float]:
    """Envelope ``(m_N, M_N)`` on the ``k``-th post-change moment.

    Valid whenever the post-change model is not distinguishable at ``N``.
    Tail integrals use ``C x^k / |x|^(k+1+xi) = +-C / |x|^(1+xi)``, which
    integrates to ``C |z|^(-xi) / xi`` beyond a boundary ``z``.
    """
    if n < 3:
        raise DivergentBoundError("need N >= 3 for interior bins")
    k, C, xi = params.k, params.C, params.xi
    z = partition_from_pdf(f, n).boundaries
    z1, zn = float(z[0]), float(z[-1])
    if not (z1 < 0.0 < zn):
        # the outer bins would reach x = 0, where the tail bound is not integrable
        raise DivergentBoundError(f"outer boundaries must straddle 0, got z_1={z1}, z_N-1={zn}")
    hi, lo = _interior_extrema(z, k)
    right = C * zn ** (-xi) / xi
    tail = right + (C * abs(z1) ** (-xi) / xi if k % 2 == 0 else 0.0)
    atoms = sum(p * t**k for t, p in f.atoms)
    big = f.p0 * (hi.sum() / n + tail) + atoms
    small = f.p0 * (lo.sum() / n) + atoms
    return float(small), float(big)


@dataclass
class NSearchResult:
    n: int
    target: float
    sweep: list[tuple[int, float | None, float | None]] = field(default_factory=list)


def choose_n_search(f: GeneralizedPdf, params: NSelectionParams, n_max: int = 10_000) -> NSearchResult:
    """Smallest ``N >= max(k, 3)`` whose envelope fits inside ``E^f[X^k] +- eps``."""
    target = moment(f, params.k)
    n = max(params.k, 3)
    sweep = []
    while n <= n_max:
        try:
            m_n, big_m = mn_bounds(f, params, n)
        except DivergentBoundError:
            sweep.append((n, None, None))
        else:
            sweep.append((n, m_n, big_m))
            if big_m <= target + params.eps and m_n >= target - params.eps:
                return NSearchResult(n, target, sweep)
        n += 1
    raise NonTerminationError(f"no N <= {n_max} satisfies the moment envelope; tail bound too loose?")


def choose_n(f: GeneralizedPdf, params: NSelectionParams, n_max: int = 10_000) -> int:
    return choose_n_search(f, params, n_max).n


def mn_sweep(f: GeneralizedPdf, params: NSelectionParams, ns) -> list[tuple[int, float, float]]:
    return [(int(n), *mn_bounds(f, params, int(n))) for n in ns]
