"""Equiprobable bin partitions and distinguishability.

``N`` continuous bins ``(z_{j-1}, z_j]`` each carry mass ``1/N`` of the
pre-change continuous part; every atom gets its own singleton bin, placed
after the continuous ones.  Public bin indices are 1-based; the array
helpers used by the simulation kernels are 0-based.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .distributions import GeneralizedPdf, cdf_continuous, quantile_continuous
from .errors import (
    AbsoluteContinuityError,
    CalibrationError,
    IngestionError,
    InsufficientDataError,
    ModelError,
)

DISTINGUISH_TOL = 1e-9


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class BinPartition:
    n_continuous: int
    boundaries: np.ndarray
    atoms: np.ndarray
    f_masses: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "boundaries", _frozen(self.boundaries))
        object.__setattr__(self, "atoms", _frozen(self.atoms))
        object.__setattr__(self, "f_masses", _frozen(self.f_masses))
        n = self.n_continuous
        if n < 1:
            raise ModelError("need at least one continuous bin")
        if self.boundaries.shape != (n - 1,):
            raise ModelError(f"expected {n - 1} boundaries, got {self.boundaries.size}")
        if np.any(np.diff(self.boundaries) <= 0) or not np.all(np.isfinite(self.boundaries)):
            raise CalibrationError("boundaries must be finite and strictly increasing")
        if np.any(np.diff(self.atoms) <= 0):
            raise ModelError("atoms must be sorted and distinct")
        if self.f_masses.shape != (n + self.atoms.size,):
            raise ModelError("f_masses length must equal N + H")
        if abs(self.f_masses.sum() - 1.0) > 1e-9 or np.any(self.f_masses <= 0):
            raise ModelError("f_masses must be positive and sum to 1")
        if np.ptp(self.f_masses[:n]) > 1e-15:
            raise ModelError("continuous bins must be equiprobable")

    @property
    def n_bins(self) -> int:
        return self.n_continuous + self.atoms.size

    @property
    def p0(self) -> float:
        return float(self.f_masses[: self.n_continuous].sum())

    def __eq__(self, other):
        if not isinstance(other, BinPartition):
            return NotImplemented
        return (
            self.n_continuous == other.n_continuous
            and np.array_equal(self.boundaries, other.boundaries)
            and np.array_equal(self.atoms, other.atoms)
            and np.array_equal(self.f_masses, other.f_masses)
        )

    def to_dict(self) -> dict:
        return {
            "n": self.n_continuous,
            "boundaries": self.boundaries.tolist(),
            "atoms": self.atoms.tolist(),
            "f_masses": self.f_masses.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BinPartition":
        try:
            return cls(int(d["n"]), d["boundaries"], d.get("atoms", []), d["f_masses"])
        except (KeyError, TypeError) as exc:
            raise ModelError(f"malformed calibration artifact: {exc}") from exc

    def save(self, path) -> None:
        # json writes floats via repr, which round-trips exactly
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "BinPartition":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _f_masses(n: int, p0: float, atom_masses: Sequence[float]) -> np.ndarray:
    return np.concatenate([np.full(n, p0 / n), np.asarray(atom_masses, dtype=float)])


def partition_from_pdf(f: GeneralizedPdf, n: int) -> BinPartition:
    """Boundaries at the ``j/N`` quantiles of the continuous part of ``f``."""
    if n < 1:
        raise ModelError("N must be >= 1")
    levels = np.arange(1, n) / n
    bounds = quantile_continuous(f, levels) if n > 1 else np.empty(0)
    return BinPartition(n, bounds, f.thetas, _f_masses(n, f.p0, f.atom_masses))


def partition_from_samples(
    samples,
    n: int,
    atoms: Sequence[float] = (),
    p0: float = 1.0,
    atom_masses: Sequence[float] = (),
) -> BinPartition:
    """Boundaries from order statistics of continuous-part reference data.

    ``z_j = x_(floor(j T / N))`` with 1-based order statistics.  Atoms and
    their masses are supplied explicitly, never inferred from ties.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise IngestionError("reference samples must be finite")
    if n < 1:
        raise ModelError("N must be >= 1")
    if x.size < n:
        raise InsufficientDataError(f"need at least N={n} samples, got {x.size}")
    if len(atoms) != len(atom_masses):
        raise ModelError("atoms and atom_masses must have equal length")
    if abs(p0 + sum(atom_masses) - 1.0) > 1e-12:
        raise ModelError("p0 + atom masses must equal 1")
    xs = np.sort(x)
    t = xs.size
    idx = np.array([(j * t) // n for j in range(1, n)], dtype=int) - 1
    bounds = xs[idx]
    if np.any(np.diff(bounds) <= 0):
        raise CalibrationError("tied order statistics give repeated boundaries; use fewer bins")
    return BinPartition(n, bounds, np.asarray(atoms, dtype=float), _f_masses(n, p0, atom_masses))


def bin_index(p: BinPartition, x: float) -> int:
    """1-based bin of ``x``: atom bins first, then ``(z_{j-1}, z_j]``."""
    if p.atoms.size:
        hit = np.flatnonzero(p.atoms == x)
        if hit.size:
            return p.n_continuous + int(hit[0]) + 1
    return int(np.searchsorted(p.boundaries, x, side="left")) + 1


def assign_bins(p: BinPartition, x) -> np.ndarray:
    """0-based bin indices for an array of observations."""
    x = np.asarray(x, dtype=float)
    out = np.searchsorted(p.boundaries, x, side="left").astype(np.int64)
    if p.atoms.size:
        pos = np.searchsorted(p.atoms, x, side="left")
        pos_c = np.minimum(pos, p.atoms.size - 1)
        on_atom = p.atoms[pos_c] == x
        out[on_atom] = p.n_continuous + pos_c[on_atom]
    return out


def bin_masses_of(p: BinPartition, g: GeneralizedPdf) -> np.ndarray:
    """Mass that ``g`` assigns to each bin of ``p``."""
    known = set(p.atoms.tolist())
    stray = [t for t, _ in g.atoms if t not in known]
    if stray:
        raise AbsoluteContinuityError(f"g has atoms outside the partition: {stray}")
    edges = np.concatenate([[0.0], cdf_continuous(g, p.boundaries) if p.boundaries.size else [], [1.0]])
    cont = g.p0 * np.diff(edges)
    atom = np.array([g.atom_mass(t) for t in p.atoms.tolist()])
    return np.concatenate([cont, atom])


def is_distinguishable(f: GeneralizedPdf, g: GeneralizedPdf, n: int, tol: float = DISTINGUISH_TOL) -> bool:
    p = partition_from_pdf(f, n)
    return bool(np.any(np.abs(bin_masses_of(p, g) - p.f_masses) > tol))


def smallest_distinguishable_n(
    f: GeneralizedPdf, g: GeneralizedPdf, n_max: int = 64, tol: float = DISTINGUISH_TOL
) -> int | None:
    """Least ``N <= n_max`` at which ``g`` differs from ``f`` on some bin."""
    for n in range(1, n_max + 1):
        if is_distinguishable(f, g, n, tol):
            return n
    return None


def mc_bin_frequencies(p: BinPartition, x) -> np.ndarray:
    """Empirical bin frequencies of a sample (diagnostic helper)."""
    counts = np.bincount(assign_bins(p, x), minlength=p.n_bins)
    return counts / max(len(x), 1)


__all__ = [
    "BinPartition",
    "assign_bins",
    "bin_index",
    "bin_masses_of",
    "is_distinguishable",
    "mc_bin_frequencies",
    "partition_from_pdf",
    "partition_from_samples",
    "smallest_distinguishable_n",
]

