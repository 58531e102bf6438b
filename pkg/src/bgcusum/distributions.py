"""Generalized pdfs: a continuous mixture plus point masses.

A model is ``p0 * f_c + sum_h p_h * delta(theta_h)`` where ``f_c`` is a
finite mixture of Gaussian, Laplace and uniform components.  Everything
here is immutable and safe to share between threads or processes.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import AbsoluteContinuityError, CalibrationError, ModelError

SUM_TOL = 1e-12
QUANTILE_TOL = 1e-10
QUANTILE_MAX_ITER = 200


@dataclass(frozen=True)
class Gaussian:
    mean: float
    var: float

    def __post_init__(self):
        if not (self.var > 0 and math.isfinite(self.var)):
            raise ModelError(f"gaussian variance must be positive, got {self.var}")

    @property
    def sd(self) -> float:
        return math.sqrt(self.var)

    def cdf(self, x):
        return ndtr((np.asarray(x, dtype=float) - self.mean) / self.sd)

    def pdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mean) / self.sd
        return np.exp(-0.5 * z * z) / (self.sd * math.sqrt(2 * math.pi))

    def ppf(self, u):
        return self.mean + self.sd * ndtri(np.asarray(u, dtype=float))

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.normal(self.mean, self.sd, size=n)

    def raw_moment(self, k: int) -> float:
        # E[(m + s Z)^k] = sum_i C(k,i) m^(k-i) s^i E[Z^i],  E[Z^i] = (i-1)!! for even i
        total = 0.0
        for i in range(0, k + 1, 2):
            total += math.comb(k, i) * self.mean ** (k - i) * self.sd**i * _double_factorial(i - 1)
        return total

    def spread(self) -> tuple[float, float]:
        return self.mean - self.sd, self.mean + self.sd

    def to_dict(self) -> dict:
        return {"family": "gaussian", "mean": self.mean, "var": self.var}


@dataclass(frozen=True)
class Laplace:
    loc: float
    scale: float

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ModelError(f"laplace scale must be positive, got {self.scale}")

    def cdf(self, x):
        z = (np.asarray(x, dtype=float) - self.loc) / self.scale
        # exp of the negative magnitude only, to avoid overflow warnings
        half = 0.5 * np.exp(-np.abs(z))
        return np.where(z < 0, half, 1.0 - half)

    def pdf(self, x):
        z = (np.asarray(x, dtype=float) - self.loc) / self.scale
        return np.exp(-np.abs(z)) / (2 * self.scale)

    def ppf(self, u):
        d = np.asarray(u, dtype=float) - 0.5
        return self.loc - self.scale * np.sign(d) * np.log1p(-2 * np.abs(d))

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.laplace(self.loc, self.scale, size=n)

    def raw_moment(self, k: int) -> float:
        # standard Laplace: E[L^i] = i! for even i, 0 for odd i
        total = 0.0
        for i in range(0, k + 1, 2):
            total += math.comb(k, i) * self.loc ** (k - i) * self.scale**i * math.factorial(i)
        return total

    def spread(self) -> tuple[float, float]:
        return self.loc - self.scale, self.loc + self.scale

    def to_dict(self) -> dict:
        return {"family": "laplace", "loc": self.loc, "scale": self.scale}


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not (self.hi > self.lo):
            raise ModelError(f"uniform needs lo < hi, got ({self.lo}, {self.hi})")

    def cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x > self.lo) & (x <= self.hi), 1.0 / (self.hi - self.lo), 0.0)

    def ppf(self, u):
        return self.lo + np.asarray(u, dtype=float) * (self.hi - self.lo)

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=n)

    def raw_moment(self, k: int) -> float:
        return (self.hi ** (k + 1) - self.lo ** (k + 1)) / ((k + 1) * (self.hi - self.lo))

    def spread(self) -> tuple[float, float]:
        return self.lo, self.hi

    def to_dict(self) -> dict:
        return {"family": "uniform", "lo": self.lo, "hi": self.hi}


Component = Union[Gaussian, Laplace, Uniform]


def _double_factorial(n: int) -> int:
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


@dataclass(frozen=True)
class GeneralizedPdf:
    """Mixture of a continuous density (weight ``p0``) and point masses.

    ``continuous`` holds ``(weight, component)`` pairs with weights summing
    to one; ``atoms`` holds ``(theta, p)`` pairs with strictly increasing
    locations and positive masses.
    """

    p0: float
    continuous: tuple[tuple[float, Component], ...]
    atoms: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "continuous", tuple((float(w), c) for w, c in self.continuous))
        object.__setattr__(self, "atoms", tuple((float(t), float(p)) for t, p in self.atoms))
        if not self.continuous:
            raise ModelError("at least one continuous component is required")
        if not (0.0 < self.p0 <= 1.0):
            raise ModelError(f"p0 must lie in (0, 1], got {self.p0}")
        weights = [w for w, _ in self.continuous]
        if any(w < 0 for w in weights) or abs(sum(weights) - 1.0) > SUM_TOL:
            raise ModelError(f"component weights must be nonnegative and sum to 1, got {weights}")
        thetas = [t for t, _ in self.atoms]
        if any(not math.isfinite(t) for t in thetas):
            raise ModelError("atom locations must be finite")
        if any(b <= a for a, b in zip(thetas, thetas[1:])):
            raise ModelError(f"atom locations must be strictly increasing, got {thetas}")
        masses = [p for _, p in self.atoms]
        if any(not (0.0 < p <= 1.0) for p in masses):
            raise ModelError(f"atom masses must lie in (0, 1], got {masses}")
        if abs(self.p0 + sum(masses) - 1.0) > SUM_TOL:
            raise ModelError(f"p0 + atom masses must equal 1, got {self.p0 + sum(masses)}")

    @property
    def thetas(self) -> np.ndarray:
        return np.array([t for t, _ in self.atoms], dtype=float)

    @property
    def atom_masses(self) -> np.ndarray:
        return np.array([p for _, p in self.atoms], dtype=float)

    def atom_mass(self, theta: float) -> float:
        for t, p in self.atoms:
            if t == theta:
                return p
        return 0.0

    def to_dict(self) -> dict:
        return {
            "p0": self.p0,
            "continuous": [{"w": w, **c.to_dict()} for w, c in self.continuous],
            "atoms": [{"theta": t, "p": p} for t, p in self.atoms],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GeneralizedPdf":
        try:
            comps = []
            for c in d["continuous"]:
                family = c["family"].lower()
                if family in ("gaussian", "normal"):
                    comp = Gaussian(float(c["mean"]), float(c["var"]))
                elif family == "laplace":
                    comp = Laplace(float(c["loc"]), float(c["scale"]))
                elif family == "uniform":
                    comp = Uniform(float(c["lo"]), float(c["hi"]))
                else:
                    raise ModelError(f"unknown family {c['family']!r}")
                comps.append((float(c.get("w", 1.0)), comp))
            atoms = [(float(a["theta"]), float(a["p"])) for a in d.get("atoms", [])]
            return cls(float(d.get("p0", 1.0)), tuple(comps), tuple(atoms))
        except (KeyError, TypeError) as exc:
            raise ModelError(f"malformed distribution specification: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "GeneralizedPdf":
        return cls.from_dict(json.loads(text))


def gaussian(mean: float = 0.0, var: float = 1.0) -> GeneralizedPdf:
    return GeneralizedPdf(1.0, ((1.0, Gaussian(mean, var)),))


def laplace(loc: float = 0.0, scale: float = 1.0) -> GeneralizedPdf:
    return GeneralizedPdf(1.0, ((1.0, Laplace(loc, scale)),))


def uniform(lo: float = 0.0, hi: float = 1.0) -> GeneralizedPdf:
    return GeneralizedPdf(1.0, ((1.0, Uniform(lo, hi)),))


def mixture(
    components: Sequence[tuple[float, Component]],
    atoms: Sequence[tuple[float, float]] = (),
    p0: float | None = None,
) -> GeneralizedPdf:
    """Build a model; ``p0`` defaults to one minus the atom masses."""
    if p0 is None:
        p0 = 1.0 - sum(p for _, p in atoms)
    return GeneralizedPdf(p0, tuple(components), tuple(atoms))


def cdf_continuous(dist: GeneralizedPdf, x):
    """CDF of the continuous part only (atoms excluded)."""
    out = sum(w * c.cdf(x) for w, c in dist.continuous)
    return float(out) if np.ndim(out) == 0 else out


def pdf_continuous(dist: GeneralizedPdf, x):
    out = sum(w * c.pdf(x) for w, c in dist.continuous)
    return float(out) if np.ndim(out) == 0 else out


def quantile_continuous(dist: GeneralizedPdf, u):
    """Inverse of :func:`cdf_continuous`.

    Single-component models use the closed-form inverse; mixtures use
    bracketed bisection, which returns the left-most float with
    ``F_c(x) >= u``.  Vectorized over ``u``.
    """
    u_arr = np.atleast_1d(np.asarray(u, dtype=float))
    if np.any(~((u_arr > 0) & (u_arr < 1))):
        raise CalibrationError("quantile level must lie strictly inside (0, 1)")
    if len(dist.continuous) == 1:
        x = dist.continuous[0][1].ppf(u_arr)
        if np.all(np.abs(cdf_continuous(dist, x) - u_arr) <= QUANTILE_TOL):
            return float(x[0]) if np.ndim(u) == 0 else x
    lo_s = min(c.spread()[0] for _, c in dist.continuous)
    hi_s = max(c.spread()[1] for _, c in dist.continuous)
    width = max(hi_s - lo_s, 1.0)
    lo = np.full_like(u_arr, lo_s - width)
    hi = np.full_like(u_arr, hi_s + width)

    for _ in range(QUANTILE_MAX_ITER):
        below = cdf_continuous(dist, lo) > u_arr
        above = cdf_continuous(dist, hi) < u_arr
        if not (below.any() or above.any()):
            break
        span = hi - lo
        lo = np.where(below, lo - span, lo)
        hi = np.where(above, hi + span, hi)
    else:
        raise CalibrationError("could not bracket quantile")

    for _ in range(QUANTILE_MAX_ITER):
        mid = lo + 0.5 * (hi - lo)
        if np.all((mid <= lo) | (mid >= hi)):
            break
        go_right = cdf_continuous(dist, mid) < u_arr
        lo = np.where(go_right, mid, lo)
        hi = np.where(go_right, hi, mid)

    err = np.abs(cdf_continuous(dist, hi) - u_arr)
    if np.any(err > QUANTILE_TOL):
        raise CalibrationError(f"quantile bisection did not converge (max error {err.max():.3g})")
    return float(hi[0]) if np.ndim(u) == 0 else hi


def sample(dist: GeneralizedPdf, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw ``n`` i.i.d. observations.

    Atoms are emitted with probability ``p_h``, the continuous mixture with
    probability ``p0``.  Output is a deterministic function of the RNG state.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return np.empty(0)
    out = np.empty(n)
    if dist.atoms:
        cum = np.cumsum([p for _, p in dist.atoms])
        label = np.searchsorted(cum, rng.random(n), side="right")
        for h, (theta, _) in enumerate(dist.atoms):
            out[label == h] = theta
        cont = label == len(dist.atoms)
    else:
        cont = np.ones(n, dtype=bool)
    m = int(cont.sum())
    if len(dist.continuous) == 1:
        out[cont] = dist.continuous[0][1].draw(rng, m)
    else:
        cum = np.cumsum([w for w, _ in dist.continuous])
        which = np.minimum(np.searchsorted(cum, rng.random(m), side="right"), len(cum) - 1)
        vals = np.empty(m)
        for i, (_, comp) in enumerate(dist.continuous):
            sel = which == i
            vals[sel] = comp.draw(rng, int(sel.sum()))
        out[cont] = vals
    return out


def moment(dist: GeneralizedPdf, k: int) -> float:
    """Raw moment ``E[X^k]`` in closed form for every supported family."""
    if k < 1:
        raise ValueError("moment order must be >= 1")
    cont = sum(w * c.raw_moment(k) for w, c in dist.continuous)
    return dist.p0 * cont + sum(p * t**k for t, p in dist.atoms)


def kl_binned(g_masses, f_masses) -> float:
    """KL divergence between two bin-mass vectors, with 0 log 0 = 0."""
    g = np.asarray(g_masses, dtype=float)
    f = np.asarray(f_masses, dtype=float)
    if g.shape != f.shape:
        raise ValueError("mass vectors must have equal length")
    if abs(g.sum() - 1) > 1e-9 or abs(f.sum() - 1) > 1e-9:
        raise ValueError("mass vectors must each sum to 1")
    if np.any((f <= 0) & (g > 0)):
        raise AbsoluteContinuityError("g has mass on a bin where f has none")
    pos = g > 0
    return float(max(np.sum(g[pos] * np.log(g[pos] / f[pos])), 0.0))
