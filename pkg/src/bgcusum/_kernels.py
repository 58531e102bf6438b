"""Compiled inner loops for Monte Carlo runs.

All kernels work on 0-based bin indices and keep the detector state in
small arrays so a run can be resumed across sample chunks:

    ist = [t, lam, window_len]   (int64)
    fst = [stat]                 (float64)
    counts                       (int64, one per bin)
"""
from __future__ import annotations

import numpy as np
from numba import njit

# Sums within this distance of zero count as zero when deciding resets.
TIE_TOL = 1e-12


@njit(cache=True)
def _step(j, logf, r_reg, mr, ist, fst, counts):
    wlen = ist[2]
    if wlen == 0:
        r = 0.0
    else:
        r = np.log((counts[j] + r_reg) / (mr + wlen)) - logf[j]
    t_new = ist[0] + 1
    s = fst[0] + r
    if s > TIE_TOL:
        fst[0] = s
        counts[j] += 1
        ist[2] = wlen + 1
    elif ist[1] == t_new:
        fst[0] = 0.0
        counts[j] += 1
        ist[2] = wlen + 1
    else:
        fst[0] = 0.0
        ist[1] = t_new + 1
        counts[:] = 0
        ist[2] = 0
    ist[0] = t_new


@njit(cache=True)
def first_passage(bins, logf, r_reg, b, ist, fst, counts):
    """Advance until ``stat >= b``; return the chunk offset of the alarm or -1."""
    mr = logf.size * r_reg
    for i in range(bins.size):
        _step(bins[i], logf, r_reg, mr, ist, fst, counts)
        if fst[0] >= b:
            return i
    return -1


@njit(cache=True)
def stat_path(bins, logf, r_reg, ist, fst, counts, out_stat, out_lam):
    mr = logf.size * r_reg
    for i in range(bins.size):
        _step(bins[i], logf, r_reg, mr, ist, fst, counts)
        out_stat[i] = fst[0]
        out_lam[i] = ist[1]


@njit(cache=True)
def renewal_cycles(bins, logf, r_reg, b, guard, ist, fst, counts, out_len, out_cross, n_done):
    """Run independent excursions from the zero state.

    A cycle ends at an upper crossing (``stat >= b``) or when the statistic
    sits at zero after more than ``guard`` steps; the detector is then
    restarted fresh.  Fills ``out_len``/``out_cross`` from index ``n_done``
    and returns the new count; a partial cycle stays in the state arrays.
    """
    mr = logf.size * r_reg
    k = n_done
    for i in range(bins.size):
        if k >= out_len.size:
            break
        _step(bins[i], logf, r_reg, mr, ist, fst, counts)
        t = ist[0]
        crossed = fst[0] >= b
        if crossed or (fst[0] <= 0.0 and t > guard):
            out_len[k] = t
            out_cross[k] = crossed
            k += 1
            ist[0] = 0
            ist[1] = 1
            ist[2] = 0
            fst[0] = 0.0
            counts[:] = 0
    return k


@njit(cache=True)
def shat_first_passage(bins, logf, r_reg, b, t0, hist, acc, cap):
    """GLR statistic with a fresh estimator window per candidate change point.

    ``hist`` holds the bins seen so far (first ``t0`` entries valid) and
    ``acc[k]`` the running log-likelihood sum for change point ``k+1``.
    Returns ``(t, alarm)`` where alarm means ``stat > b`` at step ``t``.
    """
    m = logf.size
    mr = m * r_reg
    t = t0
    for i in range(bins.size):
        if t >= cap:
            return t, False
        j = bins[i]
        # window for change point k (1-based) is x_k..x_t; walk k downward
        cnt = 0
        best = 0.0
        for k in range(t, 0, -1):
            if hist[k - 1] == j:
                cnt += 1
            acc[k - 1] += np.log((cnt + r_reg) / (mr + t - k + 1)) - logf[j]
            if acc[k - 1] > best:
                best = acc[k - 1]
        hist[t] = j
        acc[t] = 0.0
        t += 1
        if best > b:
            return t, True
    return t, False


@njit(cache=True)
def shat_path(bins, logf, r_reg, out):
    m = logf.size
    mr = m * r_reg
    n = bins.size
    acc = np.zeros(n + 1)
    for t in range(n):
        j = bins[t]
        cnt = 0
        best = 0.0
        for k in range(t, 0, -1):
            if bins[k - 1] == j:
                cnt += 1
            acc[k - 1] += np.log((cnt + r_reg) / (mr + t - k + 1)) - logf[j]
            if acc[k - 1] > best:
                best = acc[k - 1]
        out[t] = best
