"""Exit criteria, each run at its stated tolerance.

Every test prints one PASS/FAIL line; the lines are repeated in the pytest
terminal summary.  Run alone with ``pytest -m acceptance -s``.
"""
import math
import time

import numpy as np
import pytest
from scipy import optimize

from bgcusum.binning import is_distinguishable, smallest_distinguishable_n
from bgcusum.cli import main as cli_main
from bgcusum.detector import DetectorConfig, stat_path, stilde_direct
from bgcusum.distributions import gaussian, laplace
from bgcusum.evaluation import (
    ExperimentSpec,
    add_slope_study,
    binned_kl,
    calibrate_threshold,
    calibrate_threshold_direct,
    estimate_add,
    estimate_arl_direct,
    estimate_arl_renewal,
    growth_rate_check,
)
from bgcusum.nselect import NSelectionParams, check_prop_a1, choose_n, crossing_set, mn_sweep

from conftest import PAIR_MATRIX, record_criterion
from streams import random_case

pytestmark = pytest.mark.acceptance

F = gaussian()
SUITE = DetectorConfig(16, 16.0)
# criteria 3-5 span several parametrized cases; verdicts accumulate here
TABLE_ROWS: dict[int, list] = {}


@pytest.fixture(scope="module")
def suite_threshold():
    """b for N = R = 16 with renewal ARL 500 within 5%."""
    cal = calibrate_threshold(F, SUITE, 500, tol=0.05, cycles=1_000_000, master_seed=11)
    assert abs(cal.arl - 500) <= 25
    return cal.b


def table_add(b, g, seed):
    spec = ExperimentSpec(F, SUITE.with_threshold(b), g, nu=300, trials=5000, cap=1_000_000, master_seed=seed)
    return estimate_add(spec)


def test_recursion_equals_direct_evaluation():
    t0 = time.perf_counter()
    worst, mismatched = 0.0, 0
    for seed in range(1000):
        x, cfg, p = random_case(seed, max_len=300)
        stats, lams = stat_path(x, cfg, p)
        direct = stilde_direct(x, cfg, p)
        worst = max(worst, float(np.max(np.abs(stats - [s for s, _ in direct]))))
        mismatched += lams.tolist() != [lam for _, lam in direct]
    secs = time.perf_counter() - t0
    ok = worst <= 1e-9 and mismatched == 0 and secs < 60
    assert record_criterion(1, ok, f"1000 streams, max |diff| {worst:.2e}, lambda mismatches {mismatched}, {secs:.1f}s")


def test_arl_lower_bound():
    lines, ok = [], True
    for i, b in enumerate([1.0, 2.0, math.log(200)]):
        cfg = SUITE.with_threshold(b)
        direct = estimate_arl_direct(ExperimentSpec(F, cfg, trials=5000, cap=2_000_000, master_seed=20 + i))
        ren = estimate_arl_renewal(ExperimentSpec(F, cfg, trials=2_000_000, master_seed=30 + i))
        p, se = ren.extra["p_cross"], ren.extra["p_cross_se"]
        bound = math.exp(-b) * (1 + 3 * se / p)
        ok &= direct.ci_lo >= 0.9 * math.exp(b) and p <= bound
        lines.append(f"b={b:.3f}: ARL lo {direct.ci_lo:.1f} vs {0.9 * math.exp(b):.1f} "
                     f"(trunc {direct.truncated}), p {p:.3g} vs {bound:.3g}")
    assert record_criterion(2, ok, "; ".join(lines))


@pytest.mark.parametrize("crit,label,g,target,tol", [
    (3, "mean 3", gaussian(3.0, 1.0), 2.3, 0.5),
    (3, "mean 1.5", gaussian(1.5, 1.0), 6.6, 1.0),
    (4, "sd 0.2", gaussian(0.0, 0.04), 10.5, 2.0),
    (4, "sd 2", gaussian(0.0, 4.0), 21.5, 3.0),
    (5, "laplace 0.7071", laplace(0.0, 0.7071), 154.0, 20.0),
])
def test_table_delays(suite_threshold, crit, label, g, target, tol):
    rep = table_add(suite_threshold, g, seed=40 + crit)
    ok = abs(rep.estimate - target) <= tol
    prev = TABLE_ROWS.setdefault(crit, [])
    prev.append((ok, f"{label}: ADD {rep.estimate:.2f}+-{rep.se:.2f} vs {target}+-{tol}"))
    record_criterion(crit, all(o for o, _ in prev), f"b={suite_threshold:.4f}; " + "; ".join(d for _, d in prev))
    assert ok, prev[-1][1]


def test_growth_rate():
    res = growth_rate_check(F, gaussian(1.0, 1.0), SUITE, 20_000, range(9))
    err = res.median_abs_error
    assert record_criterion(6, err <= 0.05, f"median |S/t - KL| = {err:.4f} (KL {res.kl:.4f})")


def test_n_selection():
    n_approx = choose_n(F, NSelectionParams(k=2, eps=0.5, C=1.9, xi=4))
    n_exact = smallest_distinguishable_n(F, gaussian(0.0, 0.5))
    disagreements = 0
    for f, g in PAIR_MATRIX.values():
        levels = crossing_set(f, g)
        disagreements += sum(check_prop_a1(f, g, n, levels) != is_distinguishable(f, g, n) for n in range(1, 33))
    ok = n_approx == 25 and n_exact == 3 and disagreements == 0
    assert record_criterion(7, ok, f"choose_n {n_approx}, smallest N {n_exact}, A1 disagreements {disagreements}")


def test_moment_envelope_converges():
    # C = 11 bounds phi(x) |x|^7 for the standard normal; see test_nselect for why 1.9 does not
    sweep = mn_sweep(F, NSelectionParams(k=2, eps=0.5, C=11.0, xi=4), [2**d for d in range(2, 11)])
    brackets = all(m <= 1.0 <= big for _, m, big in sweep)
    _, m, big = sweep[-1]
    ok = brackets and abs(big - 1) <= 0.1 and abs(1 - m) <= 0.1
    assert record_criterion(8, ok, f"bracketed {brackets}; N=1024 m {m:.4f} M {big:.4f}")


def mean_shift_with_kl(n, k):
    delta = optimize.brentq(lambda d: binned_kl(F, gaussian(d, 1.0), n) - k, 1e-3, 10.0, xtol=1e-12)
    return gaussian(delta, 1.0)


def test_delay_slope():
    k = 1.0
    g = mean_shift_with_kl(4, k)
    rows = add_slope_study(F, g, DetectorConfig(4), [20.0], 10.0, 4000, master_seed=90)
    slope = rows[0].delta
    ok = abs(slope - 1 / k) <= 0.25 / k
    assert record_criterion(9, ok, f"N=4 KL={k}: slope {slope:.3f}+-{rows[0].se_delta:.3f} vs {1 / k}")


def test_window_vs_full_search_delay():
    g = mean_shift_with_kl(4, 0.25)
    cfg = DetectorConfig(4)
    tilde_b = calibrate_threshold(F, cfg, 500, cycles=1_000_000, master_seed=5).b
    base = ExperimentSpec(F, cfg, trials=800, cap=20_000, master_seed=6)
    hat = calibrate_threshold_direct(base, 500, tol=0.05, statistic="hat", b_start=tilde_b + 0.5)
    add_tilde = estimate_add(ExperimentSpec(F, cfg.with_threshold(tilde_b), g, 1, 5000, 1_000_000, 7))
    add_hat = estimate_add(ExperimentSpec(F, cfg.with_threshold(hat.b), g, 1, 1000, 20_000, 8), "hat")
    rel = add_tilde.estimate / add_hat.estimate - 1
    ok = abs(rel) <= 0.15 and hat.arl >= 475
    assert record_criterion(10, ok, f"ADD tilde {add_tilde.estimate:.2f} (b {tilde_b:.3f}) vs hat "
                                    f"{add_hat.estimate:.2f} (b {hat.b:.3f}, ARL {hat.arl:.0f}): {rel:+.1%}")


def test_bench_worker_invariance(tmp_path):
    argv = ["bench", "--model", "gaussian:0,1", "--post", "gaussian:1,1", "--n", "16", "--target-arl", "200",
            "--trials", "2000", "--cycles", "200000", "--nu", "50", "--metrics", "arl,arl_renewal,add", "--seed", "17"]
    outs = []
    for workers in (1, 2, 4):
        out = tmp_path / f"w{workers}.csv"
        assert cli_main(argv + ["--workers", str(workers), "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    ok = outs[0] == outs[1] == outs[2]
    assert record_criterion(11, ok, f"workers 1/2/4 CSV identical: {ok} ({len(outs[0])} bytes)")
