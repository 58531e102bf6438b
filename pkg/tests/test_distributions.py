import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from bgcusum.distributions import (
    Gaussian,
    GeneralizedPdf,
    Laplace,
    Uniform,
    cdf_continuous,
    gaussian,
    kl_binned,
    laplace,
    mixture,
    moment,
    pdf_continuous,
    quantile_continuous,
    sample,
    uniform,
)
from bgcusum.errors import AbsoluteContinuityError, CalibrationError, ModelError

from conftest import atom_model

BIMODAL = mixture([(0.6, Gaussian(1.0, 1.0)), (0.4, Gaussian(-1.0, 1.0))])


# ---------------------------------------------------------------- validation


@pytest.mark.parametrize(
    "build",
    [
        lambda: GeneralizedPdf(0.0, ((1.0, Gaussian(0, 1)),), ((0.0, 1.0),)),
        lambda: GeneralizedPdf(1.0, ((0.5, Gaussian(0, 1)),)),
        lambda: GeneralizedPdf(1.0, ((1.2, Gaussian(0, 1)), (-0.2, Gaussian(1, 1)))),
        lambda: GeneralizedPdf(0.5, ((1.0, Gaussian(0, 1)),), ((1.0, 0.25), (1.0, 0.25))),
        lambda: GeneralizedPdf(0.5, ((1.0, Gaussian(0, 1)),), ((1.0, 0.25), (-1.0, 0.25))),
        lambda: GeneralizedPdf(0.6, ((1.0, Gaussian(0, 1)),), ((1.0, 0.25),)),
        lambda: GeneralizedPdf(1.0, (), ()),
        lambda: mixture([(1.0, Gaussian(0, 1))], atoms=[(2.0, 0.0)], p0=1.0),
        lambda: Gaussian(0.0, 0.0),
        lambda: Laplace(0.0, -1.0),
        lambda: Uniform(1.0, 1.0),
    ],
)
def test_invalid_models_rejected(build):
    with pytest.raises(ModelError):
        build()


def test_json_roundtrip_preserves_model():
    f = mixture([(0.3, Laplace(0.5, 2.0)), (0.7, Uniform(-1, 3))], atoms=[(-2.0, 0.1), (4.0, 0.2)])
    assert GeneralizedPdf.from_json(f.to_json()) == f


def test_unknown_family_is_model_error():
    with pytest.raises(ModelError):
        GeneralizedPdf.from_dict({"p0": 1.0, "continuous": [{"w": 1.0, "family": "cauchy", "loc": 0}]})


def test_missing_field_is_model_error():
    with pytest.raises(ModelError):
        GeneralizedPdf.from_dict({"p0": 1.0, "continuous": [{"w": 1.0, "family": "gaussian", "mean": 0}]})


# ---------------------------------------------------------------- cdf / quantile


def test_cdf_standard_gaussian_limits():
    assert cdf_continuous(gaussian(), 0.0) == 0.5
    assert cdf_continuous(gaussian(), math.inf) == 1.0
    assert cdf_continuous(gaussian(), -math.inf) == 0.0


def test_cdf_ignores_atoms():
    assert cdf_continuous(atom_model(), 0.0) == 0.5


def test_mixture_cdf_against_integrated_density():
    # independent oracle: quadrature of the mixture density
    ref, _ = integrate.quad(lambda x: pdf_continuous(BIMODAL, x), -np.inf, 0.0, epsabs=1e-13, epsrel=1e-12)
    closed = 0.6 * stats.norm.cdf(-1.0) + 0.4 * stats.norm.cdf(1.0)
    assert cdf_continuous(BIMODAL, 0.0) == pytest.approx(ref, abs=1e-10)
    assert cdf_continuous(BIMODAL, 0.0) == pytest.approx(closed, abs=1e-12)


@pytest.mark.parametrize(
    "dist, frozen",
    [
        (laplace(0.5, 2.0), stats.laplace(0.5, 2.0)),
        (uniform(-1.0, 3.0), stats.uniform(-1.0, 4.0)),
        (gaussian(1.0, 4.0), stats.norm(1.0, 2.0)),
    ],
)
def test_cdf_matches_scipy(dist, frozen):
    xs = np.linspace(-6, 6, 101)
    np.testing.assert_allclose(cdf_continuous(dist, xs), frozen.cdf(xs), atol=1e-13)


def test_quantile_examples():
    assert quantile_continuous(gaussian(), 0.5) == 0.0
    assert quantile_continuous(gaussian(), 0.25) == pytest.approx(stats.norm.ppf(0.25), abs=1e-9)
    assert quantile_continuous(gaussian(), 0.25) == pytest.approx(-0.67449, abs=1e-5)
    assert quantile_continuous(uniform(0, 1), 0.3) == pytest.approx(0.3, abs=1e-12)


def test_mixture_quantile_hits_level():
    us = np.array([1e-6, 0.01, 0.3, 0.5, 0.77, 0.999999])
    xs = quantile_continuous(BIMODAL, us)
    assert np.all(np.abs(cdf_continuous(BIMODAL, xs) - us) <= 1e-10)


@pytest.mark.parametrize("u", [0.0, 1.0, -0.1, 1.5])
def test_quantile_rejects_levels_outside_open_interval(u):
    with pytest.raises(CalibrationError):
        quantile_continuous(gaussian(), u)


DISTS = [gaussian(), gaussian(-2.0, 0.09), laplace(1.0, 0.3), uniform(-3, 5), BIMODAL,
         mixture([(0.5, Laplace(-4.0, 1.0)), (0.5, Uniform(0.0, 1.0))])]


@given(st.sampled_from(DISTS), st.floats(-30, 30, allow_nan=False))
def test_quantile_inverts_cdf_in_bulk(dist, x):
    u = cdf_continuous(dist, x)
    if not (1e-6 <= u <= 1 - 1e-6):
        return
    # compare in probability space; flat stretches make x itself non-unique
    assert abs(cdf_continuous(dist, quantile_continuous(dist, u)) - u) <= 1e-10
    if pdf_continuous(dist, x) > 1e-3:
        assert quantile_continuous(dist, u) == pytest.approx(x, abs=1e-8 / pdf_continuous(dist, x) + 1e-12)


@given(st.sampled_from(DISTS), st.lists(st.floats(-20, 20, allow_nan=False), min_size=2, max_size=20))
def test_cdf_monotone(dist, xs):
    xs = np.sort(xs)
    assert np.all(np.diff(cdf_continuous(dist, xs)) >= 0)


# ---------------------------------------------------------------- sampling


def test_sample_empty(rng):
    assert sample(gaussian(), rng, 0).size == 0


def test_sample_deterministic_given_seed():
    a = sample(atom_model(), np.random.default_rng(5), 1000)
    b = sample(atom_model(), np.random.default_rng(5), 1000)
    np.testing.assert_array_equal(a, b)


def test_atom_frequencies_binomial(rng):
    n = 100_000
    x = sample(atom_model(), rng, n)
    sigma = math.sqrt(0.25 * 0.75 / n)
    for theta in (-1.0, 1.0):
        assert abs(np.mean(x == theta) - 0.25) <= 3 * sigma


def test_gaussian_sample_mean_clt(rng):
    n = 100_000
    assert abs(sample(gaussian(), rng, n).mean()) <= 4 / math.sqrt(n)


def test_mixture_sample_matches_cdf(rng):
    x = sample(BIMODAL, rng, 50_000)
    res = stats.kstest(x, lambda t: cdf_continuous(BIMODAL, t))
    assert res.pvalue > 1e-3


# ---------------------------------------------------------------- moments


def test_moment_examples():
    assert moment(gaussian(), 2) == 1.0
    assert moment(gaussian(), 1) == 0.0
    assert moment(atom_model(), 2) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize(
    "dist, k, frozen",
    [
        (gaussian(0.7, 2.0), 3, stats.norm(0.7, math.sqrt(2.0))),
        (laplace(-0.4, 1.3), 4, stats.laplace(-0.4, 1.3)),
        (uniform(-1.0, 2.5), 5, stats.uniform(-1.0, 3.5)),
    ],
)
def test_moment_matches_scipy(dist, k, frozen):
    assert moment(dist, k) == pytest.approx(frozen.moment(k), rel=1e-10)


@pytest.mark.slow
@pytest.mark.parametrize("dist", [BIMODAL, atom_model(), laplace(0.2, 0.7071)])
@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_moment_agrees_with_monte_carlo(dist, k):
    x = sample(dist, np.random.default_rng(k), 1_000_000) ** k
    se = x.std() / math.sqrt(x.size)
    assert abs(x.mean() - moment(dist, k)) <= 5 * se


# ---------------------------------------------------------------- binned KL


def test_kl_examples():
    f = np.full(4, 0.25)
    assert kl_binned(f, f) == 0.0
    expected = 0.75 * math.log(1.5) + 0.25 * math.log(0.5)
    assert kl_binned([0.75, 0.25], [0.5, 0.5]) == pytest.approx(expected, abs=1e-15)
    assert kl_binned([0.75, 0.25], [0.5, 0.5]) == pytest.approx(0.13081, abs=1e-5)


def test_kl_zero_mass_convention():
    assert kl_binned([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2))


def test_kl_absolute_continuity_violation():
    with pytest.raises(AbsoluteContinuityError):
        kl_binned([0.5, 0.5], [1.0, 0.0])


def test_kl_shape_mismatch():
    with pytest.raises(ValueError):
        kl_binned([0.5, 0.5], [1 / 3] * 3)


prob_vectors = st.integers(2, 12).flatmap(
    lambda m: st.tuples(
        st.lists(st.floats(0.01, 1.0), min_size=m, max_size=m),
        st.lists(st.floats(0.0, 1.0), min_size=m, max_size=m).filter(lambda v: sum(v) > 0.01),
    )
)


@given(prob_vectors)
def test_gibbs_inequality(pair):
    f = np.array(pair[0]) / sum(pair[0])
    g = np.array(pair[1]) / sum(pair[1])
    kl = kl_binned(g, f)
    assert kl >= 0
    if np.max(np.abs(g - f)) > 1e-3:
        assert kl > 0
    assert kl_binned(f, f) == pytest.approx(0.0, abs=1e-15)
