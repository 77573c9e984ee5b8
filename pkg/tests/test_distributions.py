"""Distribution primitives: closed forms vs quadrature, invariants, parsing."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aoidrop import (
    Deterministic,
    Empirical,
    Erlang,
    Exponential,
    HyperExponential,
    LogNormal,
    NonfiniteMoment,
    Uniform,
    Weibull,
    from_spec,
)
from aoidrop.distributions import (
    conditional_restricted_mean,
    exp_weighted_moment,
    moments,
    restricted_mean,
)
from tests.conftest import ALL_FAMILIES, CLOSED_FORM_FAMILIES, LAM_GRID

WINDOWS = ((0.0, math.inf), (0.0, 0.7), (0.4, math.inf), (0.3, 1.4))


@pytest.mark.parametrize("name,dist", CLOSED_FORM_FAMILIES)
@pytest.mark.parametrize("order", (0, 1, 2))
@pytest.mark.parametrize("lam", (0.0, 0.5, 2.5))
def test_closed_form_matches_quadrature(name, dist, order, lam):
    if isinstance(dist, Deterministic):
        pytest.skip("no density to integrate")
    for lo, hi in WINDOWS:
        closed = dist.weighted_moment(order, lam, lo=lo, hi=hi)
        quad = dist._weighted_moment_quad(order, lam, lo=lo, hi=hi)
        assert closed == pytest.approx(quad, rel=1e-7, abs=1e-12)


@pytest.mark.parametrize("name,dist", ALL_FAMILIES)
def test_window_split_is_consistent(name, dist):
    # below-theta and above-theta restricted means partition the full mean
    theta = 0.6
    m1 = moments(dist).m1
    below = restricted_mean(dist, theta, "below")
    above = restricted_mean(dist, theta, "above")
    assert below + above == pytest.approx(m1, rel=1e-9)
    assert 0.0 <= below <= m1 + 1e-12


@pytest.mark.parametrize("name,dist", ALL_FAMILIES)
@pytest.mark.parametrize("lam", LAM_GRID)
def test_gamma_in_unit_interval(name, dist, lam):
    gamma = exp_weighted_moment(dist, lam, 0)
    assert 0.0 < gamma <= 1.0


@pytest.mark.parametrize("name,dist", ALL_FAMILIES)
def test_gamma_decreases_with_rate(name, dist):
    gammas = [exp_weighted_moment(dist, lam, 0) for lam in LAM_GRID]
    assert all(b <= a + 1e-12 for a, b in zip(gammas, gammas[1:]))


@pytest.mark.parametrize("name,dist", ALL_FAMILIES)
@pytest.mark.parametrize("lam", LAM_GRID)
def test_tilted_mean_below_inverse_rate(name, dist, lam):
    # E[T e^{-lam T}] <= sup_t t e^{-lam t} = 1/(e lam) < 1/lam
    assert lam * exp_weighted_moment(dist, lam, 1) < 1.0


@given(rate=st.floats(0.05, 20.0), lam=st.floats(0.01, 10.0))
@settings(max_examples=60, deadline=None)
def test_exponential_gamma_closed_form(rate, lam):
    dist = Exponential(rate=rate)
    assert exp_weighted_moment(dist, lam, 0) == pytest.approx(
        rate / (rate + lam), rel=1e-12)


@given(width=st.floats(0.1, 10.0), theta=st.floats(0.0, 12.0))
@settings(max_examples=60, deadline=None)
def test_uniform_restricted_mean(width, theta):
    dist = Uniform(width=width)
    cut = min(theta, width)
    assert restricted_mean(dist, theta, "below") == pytest.approx(
        cut ** 2 / (2.0 * width), abs=1e-12)


@pytest.mark.parametrize("name,dist", ALL_FAMILIES)
def test_conditional_restricted_mean_partitions(name, dist):
    lam, theta = 0.8, 0.5
    below = conditional_restricted_mean(dist, lam, theta, "below")
    above = conditional_restricted_mean(dist, lam, theta, "above")
    gamma = exp_weighted_moment(dist, lam, 0)
    full = exp_weighted_moment(dist, lam, 1) / gamma
    assert below + above == pytest.approx(full, rel=1e-9)


@pytest.mark.parametrize("name,dist", ALL_FAMILIES)
def test_sampler_matches_mean(name, dist):
    rng = np.random.default_rng(1234)
    draws = np.asarray(dist.sample(rng, 200_000), dtype=float)
    m = moments(dist)
    se = math.sqrt(max(m.m2 - m.m1 ** 2, 0.0) / draws.size)
    assert abs(draws.mean() - m.m1) <= 5.0 * se + 1e-12


def test_empirical_exact_sums():
    dist = Empirical(samples=(0.5, 1.0, 2.0, 2.0))
    assert moments(dist).m1 == pytest.approx(1.375)
    lam = 0.7
    expect = np.mean([x * math.exp(-lam * x) for x in (0.5, 1.0, 2.0, 2.0)])
    assert exp_weighted_moment(dist, lam, 1) == pytest.approx(expect)
    # strict-below vs inclusive cdf at an atom
    assert dist.prob_below(2.0) == 0.5
    assert dist.cdf(2.0) == 1.0


def test_deterministic_atom_handling():
    dist = Deterministic(value=1.0)
    assert dist.weighted_moment(0, 0.5, lo=0.0, hi=1.0) == pytest.approx(
        math.exp(-0.5))
    assert dist.weighted_moment(0, 0.5, lo=1.0) == 0.0
    assert dist.prob_below(1.0) == 0.0


def test_from_spec_round_trip(tmp_path):
    assert from_spec({"kind": "exponential", "rate": 2}) == Exponential(2.0)
    assert from_spec({"kind": "uniform", "width": 1.5}) == Uniform(1.5)
    assert from_spec({"kind": "erlang", "shape": 3, "rate": 2}) == Erlang(3, 2.0)
    assert from_spec({"kind": "weibull", "scale": 1, "shape": 2}) == Weibull(1.0, 2.0)
    assert from_spec({"kind": "lognormal", "log_mean": 0, "log_sd": 0.5}) == \
        LogNormal(0.0, 0.5)
    hyper = from_spec({"kind": "hyperexponential",
                       "branches": [[0.3, 1.0], [0.7, 4.0]]})
    assert isinstance(hyper, HyperExponential)
    path = tmp_path / "samples.txt"
    path.write_text("1.0\n2.0\n3.0\n")
    emp = from_spec({"kind": "empirical", "path": str(path)})
    assert emp == Empirical(samples=(1.0, 2.0, 3.0))
    with pytest.raises(ValueError):
        from_spec({"kind": "cauchy"})


def test_invalid_parameters_rejected():
    with pytest.raises(ValueError):
        Exponential(rate=-1.0)
    with pytest.raises(ValueError):
        Uniform(width=0.0)
    with pytest.raises(ValueError):
        Erlang(shape=0, rate=1.0)
    with pytest.raises(ValueError):
        HyperExponential(branches=((0.5, 1.0), (0.6, 2.0)))
    with pytest.raises((ValueError, NonfiniteMoment)):
        Empirical(samples=(0.0, 0.0))
