"""Shared fixtures: the family/rate grid used across the suites."""

import pytest

from aoidrop import (
    Deterministic,
    Erlang,
    Exponential,
    HyperExponential,
    LogNormal,
    Uniform,
    Weibull,
)

# families with closed-form weighted moments (quad never needed)
CLOSED_FORM_FAMILIES = [
    ("exponential", Exponential(rate=1.0)),
    ("exponential-slow", Exponential(rate=0.4)),
    ("hyperexponential", HyperExponential(branches=((0.3, 1.0), (0.7, 4.0)))),
    ("uniform", Uniform(width=1.0)),
    ("uniform-wide", Uniform(width=3.0)),
    ("erlang", Erlang(shape=3, rate=2.0)),
    ("deterministic", Deterministic(value=1.0)),
]

# families that fall back to adaptive quadrature
QUAD_FAMILIES = [
    ("weibull", Weibull(scale=1.0, shape=2.0)),
    ("lognormal", LogNormal(log_mean=0.0, log_sd=0.5)),
]

ALL_FAMILIES = CLOSED_FORM_FAMILIES + QUAD_FAMILIES

LAM_GRID = (0.1, 0.3, 1.0, 3.0, 8.0)


@pytest.fixture(scope="session")
def family_grid():
    return ALL_FAMILIES


@pytest.fixture(scope="session")
def lam_grid():
    return LAM_GRID
