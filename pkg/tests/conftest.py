"""Shared fixtures: a seasonal epidemic reference setup used across test modules."""

import numpy as np
import pytest

from hiddensirs import ModelParams, sinusoid_design


def gen(seed):
    """Standalone Philox generator for tests that just need draws."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


@pytest.fixture
def rng():
    return gen(20260822)


@pytest.fixture(scope="session")
def epidemic_params():
    """Reference parameter set for a seasonal epidemic in a population of 10k."""
    return ModelParams(
        beta=1.25e-5, gamma=0.1, mu=0.0009, rho=0.015,
        alpha_coeffs=np.array([-7.0, 3.5]), phi_s=2100.0, phi_i=15.0, n_pop=10000,
    )


@pytest.fixture(scope="session")
def annual_design():
    """Three years of sinusoidal forcing design starting at day 0."""
    return sinusoid_design(0, 1096)


@pytest.fixture(scope="session")
def annual_forcing(epidemic_params, annual_design):
    return annual_design.build(epidemic_params.alpha_coeffs)
