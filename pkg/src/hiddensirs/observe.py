"""Observation model linking hidden infecteds to reported counts.

A count at time t is binomial: each of the i infected individuals is reported
independently with probability rho. Initial compartment sizes are Poisson with
means (phi_s, phi_i); pairs violating s + i <= n_pop are redrawn together so
the initial law is the Poisson product conditioned on fitting the population.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.special import gammaln, xlog1py, xlogy

from .errors import ConfigError
from .model import HiddenState

__all__ = ["Observation", "emission_log_pmf", "sample_initial_state", "sample_observation"]


class Observation(NamedTuple):
    t: float
    y: int


def emission_log_pmf(y: int, i_count, rho: float):
    """log P(count = y | infecteds = i_count, reporting probability rho).

    Vectorized over i_count. Conventions: 0 * log 0 = 0, and any y exceeding
    i_count has probability zero (-inf), including the rho = 0 and rho = 1
    boundaries.
    """
    if y < 0 or y != int(y):
        raise ValueError(f"count must be a nonnegative integer, got {y}")
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    i = np.asarray(i_count, dtype=float)
    y = float(int(y))
    with np.errstate(invalid="ignore", divide="ignore"):
        lp = (
            gammaln(i + 1.0) - gammaln(y + 1.0) - gammaln(i - y + 1.0)
            + xlogy(y, rho) + xlog1py(i - y, -rho)
        )
        lp = np.where(i < y, -np.inf, lp)
    if np.ndim(i_count) == 0:
        return float(lp)
    return lp


def sample_initial_state(phi_s: float, phi_i: float, n_pop: int, rng) -> HiddenState:
    """Draw (s, i) from independent Poissons, redrawing the pair until s + i <= n_pop."""
    if phi_s + phi_i > n_pop:
        raise ConfigError(
            f"initial means phi_s + phi_i = {phi_s + phi_i} exceed the population {n_pop}; "
            "redraw-until-fit would rarely terminate"
        )
    while True:
        s = int(rng.poisson(phi_s))
        i = int(rng.poisson(phi_i))
        if s + i <= n_pop:
            return HiddenState(s, i)


def sample_observation(i_count: int, rho: float, rng) -> int:
    """Draw a reported count for i_count infecteds."""
    if i_count < 0:
        raise ValueError(f"infected count must be nonnegative, got {i_count}")
    return int(rng.binomial(int(i_count), rho))
