"""Parameterization of the hidden epidemic chain.

The population of size n_pop splits into susceptible, infected, and recovered
compartments. Only (s, i) are tracked; the recovered count is n_pop - s - i.
Three event channels drive the continuous-time dynamics:

    infection:  s -> s-1, i -> i+1   at rate (beta * i + alpha(t)) * s
    recovery:   i -> i-1             at rate gamma * i
    waning:     s -> s+1             at rate mu * (n_pop - s - i)

alpha(t) is a daily step function supplied by a forcing object; beta scales
person-to-person transmission. Inference runs on an unconstrained transformed
scale (logs for positive rates, log-odds for the reporting probability) with
independent normal priors on the non-fixed components.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import expit, logit

__all__ = [
    "HiddenState",
    "ModelParams",
    "TransformedParams",
    "PriorSpec",
    "hazard_rates",
    "to_transformed",
    "from_transformed",
    "log_prior",
    "reproduction_ratio",
]

_LOG_2PI = float(np.log(2.0 * np.pi))


class HiddenState(NamedTuple):
    """Compartment counts (s, i); recovered is implied by the closed population."""

    s: int
    i: int

    def recovered(self, n_pop: int) -> int:
        return n_pop - self.s - self.i


def _require_finite(name, value):
    if not np.all(np.isfinite(value)):
        raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class ModelParams:
    """Natural-scale parameters.

    Rates are per day. rho is the probability that an infected individual is
    observed in a count. alpha_coeffs holds the forcing intercept followed by
    one coefficient per forcing covariate. phi_s and phi_i are Poisson means
    for the initial susceptible and infected counts.

    Zero rates and boundary rho values are legal here so degenerate chains can
    be simulated directly; the transformed scale requires interior values.
    """

    beta: float
    gamma: float
    mu: float
    rho: float
    alpha_coeffs: np.ndarray
    phi_s: float
    phi_i: float
    n_pop: int

    def __post_init__(self):
        coeffs = np.atleast_1d(np.asarray(self.alpha_coeffs, dtype=float)).copy()
        coeffs.setflags(write=False)
        object.__setattr__(self, "alpha_coeffs", coeffs)
        for name in ("beta", "gamma", "mu", "rho", "phi_s", "phi_i"):
            value = getattr(self, name)
            _require_finite(name, value)
            if value < 0:
                raise ValueError(f"{name} must be nonnegative, got {value}")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")
        _require_finite("alpha_coeffs", coeffs)
        if coeffs.size < 1:
            raise ValueError("alpha_coeffs needs at least the intercept")
        if int(self.n_pop) != self.n_pop or self.n_pop < 1:
            raise ValueError(f"n_pop must be a positive integer, got {self.n_pop}")
        object.__setattr__(self, "n_pop", int(self.n_pop))

    @property
    def n_alpha(self) -> int:
        return self.alpha_coeffs.size


def component_names(n_alpha: int) -> list:
    """Transformed-vector component names, in storage order."""
    alphas = [f"alpha_{j}" for j in range(n_alpha)]
    return ["log_beta", "log_gamma", "log_mu", "logit_rho", *alphas, "log_phi_s", "log_phi_i"]


@dataclass(frozen=True)
class TransformedParams:
    """Unconstrained parameter vector the sampler moves on.

    Layout: [log_beta, log_gamma, log_mu, logit_rho,
             alpha_0..alpha_{n_alpha-1}, log_phi_s, log_phi_i].
    """

    values: np.ndarray
    n_alpha: int

    def __post_init__(self):
        vec = np.asarray(self.values, dtype=float).copy()
        if vec.ndim != 1 or vec.size != 6 + self.n_alpha:
            raise ValueError(f"expected vector of length {6 + self.n_alpha}, got shape {vec.shape}")
        vec.setflags(write=False)
        object.__setattr__(self, "values", vec)

    @property
    def names(self) -> list:
        return component_names(self.n_alpha)

    @property
    def log_beta(self) -> float:
        return float(self.values[0])

    @property
    def log_gamma(self) -> float:
        return float(self.values[1])

    @property
    def log_mu(self) -> float:
        return float(self.values[2])

    @property
    def logit_rho(self) -> float:
        return float(self.values[3])

    @property
    def alpha_coeffs(self) -> np.ndarray:
        return self.values[4:4 + self.n_alpha]

    @property
    def log_phi_s(self) -> float:
        return float(self.values[-2])

    @property
    def log_phi_i(self) -> float:
        return float(self.values[-1])

    def replace_values(self, values) -> "TransformedParams":
        return TransformedParams(values=values, n_alpha=self.n_alpha)


def to_transformed(params: ModelParams) -> TransformedParams:
    """Map natural parameters to the unconstrained scale.

    Requires strictly positive rates and rho strictly inside (0, 1); boundary
    values have no finite image.
    """
    for name in ("beta", "gamma", "mu", "phi_s", "phi_i"):
        if getattr(params, name) <= 0:
            raise ValueError(f"{name} must be positive to transform, got {getattr(params, name)}")
    if not 0.0 < params.rho < 1.0:
        raise ValueError(f"rho must lie strictly in (0, 1) to transform, got {params.rho}")
    vec = np.concatenate([
        [np.log(params.beta), np.log(params.gamma), np.log(params.mu), logit(params.rho)],
        params.alpha_coeffs,
        [np.log(params.phi_s), np.log(params.phi_i)],
    ])
    return TransformedParams(values=vec, n_alpha=params.n_alpha)


def from_transformed(tp: TransformedParams, fixed) -> ModelParams:
    """Invert the transform; n_pop is taken from ``fixed`` (a ModelParams or a bare count).

    Raises ValueError when the back-transform overflows to a non-finite rate,
    so callers can treat such proposals as having zero posterior density.
    """
    with np.errstate(over="ignore"):
        beta = np.exp(tp.log_beta)
        gamma = np.exp(tp.log_gamma)
        mu = np.exp(tp.log_mu)
        rho = expit(tp.logit_rho)
        phi_s = np.exp(tp.log_phi_s)
        phi_i = np.exp(tp.log_phi_i)
    for name, value in (("beta", beta), ("gamma", gamma), ("mu", mu),
                        ("phi_s", phi_s), ("phi_i", phi_i)):
        if not np.isfinite(value):
            raise ValueError(f"back-transformed {name} is not finite")
    return ModelParams(
        beta=float(beta), gamma=float(gamma), mu=float(mu), rho=float(rho),
        alpha_coeffs=np.array(tp.alpha_coeffs, dtype=float),
        phi_s=float(phi_s), phi_i=float(phi_i),
        n_pop=fixed.n_pop if hasattr(fixed, "n_pop") else int(fixed),
    )


@dataclass(frozen=True)
class PriorSpec:
    """Independent normal priors on the transformed components.

    fixed_mask marks components held at their initial values: they receive no
    prior term and are never proposed.
    """

    means: np.ndarray
    sds: np.ndarray
    fixed_mask: np.ndarray = field(default=None)

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float).copy()
        sds = np.asarray(self.sds, dtype=float).copy()
        if means.shape != sds.shape or means.ndim != 1:
            raise ValueError("means and sds must be 1-d arrays of equal length")
        mask = self.fixed_mask
        mask = np.zeros(means.size, dtype=bool) if mask is None else np.asarray(mask, dtype=bool).copy()
        if mask.shape != means.shape:
            raise ValueError("fixed_mask must match means in length")
        _require_finite("prior means", means[~mask])
        if np.any(sds[~mask] <= 0):
            raise ValueError("prior sds must be positive on non-fixed components")
        for arr in (means, sds, mask):
            arr.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "sds", sds)
        object.__setattr__(self, "fixed_mask", mask)

    @property
    def n_active(self) -> int:
        return int(np.sum(~self.fixed_mask))


def log_prior(tp: TransformedParams, prior: PriorSpec) -> float:
    """Sum of normal log densities over the non-fixed components."""
    if prior.means.size != tp.values.size:
        raise ValueError("prior length does not match parameter vector")
    active = ~prior.fixed_mask
    z = (tp.values[active] - prior.means[active]) / prior.sds[active]
    return float(-0.5 * np.sum(z * z) - np.sum(np.log(prior.sds[active])) - 0.5 * _LOG_2PI * z.size)


def hazard_rates(state, alpha_t: float, params: ModelParams):
    """Event rates (infection, recovery, waning) at state (s, i) under forcing alpha_t."""
    s, i = state
    r = params.n_pop - s - i
    return (
        (params.beta * i + alpha_t) * s,
        params.gamma * i,
        params.mu * r,
    )


def reproduction_ratio(params: ModelParams) -> float:
    """beta * n_pop / gamma: expected secondary infections per case in a naive population."""
    return params.beta * params.n_pop / params.gamma
