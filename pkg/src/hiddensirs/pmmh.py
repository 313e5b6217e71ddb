"""Random-walk Metropolis-Hastings over the transformed parameters.

The acceptance ratio uses whatever likelihood evaluator it is handed. With
the particle filter plugged in, the noisy estimate is kept for the current
state and never recomputed; exchanging the estimate only on acceptance is
what makes the sampler target the exact posterior.

The full pipeline runs three phases: burn-in and secondary phases move with
independent normal steps, then the empirical covariance of the secondary
draws (scaled by 2.38^2/d unless overridden) shapes a multivariate normal
proposal for the final phase. Only final-phase draws form the posterior
sample; earlier phases are kept thinned for trace diagnostics.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError
from .forcing import ForcingDesign
from .model import HiddenState, ModelParams, PriorSpec, TransformedParams, from_transformed, log_prior
from .rng import as_streams
from .simulate import SimConfig
from .smc import run_filter

__all__ = [
    "ProposalSpec",
    "ChainSchedule",
    "PosteriorDraw",
    "SmcLikelihood",
    "PhaseReport",
    "PipelineResult",
    "mh_step",
    "run_chain",
    "run_pipeline",
    "effective_sample_size",
]

_MODES = ("independent-normals", "multivariate-normal")


@dataclass(frozen=True)
class ProposalSpec:
    """Symmetric random-walk step distribution on the active components.

    scale multiplies the covariance, so the multivariate mode proposes with
    covariance scale * covariance; the independent mode uses per-component
    standard deviations sqrt(scale) * step_sds. The covariance factor is
    computed here, once, so an indefinite matrix fails fast.
    """

    mode: str
    step_sds: np.ndarray = None
    covariance: np.ndarray = None
    scale: float = 1.0
    _chol: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ValueError(f"unknown proposal mode {self.mode!r}; choose from {_MODES}")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")
        if self.mode == "independent-normals":
            if self.step_sds is None:
                raise ValueError("independent-normals mode needs step_sds")
            sds = np.atleast_1d(np.asarray(self.step_sds, dtype=float)).copy()
            if np.any(~np.isfinite(sds)) or np.any(sds <= 0):
                raise ValueError("step_sds must be positive and finite")
            sds.setflags(write=False)
            object.__setattr__(self, "step_sds", sds)
        else:
            if self.covariance is None:
                raise ValueError("multivariate-normal mode needs a covariance")
            cov = np.asarray(self.covariance, dtype=float).copy()
            if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
                raise ValueError(f"covariance must be square, got shape {cov.shape}")
            if not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-12):
                raise ValueError("covariance must be symmetric")
            try:
                chol = np.linalg.cholesky(cov)
            except np.linalg.LinAlgError as err:
                raise NumericalError(f"proposal covariance is not positive definite: {err}") from err
            cov.setflags(write=False)
            chol.setflags(write=False)
            object.__setattr__(self, "covariance", cov)
            object.__setattr__(self, "_chol", chol)

    def sample_step(self, rng, n_active: int) -> np.ndarray:
        if self.mode == "independent-normals":
            sds = self.step_sds
            if sds.size == 1:
                sds = np.broadcast_to(sds, (n_active,))
            elif sds.size != n_active:
                raise ValueError(f"step_sds has length {sds.size}, expected {n_active}")
            return np.sqrt(self.scale) * sds * rng.standard_normal(n_active)
        if self._chol.shape[0] != n_active:
            raise ValueError(f"covariance is {self._chol.shape[0]}-dimensional, expected {n_active}")
        return np.sqrt(self.scale) * (self._chol @ rng.standard_normal(n_active))


@dataclass(frozen=True)
class ChainSchedule:
    """Iteration counts per phase, thinning stride, and particle count."""

    burn_in_iters: int
    secondary_iters: int
    final_iters: int
    thin: int = 10
    n_particles: int = 100

    def __post_init__(self):
        for name in ("burn_in_iters", "secondary_iters", "final_iters", "thin", "n_particles"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1, got {getattr(self, name)}")


@dataclass(frozen=True)
class PosteriorDraw:
    """One retained chain state.

    accepted records whether this state entered the chain by acceptance (the
    initial state did not). A rejected step returns the previous draw object
    itself, so cached fields are never recomputed.
    """

    theta: TransformedParams
    natural: ModelParams
    log_lik_hat: float
    log_prior: float
    trajectory: np.ndarray
    accepted: bool

    @property
    def final_state(self) -> HiddenState:
        if self.trajectory is None:
            raise ValueError("draw carries no sampled trajectory")
        s, i = self.trajectory[-1]
        return HiddenState(int(s), int(i))


@dataclass(frozen=True)
class SmcLikelihood:
    """Scores a transformed parameter vector with the particle filter.

    Rebuilds the forcing from the proposal's own alpha coefficients, so the
    environmental-hazard shape is sampled along with everything else. A
    proposal whose back-transform overflows, or whose initial means cannot
    fit the population, scores -inf and is simply rejected.
    """

    obs: tuple
    design: ForcingDesign
    n_pop: int
    n_particles: int
    sim: SimConfig
    resampling: str = "multinomial"
    threads: int = 1
    store_trajectory: bool = True

    def evaluate(self, theta: TransformedParams, rng) -> tuple:
        try:
            params = from_transformed(theta, self.n_pop)
            forcing = self.design.build(theta.alpha_coeffs)
        except ValueError:
            return -np.inf, None, None
        if params.phi_s + params.phi_i > self.n_pop:
            return -np.inf, None, None
        res = run_filter(self.obs, forcing, params, self.n_particles, self.sim, rng,
                         resampling=self.resampling, store_trajectory=self.store_trajectory,
                         threads=self.threads)
        return res.log_lik_hat, res.sampled_trajectory, params


def mh_step(current: PosteriorDraw, proposal: ProposalSpec, prior: PriorSpec,
            context, rng) -> tuple:
    """One Metropolis step; returns (draw, accepted).

    context.evaluate(theta, rng) must return (log_lik, trajectory, natural).
    On rejection the returned draw is `current` itself, untouched; its
    likelihood estimate is deliberately not refreshed.
    """
    if not np.isfinite(current.log_lik_hat):
        raise ValueError("current draw has non-finite log-likelihood; the chain cannot move")
    root = as_streams(rng)
    active = ~prior.fixed_mask
    step = proposal.sample_step(root.child(0).generator(), int(active.sum()))
    values = np.array(current.theta.values)
    values[active] += step
    theta_star = current.theta.replace_values(values)
    log_prior_star = log_prior(theta_star, prior)
    log_lik_star, trajectory_star, natural_star = context.evaluate(theta_star, root.child(1))
    u = root.child(2).generator().random()
    log_ratio = (log_lik_star + log_prior_star) - (current.log_lik_hat + current.log_prior)
    accept = bool(log_ratio >= 0.0
                  or (np.isfinite(log_ratio) and u > 0.0 and np.log(u) < log_ratio))
    if accept:
        draw = PosteriorDraw(theta=theta_star, natural=natural_star,
                             log_lik_hat=float(log_lik_star), log_prior=float(log_prior_star),
                             trajectory=trajectory_star, accepted=True)
        return draw, True
    return current, False


@dataclass(frozen=True)
class PhaseReport:
    name: str
    iterations: int
    accepted: int

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.iterations


@dataclass(frozen=True)
class PipelineResult:
    """Posterior draws (final phase, thinned) plus per-phase diagnostics.

    history holds thinned value and log-likelihood traces for every phase
    under keys like "burn_in_values"; proposal_covariance is the regularized
    empirical covariance (unscaled) that shaped the final phase.
    """

    draws: tuple
    reports: tuple
    proposal_covariance: np.ndarray
    history: dict
    component_names: tuple

    def transformed_matrix(self) -> np.ndarray:
        return np.array([d.theta.values for d in self.draws])

    def component(self, name: str) -> np.ndarray:
        j = self.component_names.index(name)
        return self.transformed_matrix()[:, j]


def run_chain(context, prior: PriorSpec, schedule: ChainSchedule,
              init: TransformedParams, rng, *, initial_step_sds=0.1,
              final_scale: float = None) -> PipelineResult:
    """Drive the three-phase chain against an arbitrary likelihood evaluator."""
    if prior.means.size != init.values.size:
        raise ValueError("prior length does not match the initial parameter vector")
    d = prior.n_active
    if d == 0:
        raise ValueError("every component is fixed; nothing to sample")
    active = ~prior.fixed_mask
    root = as_streams(rng)

    log_lik0, trajectory0, natural0 = context.evaluate(init, root.child(0))
    if not np.isfinite(log_lik0):
        raise NumericalError(
            "initial parameters score log-likelihood -inf; start the chain elsewhere")
    current = PosteriorDraw(theta=init, natural=natural0, log_lik_hat=float(log_lik0),
                            log_prior=log_prior(init, prior), trajectory=trajectory0,
                            accepted=False)

    history = {}
    iteration = 0

    def run_phase(name, n_iters, prop, keep_draws):
        nonlocal current, iteration
        accepted = 0
        values, log_liks, draws = [], [], []
        for j in range(1, n_iters + 1):
            iteration += 1
            current, was_accepted = mh_step(current, prop, prior, context, root.child(iteration))
            accepted += was_accepted
            if j % schedule.thin == 0:
                values.append(current.theta.values)
                log_liks.append(current.log_lik_hat)
                if keep_draws:
                    draws.append(current)
        history[f"{name}_values"] = (np.array(values) if values
                                     else np.empty((0, init.values.size)))
        history[f"{name}_log_lik"] = np.array(log_liks)
        return PhaseReport(name, n_iters, accepted), draws

    walk = ProposalSpec(mode="independent-normals", step_sds=initial_step_sds)
    report1, _ = run_phase("burn_in", schedule.burn_in_iters, walk, False)
    report2, _ = run_phase("secondary", schedule.secondary_iters, walk, False)

    secondary = history["secondary_values"][:, active]
    if secondary.shape[0] < 2:
        raise NumericalError(
            "secondary phase saved fewer than 2 draws; cannot estimate a proposal covariance "
            "(increase secondary_iters or decrease thin)")
    covariance = np.atleast_2d(np.cov(secondary, rowvar=False))
    covariance = covariance + 1e-8 * np.mean(np.diag(covariance)) * np.eye(d)
    try:
        final_walk = ProposalSpec(
            mode="multivariate-normal", covariance=covariance,
            scale=(2.38 ** 2 / d) if final_scale is None else final_scale)
    except NumericalError as err:
        raise NumericalError(
            "adaptation failed: secondary-phase covariance is not positive definite "
            f"after regularization ({err}); the chain may not have moved") from err
    report3, draws = run_phase("final", schedule.final_iters, final_walk, True)

    return PipelineResult(draws=tuple(draws), reports=(report1, report2, report3),
                          proposal_covariance=covariance, history=history,
                          component_names=tuple(init.names))


def run_pipeline(obs, design: ForcingDesign, n_pop: int, prior: PriorSpec,
                 schedule: ChainSchedule, init: TransformedParams, rng, *,
                 sim: SimConfig = None, initial_step_sds=0.1, final_scale: float = None,
                 resampling: str = "multinomial", threads: int = 1) -> PipelineResult:
    """Posterior sampling for count data under the hidden chain.

    obs is the (time, count) sequence; design maps the sampled alpha
    coefficients to daily forcing. Components flagged fixed in the prior stay
    at their init values. Draw-by-draw randomness is addressed under rng, so
    a rerun with the same arguments reproduces the chain bit for bit.
    """
    if design.columns.shape[1] + 1 != init.n_alpha:
        raise ConfigError(
            f"design supplies {design.columns.shape[1]} covariate columns, so the parameter "
            f"vector needs {design.columns.shape[1] + 1} alpha coefficients, got {init.n_alpha}")
    context = SmcLikelihood(obs=tuple(tuple(o) for o in obs), design=design,
                            n_pop=int(n_pop), n_particles=schedule.n_particles,
                            sim=SimConfig() if sim is None else sim,
                            resampling=resampling, threads=threads)
    return run_chain(context, prior, schedule, init, rng,
                     initial_step_sds=initial_step_sds, final_scale=final_scale)


def effective_sample_size(series) -> float:
    """Autocorrelation-adjusted draw count by initial-positive-sequence truncation.

    Sums adjacent autocorrelation pairs until a pair goes nonpositive.
    A constant series returns its length by convention; an estimate above
    the length (antithetic chains) is clamped to the length. Both are
    flagged with a warning.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise ValueError("series must be 1-d")
    n = x.size
    if n < 10:
        raise ValueError(f"need at least 10 draws, got {n}")
    if np.all(x == x[0]):
        warnings.warn("series is constant; effective sample size set to the series length")
        return float(n)
    x = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    autocov = np.fft.irfft(f * np.conj(f), nfft)[:n] / n
    if autocov[0] <= 0:
        warnings.warn("series is constant; effective sample size set to the series length")
        return float(n)
    rho = autocov / autocov[0]
    tau = -1.0
    for m in range(0, n - 1, 2):
        pair = rho[m] + rho[m + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
    if tau <= 0 or n / tau > n:
        warnings.warn("estimated effective sample size exceeds the series length; clamped")
        return float(n)
    return float(n / tau)
