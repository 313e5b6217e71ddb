"""Bootstrap particle filter over the hidden chain.

The filter alternates resample / propagate / weight across observation times
and accumulates the log marginal-likelihood estimate. The first observation
is weighted too: particles are drawn at t0 from the initial law and scored
against y0 before any propagation. Resampling happens at every step.

Randomness is organized per slot: slot k owns one stream for the whole run
and consumes it serially, so propagating slots in parallel cannot reorder
draws and the result is identical for any thread count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .forcing import DailyForcing
from .model import HiddenState, ModelParams
from .observe import Observation, emission_log_pmf, sample_initial_state
from .rng import as_streams
from .simulate import SimConfig, propagate_batch

__all__ = [
    "ParticleSystem",
    "FilterResult",
    "run_filter",
    "resample_multinomial",
    "resample_systematic",
]

# stream addresses under the filter's root: slot streams live at (_SLOT, k),
# resampling and trajectory selection at (_SELECT,)
_SLOT = 0
_SELECT = 1


@dataclass
class ParticleSystem:
    """Working state of one filter run.

    states holds slot k's particle in row k; log_weights are the raw emission
    scores at the most recent observation; ancestry collects the resampling
    index vectors (kept only when the caller wants a trajectory back).
    """

    states: np.ndarray
    log_weights: np.ndarray
    log_lik_running: float
    ancestry: list

    def normalized_weights(self) -> np.ndarray:
        total = logsumexp(self.log_weights)
        if not np.isfinite(total):
            raise ValueError("no particle has positive weight")
        w = np.exp(self.log_weights - total)
        return w / w.sum()


@dataclass(frozen=True)
class FilterResult:
    """Output of run_filter.

    sampled_trajectory is one hidden path drawn from the final weights by
    ancestry trace-back, one (s, i) row per observation time. final_states
    and final_log_weights (normalized) seed forward prediction. On particle
    death every field except log_lik_hat and obs_times is None.
    """

    log_lik_hat: float
    sampled_trajectory: np.ndarray | None
    final_states: np.ndarray | None
    final_log_weights: np.ndarray | None
    obs_times: np.ndarray

    @property
    def final_state(self) -> HiddenState:
        if self.sampled_trajectory is None:
            raise ValueError("filter died; no trajectory was sampled")
        s, i = self.sampled_trajectory[-1]
        return HiddenState(int(s), int(i))


def _normalized_from_log(log_weights) -> np.ndarray:
    lw = np.asarray(log_weights, dtype=float)
    if lw.ndim != 1 or lw.size == 0:
        raise ValueError("log_weights must be a nonempty 1-d array")
    total = logsumexp(lw)
    if not np.isfinite(total):
        raise ValueError("all log-weights are -inf; nothing to resample from")
    w = np.exp(lw - total)
    return w / w.sum()


def resample_multinomial(log_weights, n_out: int, rng) -> np.ndarray:
    """n_out indices drawn i.i.d. from the normalized weights."""
    w = _normalized_from_log(log_weights)
    cum = np.cumsum(w)
    cum[-1] = 1.0
    return np.searchsorted(cum, rng.random(n_out), side="right").astype(np.int64)


def resample_systematic(log_weights, n_out: int, rng) -> np.ndarray:
    """n_out indices from one uniform offset on a stratified grid.

    Lower-variance alternative to multinomial; expected counts match the
    weights exactly, so the likelihood estimate stays unbiased.
    """
    w = _normalized_from_log(log_weights)
    cum = np.cumsum(w)
    cum[-1] = 1.0
    positions = (rng.random() + np.arange(n_out)) / n_out
    return np.searchsorted(cum, positions, side="right").astype(np.int64)


_RESAMPLERS = {
    "multinomial": resample_multinomial,
    "systematic": resample_systematic,
}


def _check_observations(obs):
    if len(obs) == 0:
        raise ValueError("need at least one observation")
    cleaned = []
    for o in obs:
        t, y = o
        if y < 0 or y != int(y):
            raise ValueError(f"counts must be nonnegative integers, got {y} at t={t}")
        cleaned.append(Observation(float(t), int(y)))
    times = np.array([o.t for o in cleaned])
    if np.any(np.diff(times) <= 0):
        raise ValueError("observation times must be strictly increasing")
    return cleaned, times


def _dead(log_lik, times) -> FilterResult:
    # particle death is a value, not an exception: the MH layer rejects on -inf
    return FilterResult(log_lik, None, None, None, times)


def run_filter(obs, forcing: DailyForcing, params: ModelParams, n_particles: int,
               sim: SimConfig, rng, *, resampling: str = "multinomial",
               store_trajectory: bool = True, threads: int = 1,
               initial_sampler=None) -> FilterResult:
    """Estimate the log marginal likelihood of obs and sample one hidden path.

    obs is a sequence of (time, count) pairs at strictly increasing times;
    the first time is the chain's start. rng is a seed, SeedSequence, or
    Streams root; a fixed root gives bit-identical output for any `threads`.
    initial_sampler overrides the Poisson initial draw (it gets a Generator
    and must return an (s, i) pair); the default draws from params' initial
    means conditioned on fitting the population.

    Returns log_lik_hat = -inf with no trajectory when every particle's
    weight vanishes at some step.
    """
    observations, times = _check_observations(obs)
    n_particles = int(n_particles)
    if n_particles < 1:
        raise ValueError(f"n_particles must be >= 1, got {n_particles}")
    if resampling not in _RESAMPLERS:
        raise ValueError(f"unknown resampling {resampling!r}; choose from {sorted(_RESAMPLERS)}")
    resample = _RESAMPLERS[resampling]
    if times[-1] > times[0]:
        forcing.require_cover(times[0], times[-1])

    root = as_streams(rng)
    slot_gens = [root.child(_SLOT, k).generator() for k in range(n_particles)]
    select_gen = root.child(_SELECT).generator()

    states = np.empty((n_particles, 2), dtype=np.int64)
    for k in range(n_particles):
        if initial_sampler is None:
            s, i = sample_initial_state(params.phi_s, params.phi_i, params.n_pop, slot_gens[k])
        else:
            s, i = initial_sampler(slot_gens[k])
        states[k, 0] = s
        states[k, 1] = i

    system = ParticleSystem(
        states=states,
        log_weights=emission_log_pmf(observations[0].y, states[:, 1], params.rho),
        log_lik_running=0.0,
        ancestry=[],
    )
    increment = logsumexp(system.log_weights) - np.log(n_particles)
    if increment == -np.inf:
        return _dead(-np.inf, times)
    system.log_lik_running += increment

    history = [system.states] if store_trajectory else None
    for j in range(1, len(observations)):
        idx = resample(system.log_weights, n_particles, select_gen)
        system.states = system.states[idx]
        if store_trajectory:
            system.ancestry.append(idx)
        propagate_batch(system.states, times[j - 1], times[j], forcing, params,
                        sim, slot_gens, threads=threads)
        system.log_weights = emission_log_pmf(observations[j].y, system.states[:, 1], params.rho)
        increment = logsumexp(system.log_weights) - np.log(n_particles)
        if increment == -np.inf:
            return _dead(-np.inf, times)
        system.log_lik_running += increment
        if store_trajectory:
            history.append(system.states)

    final_weights = system.normalized_weights()
    trajectory = None
    if store_trajectory:
        # trace one lineage back through the stored resampling indices
        cum = np.cumsum(final_weights)
        cum[-1] = 1.0
        k = int(np.searchsorted(cum, select_gen.random(), side="right"))
        trajectory = np.empty((len(observations), 2), dtype=np.int64)
        trajectory[-1] = history[-1][k]
        for j in range(len(observations) - 2, -1, -1):
            k = int(system.ancestry[j][k])
            trajectory[j] = history[j][k]
    with np.errstate(divide="ignore"):
        # dead-but-not-all-dead slots carry weight 0; log maps them to -inf
        final_log = np.log(final_weights)
    return FilterResult(
        log_lik_hat=float(system.log_lik_running),
        sampled_trajectory=trajectory,
        final_states=system.states.copy(),
        final_log_weights=final_log,
        obs_times=times,
    )
