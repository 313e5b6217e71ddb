"""Posterior-predictive forecasting and fit diagnostics.

Everything here consumes posterior draws that carry a sampled hidden
trajectory: forecasts restart the chain from each draw's final hidden state
under that draw's parameters, the transmission decomposition re-reads each
draw's hazard pieces, and residuals compare data against forward simulations
at a single parameter setting (posterior medians, by convention).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forcing import DailyForcing, ForcingDesign
from .observe import sample_initial_state, sample_observation
from .rng import as_streams
from .simulate import SimConfig, simulate_path

__all__ = [
    "PredictionRun",
    "Decomposition",
    "ResidualSeries",
    "posterior_predict",
    "transmission_decomposition",
    "standardized_residuals",
]

QUANTILE_LEVELS = (2.5, 50.0, 97.5)


@dataclass(frozen=True)
class PredictionRun:
    """Forward-simulated predictive summaries over a horizon.

    count_values[j] / count_probs[j] is the empirical distribution of the
    predicted count at obs_times[j]; probabilities sum to one. Hidden-state
    quantiles are fractions of the population, one row per integer day,
    columns at the 2.5/50/97.5 percent levels.
    """

    horizon: tuple
    draws_used: int
    replicates_per_draw: int
    obs_times: np.ndarray
    count_values: tuple
    count_probs: tuple
    hidden_days: np.ndarray
    s_quantiles: np.ndarray
    i_quantiles: np.ndarray
    mean_curve_quantiles: np.ndarray = None

    def _time_index(self, t) -> int:
        idx = np.nonzero(self.obs_times == float(t))[0]
        if idx.size == 0:
            raise ValueError(f"no predicted distribution at time {t}; "
                             f"observation times are {self.obs_times.tolist()}")
        return int(idx[0])

    def count_distribution(self, t):
        """(values, probabilities) of the predicted count at observation time t."""
        j = self._time_index(t)
        return self.count_values[j], self.count_probs[j]

    def central_interval(self, t, mass: float = 0.95):
        """Smallest-quantile central interval [lo, hi] of the count at time t."""
        values, probs = self.count_distribution(t)
        cdf = np.cumsum(probs)
        tail = (1.0 - mass) / 2.0
        lo = values[min(np.searchsorted(cdf, tail, side="left"), values.size - 1)]
        hi = values[min(np.searchsorted(cdf, 1.0 - tail, side="left"), values.size - 1)]
        return int(lo), int(hi)


@dataclass(frozen=True)
class Decomposition:
    """Per-time posterior quantiles of the two infection pressures.

    alpha_quantiles[j] and beta_i_quantiles[j] summarize, over resampled
    posterior draws, the environmental hazard and the per-susceptible
    person-to-person hazard at times[j]; rows are paired, coming from the
    same resample of draws.
    """

    times: np.ndarray
    alpha_quantiles: np.ndarray
    beta_i_quantiles: np.ndarray
    n_resamples: int


@dataclass(frozen=True)
class ResidualSeries:
    """Standardized residuals of observed counts against simulated moments.

    residuals[j] = (observed - simulated mean) / simulated sd at times[j];
    where the simulated sd is zero the entry is NaN and flagged[j] is True.
    """

    times: np.ndarray
    observed: np.ndarray
    sim_mean: np.ndarray
    sim_sd: np.ndarray
    residuals: np.ndarray
    flagged: np.ndarray
    n_sims: int


def _check_draws(draws):
    draws = list(draws)
    if not draws:
        raise ValueError("need at least one posterior draw")
    for d in draws:
        if d.trajectory is None:
            raise ValueError(
                "posterior draws carry no sampled hidden trajectory; rerun the "
                "fit with trajectory storage on")
    return draws


def _thin_indices(n: int, want: int) -> np.ndarray:
    if want >= n:
        return np.arange(n)
    return np.unique(np.linspace(0, n - 1, want).round().astype(int))


def posterior_predict(draws, forcing, horizon, obs_times, sim: SimConfig,
                      rng, *, draws_used: int = 500, replicates_per_draw: int = 1,
                      mean_curve: bool = False) -> PredictionRun:
    """Simulate each draw's hidden chain forward and summarize what it predicts.

    horizon is (t_start, t_end) with t_start the time of the draws' final
    hidden states; obs_times are the future reporting times inside it. Counts
    at each reporting time are Binomial(I, rho) under the draw's own
    parameters. Passing a ForcingDesign rebuilds the daily hazard from each
    draw's own coefficients, exactly as the fit did; passing a DailyForcing
    pins one shared hazard for every draw. With mean_curve set, the per-draw
    average count over the replicates is recorded and summarized as
    quantiles across draws.
    """
    t_start, t_end = float(horizon[0]), float(horizon[1])
    if t_end < t_start:
        raise ValueError(f"horizon ({t_start}, {t_end}) runs backwards")
    if replicates_per_draw < 1 or draws_used < 1:
        raise ValueError("draws_used and replicates_per_draw must be positive")
    obs_times = np.asarray(obs_times, dtype=float)
    if obs_times.size and (np.any(np.diff(obs_times) <= 0)
                           or obs_times[0] <= t_start or obs_times[-1] > t_end):
        raise ValueError(
            f"observation times must increase strictly inside ({t_start}, {t_end}]")

    hidden_days = np.arange(np.floor(t_start) + 1, np.floor(t_end) + 1)
    if t_end == t_start or (obs_times.size == 0 and hidden_days.size == 0):
        empty3 = np.empty((0, 3))
        return PredictionRun(
            horizon=(t_start, t_end), draws_used=0, replicates_per_draw=replicates_per_draw,
            obs_times=obs_times, count_values=(), count_probs=(),
            hidden_days=np.empty(0), s_quantiles=empty3, i_quantiles=empty3)

    draws = _check_draws(draws)
    per_draw_forcing = isinstance(forcing, ForcingDesign)
    if per_draw_forcing:
        # coverage is a property of the design, identical for every draw
        forcing.build(draws[0].theta.alpha_coeffs).require_cover(t_start, t_end)
    else:
        forcing.require_cover(t_start, t_end)
    chosen = _thin_indices(len(draws), draws_used)
    root = as_streams(rng)

    times = np.union1d(hidden_days, obs_times)
    obs_pos = np.searchsorted(times, obs_times)
    day_pos = np.searchsorted(times, hidden_days)

    n_runs = chosen.size * replicates_per_draw
    counts = np.empty((n_runs, obs_times.size), dtype=np.int64)
    s_frac = np.empty((n_runs, hidden_days.size))
    i_frac = np.empty((n_runs, hidden_days.size))
    run = 0
    for j, idx in enumerate(chosen):
        draw = draws[int(idx)]
        params = draw.natural
        state = draw.final_state
        draw_forcing = (forcing.build(draw.theta.alpha_coeffs)
                        if per_draw_forcing else forcing)
        for r in range(replicates_per_draw):
            gen = root.child(j, r).generator()
            path = simulate_path(state, t_start, times, draw_forcing, params, sim, gen)
            for c, p in enumerate(obs_pos):
                counts[run, c] = sample_observation(path[p, 1], params.rho, gen)
            s_frac[run] = path[day_pos, 0] / params.n_pop
            i_frac[run] = path[day_pos, 1] / params.n_pop
            run += 1

    values, probs = [], []
    for c in range(obs_times.size):
        v, n = np.unique(counts[:, c], return_counts=True)
        values.append(v)
        probs.append(n / n.sum())

    mean_q = None
    if mean_curve:
        per_draw_mean = counts.reshape(chosen.size, replicates_per_draw, -1).mean(axis=1)
        mean_q = np.percentile(per_draw_mean, QUANTILE_LEVELS, axis=0).T

    return PredictionRun(
        horizon=(t_start, t_end), draws_used=int(chosen.size),
        replicates_per_draw=replicates_per_draw, obs_times=obs_times,
        count_values=tuple(values), count_probs=tuple(probs),
        hidden_days=hidden_days,
        s_quantiles=np.percentile(s_frac, QUANTILE_LEVELS, axis=0).T,
        i_quantiles=np.percentile(i_frac, QUANTILE_LEVELS, axis=0).T,
        mean_curve_quantiles=mean_q)


def transmission_decomposition(draws, design: ForcingDesign, obs_times, rng, *,
                               horizon=None, n_resamples: int = 5000) -> Decomposition:
    """Quantify environmental versus person-to-person infection pressure.

    For each of n_resamples draws resampled with replacement, the
    environmental hazard alpha(t) is rebuilt from that draw's coefficients
    exactly as the simulator built it, and the person-to-person hazard is the
    draw's beta times its sampled hidden infected count. Quantiles are taken
    per observation time across resamples.
    """
    draws = _check_draws(draws)
    obs_times = np.asarray(obs_times, dtype=float)
    n_times = len(draws[0].trajectory)
    if obs_times.shape != (n_times,):
        raise ValueError(
            f"obs_times has shape {obs_times.shape} but trajectories have "
            f"{n_times} states")
    if n_resamples < 1:
        raise ValueError("n_resamples must be positive")
    keep = np.ones(obs_times.size, dtype=bool)
    if horizon is not None:
        keep = (obs_times >= float(horizon[0])) & (obs_times < float(horizon[1]))
        if not np.any(keep):
            raise ValueError(f"no observation times fall in horizon {horizon}")
    times = obs_times[keep]

    root = as_streams(rng)
    picks = root.child(0).generator().integers(0, len(draws), size=n_resamples)
    alpha = np.empty((n_resamples, times.size))
    beta_i = np.empty((n_resamples, times.size))
    for r, idx in enumerate(picks):
        draw = draws[int(idx)]
        forcing = design.build(draw.theta.alpha_coeffs)
        alpha[r] = [forcing.alpha_at(t) for t in times]
        beta_i[r] = draw.natural.beta * np.asarray(draw.trajectory)[keep, 1]

    return Decomposition(
        times=times,
        alpha_quantiles=np.percentile(alpha, QUANTILE_LEVELS, axis=0).T,
        beta_i_quantiles=np.percentile(beta_i, QUANTILE_LEVELS, axis=0).T,
        n_resamples=int(n_resamples))


def standardized_residuals(obs, params, forcing: DailyForcing, sim: SimConfig, rng, *,
                           n_sims: int = 5000) -> ResidualSeries:
    """Score observed counts against forward simulations at fixed parameters.

    Each simulation redraws the initial state, runs the chain across the
    observation times, and thins through the reporting distribution; the
    per-time mean and sd of those simulated counts standardize the data.
    Times where the simulations never vary get NaN residuals and a flag
    rather than a number.
    """
    if n_sims < 2:
        raise ValueError(f"need at least 2 simulations to estimate a spread, got {n_sims}")
    times = np.asarray([t for t, _ in obs], dtype=float)
    observed = np.asarray([y for _, y in obs], dtype=np.int64)
    if times.size == 0:
        raise ValueError("no observations to score")
    if np.any(np.diff(times) <= 0):
        raise ValueError("observation times must be strictly increasing")
    forcing.require_cover(times[0], times[-1])

    root = as_streams(rng)
    sim_counts = np.empty((n_sims, times.size), dtype=np.int64)
    for k in range(n_sims):
        gen = root.child(k).generator()
        state = sample_initial_state(params.phi_s, params.phi_i, params.n_pop, gen)
        sim_counts[k, 0] = sample_observation(state.i, params.rho, gen)
        if times.size > 1:
            path = simulate_path(state, times[0], times[1:], forcing, params, sim, gen)
            for c in range(1, times.size):
                sim_counts[k, c] = sample_observation(path[c - 1, 1], params.rho, gen)

    mean = sim_counts.mean(axis=0)
    sd = sim_counts.std(axis=0, ddof=1)
    flagged = sd == 0.0
    residuals = np.full(times.size, np.nan)
    ok = ~flagged
    residuals[ok] = (observed[ok] - mean[ok]) / sd[ok]
    return ResidualSeries(
        times=times, observed=observed, sim_mean=mean, sim_sd=sd,
        residuals=residuals, flagged=flagged, n_sims=int(n_sims))
