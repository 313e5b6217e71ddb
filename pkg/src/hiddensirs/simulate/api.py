"""Public simulation interface over the kernel backends.

Validates arguments, resolves the forcing step function, and dispatches to
whichever kernel build is active (see this subpackage's __init__). All
routines draw from the numpy Generator they are handed and nothing else.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..forcing import DailyForcing
from ..model import HiddenState, ModelParams, hazard_rates
from . import _backend

__all__ = [
    "SimConfig",
    "EventCounts",
    "METHODS",
    "simulate_exact",
    "simulate_tau_leap",
    "propagate",
    "simulate_path",
    "propagate_batch",
    "first_event_time",
    "direct_step",
    "first_reaction_step",
    "tau_leap_step",
]

METHODS = {
    "direct-exact": _backend.METHOD_DIRECT,
    "first-reaction-exact": _backend.METHOD_FIRST_REACTION,
    "tau-leap": _backend.METHOD_TAU_LEAP,
}

_EVENT_NAMES = {
    _backend.EVENT_NONE: None,
    _backend.EVENT_INFECTION: "infection",
    _backend.EVENT_RECOVERY: "recovery",
    _backend.EVENT_WANING: "waning",
}


@dataclass(frozen=True)
class SimConfig:
    """Simulator choice and tau-leap safeguards.

    tau_days is the nominal leap (leaps never cross day boundaries);
    critical_size is the compartment level below which stepping is exact;
    max_tau_halvings bounds leap-rejection retries before an exact fallback.
    """

    method: str = "tau-leap"
    tau_days: float = 1.0
    critical_size: int = 10
    max_tau_halvings: int = 30

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {sorted(METHODS)}")
        if not self.tau_days > 0:
            raise ValueError(f"tau_days must be positive, got {self.tau_days}")
        if self.critical_size < 0:
            raise ValueError(f"critical_size must be nonnegative, got {self.critical_size}")
        if self.max_tau_halvings < 0:
            raise ValueError(f"max_tau_halvings must be nonnegative, got {self.max_tau_halvings}")


class EventCounts(NamedTuple):
    infections: int
    recoveries: int
    wanings: int


def _check_state(state, n_pop) -> HiddenState:
    s, i = state
    if s != int(s) or i != int(i):
        raise ValueError(f"state must be integer counts, got {state!r}")
    s, i = int(s), int(i)
    if s < 0 or i < 0 or s + i > n_pop:
        raise ValueError(f"state ({s}, {i}) violates 0 <= s, i and s + i <= {n_pop}")
    return HiddenState(s, i)


def _check_window(t_from, t_to, forcing: DailyForcing):
    if t_to < t_from:
        raise ValueError(f"t_to {t_to} precedes t_from {t_from}")
    if t_to > t_from:
        forcing.require_cover(t_from, t_to)


def _kernel_args(config: SimConfig):
    return METHODS[config.method], float(config.tau_days), int(config.critical_size), int(config.max_tau_halvings)


def propagate(state, t_from: float, t_to: float, forcing: DailyForcing,
              params: ModelParams, config: SimConfig, rng) -> HiddenState:
    """Advance one trajectory from t_from to t_to under the configured method."""
    st = _check_state(state, params.n_pop)
    _check_window(t_from, t_to, forcing)
    if t_to == t_from:
        return st
    method, tau, crit, maxh = _kernel_args(config)
    s, i = _backend.advance(
        st.s, st.i, float(t_from), float(t_to), forcing.start_day, forcing.values,
        params.beta, params.gamma, params.mu, params.n_pop, method, tau, crit, maxh, rng,
    )
    return HiddenState(int(s), int(i))


def simulate_exact(state, t_from: float, t_to: float, forcing: DailyForcing,
                   params: ModelParams, rng, method: str = "direct-exact") -> HiddenState:
    """Exact simulation (direct or first-reaction), restarting at day boundaries."""
    if method not in ("direct-exact", "first-reaction-exact"):
        raise ValueError(f"simulate_exact needs an exact method, got {method!r}")
    return propagate(state, t_from, t_to, forcing, params, SimConfig(method=method), rng)


def simulate_tau_leap(state, t_from: float, t_to: float, forcing: DailyForcing,
                      params: ModelParams, rng, config: SimConfig = None) -> HiddenState:
    """Tau-leap simulation with rejection halving and small-compartment exact stepping."""
    config = SimConfig() if config is None else config
    if config.method != "tau-leap":
        config = SimConfig(method="tau-leap", tau_days=config.tau_days,
                           critical_size=config.critical_size,
                           max_tau_halvings=config.max_tau_halvings)
    return propagate(state, t_from, t_to, forcing, params, config, rng)


def simulate_path(state, t_from: float, times, forcing: DailyForcing,
                  params: ModelParams, config: SimConfig, rng) -> np.ndarray:
    """States at each of the strictly increasing times; shape (len(times), 2)."""
    times = np.ascontiguousarray(times, dtype=float)
    if times.ndim != 1:
        raise ValueError("times must be a 1-d sequence")
    st = _check_state(state, params.n_pop)
    if times.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    if times[0] < t_from or np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing and start at or after t_from")
    _check_window(t_from, float(times[-1]), forcing)
    method, tau, crit, maxh = _kernel_args(config)
    return _backend.advance_path(
        st.s, st.i, float(t_from), times, forcing.start_day, forcing.values,
        params.beta, params.gamma, params.mu, params.n_pop, method, tau, crit, maxh, rng,
    )


def propagate_batch(states: np.ndarray, t_from: float, t_to: float, forcing: DailyForcing,
                    params: ModelParams, config: SimConfig, rngs, threads: int = 1) -> None:
    """Advance each row of states (shape (K, 2), int64) in place, row k using rngs[k].

    Because every row draws from its own stream, the result is identical for
    any thread count.
    """
    if not (isinstance(states, np.ndarray) and states.dtype == np.int64
            and states.ndim == 2 and states.shape[1] == 2 and states.flags.c_contiguous):
        raise ValueError("states must be a C-contiguous int64 array of shape (K, 2)")
    if len(rngs) != states.shape[0]:
        raise ValueError("need one generator per state row")
    _check_window(t_from, t_to, forcing)
    if t_to == t_from or states.shape[0] == 0:
        return
    method, tau, crit, maxh = _kernel_args(config)

    def run(chunk_states, chunk_rngs):
        _backend.advance_batch(
            chunk_states, float(t_from), float(t_to), forcing.start_day, forcing.values,
            params.beta, params.gamma, params.mu, params.n_pop,
            method, tau, crit, maxh, chunk_rngs,
        )

    n = states.shape[0]
    if threads <= 1 or n == 1:
        run(states, list(rngs))
        return
    bounds = np.linspace(0, n, min(threads, n) + 1).astype(int)
    with ThreadPoolExecutor(max_workers=len(bounds) - 1) as pool:
        futures = [
            pool.submit(run, states[lo:hi], list(rngs[lo:hi]))
            for lo, hi in zip(bounds[:-1], bounds[1:])
            if hi > lo
        ]
        for fut in futures:
            fut.result()


def first_event_time(state, t_from: float, t_max: float, forcing: DailyForcing,
                     params: ModelParams, rng):
    """Time and kind of the first event after t_from, or (t_max, None, state) if none fires.

    Waiting times discarded at day boundaries are handled exactly as in the
    exact simulator, so the returned time has the chain's true first-event law.
    """
    st = _check_state(state, params.n_pop)
    _check_window(t_from, t_max, forcing)
    if t_max == t_from:
        return t_max, None, st
    t, code, s, i = _backend.first_event(
        st.s, st.i, float(t_from), float(t_max), forcing.start_day, forcing.values,
        params.beta, params.gamma, params.mu, params.n_pop, rng,
    )
    return float(t), _EVENT_NAMES[int(code)], HiddenState(int(s), int(i))


def direct_step(state, alpha_t: float, params: ModelParams, rng):
    """One direct-method step at fixed forcing: (event name, waiting time).

    Returns (None, inf) when every rate is zero. No day-boundary handling;
    this is the bare step primitive.
    """
    st = _check_state(state, params.n_pop)
    h1, h2, h3 = hazard_rates(st, alpha_t, params)
    h0 = h1 + h2 + h3
    if h0 <= 0.0:
        return None, np.inf
    wait = rng.standard_exponential() / h0
    u = rng.random() * h0
    if u < h1:
        return "infection", wait
    if u < h1 + h2:
        return "recovery", wait
    return "waning", wait


def first_reaction_step(state, alpha_t: float, params: ModelParams, rng):
    """One first-reaction step at fixed forcing: (event name, waiting time).

    Draws a candidate waiting time per positive-rate channel; the earliest
    fires. Returns (None, inf) when every rate is zero.
    """
    st = _check_state(state, params.n_pop)
    h1, h2, h3 = hazard_rates(st, alpha_t, params)
    best = np.inf
    event = None
    for name, h in (("infection", h1), ("recovery", h2), ("waning", h3)):
        if h > 0.0:
            w = rng.standard_exponential() / h
            if w < best:
                best = w
                event = name
    return event, best


def tau_leap_step(state, alpha_day: float, params: ModelParams, tau: float, rng) -> EventCounts:
    """Raw Poisson event counts for one leap of length tau at fixed forcing.

    No negativity screening here; simulate_tau_leap owns the retry logic.
    """
    st = _check_state(state, params.n_pop)
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    h1, h2, h3 = hazard_rates(st, alpha_day, params)
    return EventCounts(
        infections=int(rng.poisson(h1 * tau)),
        recoveries=int(rng.poisson(h2 * tau)),
        wanings=int(rng.poisson(h3 * tau)),
    )
