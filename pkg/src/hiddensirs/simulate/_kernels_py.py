"""Pure-Python simulation kernels.

Reference implementation of the chain advance routines. The compiled module
`_kernels` mirrors this file function for function and must consume random
draws in exactly the same order with exactly the same floating-point
arithmetic, so that a given Generator yields bit-identical trajectories under
either backend. Any change here requires the matching change there.

Draw-order contract per step:
  direct method: one standard exponential for the waiting time; one uniform
    for the event channel, consumed only if the step fits inside the current
    day segment (a waiting time crossing the segment end is discarded and the
    clock restarts at the boundary, which is exact by memorylessness).
  first-reaction method: one standard exponential per channel with positive
    rate, in channel order (infection, recovery, waning); smallest wins.
  tau-leap: three Poisson draws (infection, recovery, waning) per attempt.
    numpy's Poisson consumes no bits when the mean is zero, so zero-rate
    channels stay in lockstep across backends.
"""

from __future__ import annotations

import math

import numpy as np

# method codes shared with the compiled kernels
METHOD_DIRECT = 0
METHOD_FIRST_REACTION = 1
METHOD_TAU_LEAP = 2

# Event codes for first_event.
EVENT_NONE = 0
EVENT_INFECTION = 1
EVENT_RECOVERY = 2
EVENT_WANING = 3

# Poisson means above this are rejected without drawing: the draw would risk
# int64 overflow, and a count at least this large exceeds any compartment with
# probability 1 at double precision.
_LAM_CAP = 1e15


def _exact_span(s, i, t, seg_end, alpha, beta, gamma, mu, n_pop, gen, stop_at_crit, crit):
    """Exact (direct-method) stepping within one day segment.

    Advances until the segment ends, or, when stop_at_crit is set, until all
    three compartments reach crit. Returns (s, i, t).
    """
    exp_draw = gen.standard_exponential
    unif = gen.random
    while t < seg_end:
        h1 = (beta * i + alpha) * s
        h2 = gamma * i
        h3 = mu * (n_pop - s - i)
        h0 = h1 + h2 + h3
        if h0 <= 0.0:
            return s, i, seg_end
        wait = exp_draw() / h0
        if t + wait >= seg_end:
            return s, i, seg_end
        t = t + wait
        u = unif() * h0
        if u < h1:
            s -= 1
            i += 1
        elif u < h1 + h2:
            i -= 1
        else:
            s += 1
        if stop_at_crit and s >= crit and i >= crit and n_pop - s - i >= crit:
            return s, i, t
    return s, i, t


def _fr_span(s, i, t, seg_end, alpha, beta, gamma, mu, n_pop, gen):
    """First-reaction stepping within one day segment. Returns (s, i, t)."""
    exp_draw = gen.standard_exponential
    while t < seg_end:
        h1 = (beta * i + alpha) * s
        h2 = gamma * i
        h3 = mu * (n_pop - s - i)
        if h1 <= 0.0 and h2 <= 0.0 and h3 <= 0.0:
            return s, i, seg_end
        best = math.inf
        channel = 0
        if h1 > 0.0:
            best = exp_draw() / h1
            channel = 1
        if h2 > 0.0:
            w = exp_draw() / h2
            if w < best:
                best = w
                channel = 2
        if h3 > 0.0:
            w = exp_draw() / h3
            if w < best:
                channel = 3
                best = w
        if t + best >= seg_end:
            return s, i, seg_end
        t = t + best
        if channel == 1:
            s -= 1
            i += 1
        elif channel == 2:
            i -= 1
        else:
            s += 1
    return s, i, t


def _tau_span(s, i, t, seg_end, alpha, beta, gamma, mu, n_pop, tau, crit, max_halvings, gen):
    """Tau-leaping within one day segment. Returns (s, i, t).

    Leaps cover min(tau, remainder of segment). A leap that would push any
    compartment negative is retried at half the step, up to max_halvings,
    then the segment remainder is finished with exact steps. Whenever a
    compartment sits below crit, exact steps are used until all are back at
    or above it.
    """
    pois = gen.poisson
    while t < seg_end:
        if s < crit or i < crit or n_pop - s - i < crit:
            s, i, t = _exact_span(s, i, t, seg_end, alpha, beta, gamma, mu, n_pop, gen, True, crit)
            continue
        h1 = (beta * i + alpha) * s
        h2 = gamma * i
        h3 = mu * (n_pop - s - i)
        remaining = seg_end - t
        tau_try = tau if tau < remaining else remaining
        full = tau_try == remaining
        halvings = 0
        while True:
            rejected = True
            if h1 * tau_try <= _LAM_CAP and h2 * tau_try <= _LAM_CAP and h3 * tau_try <= _LAM_CAP:
                k1 = pois(h1 * tau_try)
                k2 = pois(h2 * tau_try)
                k3 = pois(h3 * tau_try)
                s_next = s - k1 + k3
                i_next = i + k1 - k2
                rejected = s_next < 0 or i_next < 0 or n_pop - s_next - i_next < 0
            if not rejected:
                s = int(s_next)
                i = int(i_next)
                t = seg_end if full else t + tau_try
                break
            halvings += 1
            if halvings > max_halvings:
                s, i, t = _exact_span(s, i, t, seg_end, alpha, beta, gamma, mu, n_pop, gen, False, crit)
                break
            tau_try = tau_try * 0.5
            full = False
    return s, i, t


def advance(s, i, t_from, t_to, fstart, fvals, beta, gamma, mu, n_pop,
            method, tau, crit, max_halvings, gen):
    """Advance one trajectory from t_from to t_to. Returns (s, i)."""
    s = int(s)
    i = int(i)
    t = t_from
    while t < t_to:
        day = math.floor(t)
        seg_end = day + 1.0
        if t_to < seg_end:
            seg_end = t_to
        alpha = fvals[int(day) - fstart]
        if method == METHOD_DIRECT:
            s, i, t = _exact_span(s, i, t, seg_end, alpha, beta, gamma, mu, n_pop, gen, False, 0)
        elif method == METHOD_FIRST_REACTION:
            s, i, t = _fr_span(s, i, t, seg_end, alpha, beta, gamma, mu, n_pop, gen)
        else:
            s, i, t = _tau_span(s, i, t, seg_end, alpha, beta, gamma, mu, n_pop,
                                tau, crit, max_halvings, gen)
    return s, i


def advance_path(s, i, t_from, times, fstart, fvals, beta, gamma, mu, n_pop,
                 method, tau, crit, max_halvings, gen):
    """Advance through successive times, recording (s, i) at each. Returns (len(times), 2)."""
    out = np.empty((len(times), 2), dtype=np.int64)
    t = t_from
    for j, t_next in enumerate(times):
        s, i = advance(s, i, t, t_next, fstart, fvals, beta, gamma, mu, n_pop,
                       method, tau, crit, max_halvings, gen)
        out[j, 0] = s
        out[j, 1] = i
        t = t_next
    return out


def advance_batch(states, t_from, t_to, fstart, fvals, beta, gamma, mu, n_pop,
                  method, tau, crit, max_halvings, gens):
    """Advance states[k] with gens[k] for every row; updates states in place."""
    for k in range(states.shape[0]):
        s, i = advance(states[k, 0], states[k, 1], t_from, t_to, fstart, fvals,
                       beta, gamma, mu, n_pop, method, tau, crit, max_halvings, gens[k])
        states[k, 0] = s
        states[k, 1] = i


def first_event(s, i, t_from, t_max, fstart, fvals, beta, gamma, mu, n_pop, gen):
    """Run the direct method until the first event fires or t_max is reached.

    Returns (t, event_code, s, i) with the post-event state; event_code is
    EVENT_NONE when no event fired by t_max.
    """
    s = int(s)
    i = int(i)
    exp_draw = gen.standard_exponential
    unif = gen.random
    t = t_from
    while t < t_max:
        day = math.floor(t)
        seg_end = day + 1.0
        if t_max < seg_end:
            seg_end = t_max
        alpha = fvals[int(day) - fstart]
        h1 = (beta * i + alpha) * s
        h2 = gamma * i
        h3 = mu * (n_pop - s - i)
        h0 = h1 + h2 + h3
        if h0 <= 0.0:
            t = seg_end
            continue
        wait = exp_draw() / h0
        if t + wait >= seg_end:
            t = seg_end
            continue
        t = t + wait
        u = unif() * h0
        if u < h1:
            return t, EVENT_INFECTION, s - 1, i + 1
        if u < h1 + h2:
            return t, EVENT_RECOVERY, s, i - 1
        return t, EVENT_WANING, s + 1, i
    return t_max, EVENT_NONE, s, i
