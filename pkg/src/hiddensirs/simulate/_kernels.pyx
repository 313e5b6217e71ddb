# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
# cython: language_level=3
"""Compiled simulation kernels.

Twin of `_kernels_py`; see that module's docstring for the draw-order
contract. The two files must stay in branch-for-branch lockstep: both consume
the owning Generator's bitstream through the same underlying C functions
(standard exponential, standard uniform, Poisson), so trajectories are
bit-identical across backends. Generators passed in must not be shared across
concurrently running calls; the batch routine releases the GIL.
"""

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport INFINITY, floor
from libc.stdlib cimport free, malloc

from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport (
    random_poisson,
    random_standard_exponential,
    random_standard_uniform,
)

import numpy as np

cdef enum:
    _M_DIRECT = 0
    _M_FIRST_REACTION = 1
    _M_TAU_LEAP = 2

METHOD_DIRECT = _M_DIRECT
METHOD_FIRST_REACTION = _M_FIRST_REACTION
METHOD_TAU_LEAP = _M_TAU_LEAP

EVENT_NONE = 0
EVENT_INFECTION = 1
EVENT_RECOVERY = 2
EVENT_WANING = 3

# Poisson means above this are rejected without drawing (see _kernels_py).
cdef double _LAM_CAP = 1e15


cdef bitgen_t *_bitgen(object gen) except NULL:
    return <bitgen_t *> PyCapsule_GetPointer(gen.bit_generator.capsule, "BitGenerator")


cdef void _exact_span(long long *s, long long *i, double *t, double seg_end, double alpha,
                      double beta, double gamma, double mu, long long n_pop,
                      bitgen_t *bg, bint stop_at_crit, long long crit) noexcept nogil:
    cdef double h1, h2, h3, h0, wait, u
    while t[0] < seg_end:
        h1 = (beta * i[0] + alpha) * s[0]
        h2 = gamma * i[0]
        h3 = mu * (n_pop - s[0] - i[0])
        h0 = h1 + h2 + h3
        if h0 <= 0.0:
            t[0] = seg_end
            return
        wait = random_standard_exponential(bg) / h0
        if t[0] + wait >= seg_end:
            t[0] = seg_end
            return
        t[0] = t[0] + wait
        u = random_standard_uniform(bg) * h0
        if u < h1:
            s[0] -= 1
            i[0] += 1
        elif u < h1 + h2:
            i[0] -= 1
        else:
            s[0] += 1
        if stop_at_crit and s[0] >= crit and i[0] >= crit and n_pop - s[0] - i[0] >= crit:
            return


cdef void _fr_span(long long *s, long long *i, double *t, double seg_end, double alpha,
                   double beta, double gamma, double mu, long long n_pop,
                   bitgen_t *bg) noexcept nogil:
    cdef double h1, h2, h3, best, w
    cdef int channel
    while t[0] < seg_end:
        h1 = (beta * i[0] + alpha) * s[0]
        h2 = gamma * i[0]
        h3 = mu * (n_pop - s[0] - i[0])
        if h1 <= 0.0 and h2 <= 0.0 and h3 <= 0.0:
            t[0] = seg_end
            return
        best = INFINITY
        channel = 0
        if h1 > 0.0:
            best = random_standard_exponential(bg) / h1
            channel = 1
        if h2 > 0.0:
            w = random_standard_exponential(bg) / h2
            if w < best:
                best = w
                channel = 2
        if h3 > 0.0:
            w = random_standard_exponential(bg) / h3
            if w < best:
                channel = 3
                best = w
        if t[0] + best >= seg_end:
            t[0] = seg_end
            return
        t[0] = t[0] + best
        if channel == 1:
            s[0] -= 1
            i[0] += 1
        elif channel == 2:
            i[0] -= 1
        else:
            s[0] += 1


cdef void _tau_span(long long *s, long long *i, double *t, double seg_end, double alpha,
                    double beta, double gamma, double mu, long long n_pop,
                    double tau, long long crit, int max_halvings,
                    bitgen_t *bg) noexcept nogil:
    cdef double h1, h2, h3, remaining, tau_try
    cdef long long k1, k2, k3, s_next, i_next
    cdef bint full, rejected
    cdef int halvings
    while t[0] < seg_end:
        if s[0] < crit or i[0] < crit or n_pop - s[0] - i[0] < crit:
            _exact_span(s, i, t, seg_end, alpha, beta, gamma, mu, n_pop, bg, True, crit)
            continue
        h1 = (beta * i[0] + alpha) * s[0]
        h2 = gamma * i[0]
        h3 = mu * (n_pop - s[0] - i[0])
        remaining = seg_end - t[0]
        tau_try = tau if tau < remaining else remaining
        full = tau_try == remaining
        halvings = 0
        while True:
            rejected = True
            if h1 * tau_try <= _LAM_CAP and h2 * tau_try <= _LAM_CAP and h3 * tau_try <= _LAM_CAP:
                k1 = random_poisson(bg, h1 * tau_try)
                k2 = random_poisson(bg, h2 * tau_try)
                k3 = random_poisson(bg, h3 * tau_try)
                s_next = s[0] - k1 + k3
                i_next = i[0] + k1 - k2
                rejected = s_next < 0 or i_next < 0 or n_pop - s_next - i_next < 0
            if not rejected:
                s[0] = s_next
                i[0] = i_next
                t[0] = seg_end if full else t[0] + tau_try
                break
            halvings += 1
            if halvings > max_halvings:
                _exact_span(s, i, t, seg_end, alpha, beta, gamma, mu, n_pop, bg, False, crit)
                break
            tau_try = tau_try * 0.5
            full = False


cdef void _advance(long long *s, long long *i, double t_from, double t_to,
                   long long fstart, const double[::1] fvals,
                   double beta, double gamma, double mu, long long n_pop,
                   int method, double tau, long long crit, int max_halvings,
                   bitgen_t *bg) noexcept nogil:
    cdef double t = t_from
    cdef double day, seg_end, alpha
    while t < t_to:
        day = floor(t)
        seg_end = day + 1.0
        if t_to < seg_end:
            seg_end = t_to
        alpha = fvals[<Py_ssize_t> (<long long> day - fstart)]
        if method == _M_DIRECT:
            _exact_span(s, i, &t, seg_end, alpha, beta, gamma, mu, n_pop, bg, False, 0)
        elif method == _M_FIRST_REACTION:
            _fr_span(s, i, &t, seg_end, alpha, beta, gamma, mu, n_pop, bg)
        else:
            _tau_span(s, i, &t, seg_end, alpha, beta, gamma, mu, n_pop,
                      tau, crit, max_halvings, bg)


def advance(s, i, double t_from, double t_to, fstart, const double[::1] fvals,
            double beta, double gamma, double mu, n_pop,
            int method, double tau, crit, int max_halvings, gen):
    """Advance one trajectory from t_from to t_to. Returns (s, i)."""
    cdef long long cs = s
    cdef long long ci = i
    cdef bitgen_t *bg = _bitgen(gen)
    _advance(&cs, &ci, t_from, t_to, <long long> fstart, fvals, beta, gamma, mu,
             <long long> n_pop, method, tau, <long long> crit, max_halvings, bg)
    return cs, ci


def advance_path(s, i, double t_from, const double[::1] times, fstart, const double[::1] fvals,
                 double beta, double gamma, double mu, n_pop,
                 int method, double tau, crit, int max_halvings, gen):
    """Advance through successive times, recording (s, i) at each. Returns (len(times), 2)."""
    cdef long long cs = s
    cdef long long ci = i
    cdef long long cfstart = fstart
    cdef long long cn = n_pop
    cdef long long ccrit = crit
    cdef bitgen_t *bg = _bitgen(gen)
    out_arr = np.empty((times.shape[0], 2), dtype=np.int64)
    cdef long long[:, ::1] out = out_arr
    cdef Py_ssize_t j
    cdef double t = t_from
    with nogil:
        for j in range(times.shape[0]):
            _advance(&cs, &ci, t, times[j], cfstart, fvals, beta, gamma, mu,
                     cn, method, tau, ccrit, max_halvings, bg)
            out[j, 0] = cs
            out[j, 1] = ci
            t = times[j]
    return out_arr


def advance_batch(long long[:, ::1] states, double t_from, double t_to,
                  fstart, const double[::1] fvals,
                  double beta, double gamma, double mu, n_pop,
                  int method, double tau, crit, int max_halvings, gens):
    """Advance states[k] with gens[k] for every row; updates states in place."""
    cdef Py_ssize_t n_rows = states.shape[0]
    if len(gens) != n_rows:
        raise ValueError("need one generator per state row")
    cdef long long cfstart = fstart
    cdef long long cn = n_pop
    cdef long long ccrit = crit
    cdef bitgen_t **ptrs = <bitgen_t **> malloc(n_rows * sizeof(bitgen_t *))
    if ptrs == NULL:
        raise MemoryError
    cdef Py_ssize_t k
    try:
        for k in range(n_rows):
            ptrs[k] = _bitgen(gens[k])
        with nogil:
            for k in range(n_rows):
                _advance(&states[k, 0], &states[k, 1], t_from, t_to, cfstart, fvals,
                         beta, gamma, mu, cn, method, tau, ccrit, max_halvings, ptrs[k])
    finally:
        free(ptrs)


def first_event(s, i, double t_from, double t_max, fstart, const double[::1] fvals,
                double beta, double gamma, double mu, n_pop, gen):
    """Run the direct method until the first event fires or t_max is reached.

    Returns (t, event_code, s, i) with the post-event state.
    """
    cdef long long cs = s
    cdef long long ci = i
    cdef long long cfstart = fstart
    cdef long long cn = n_pop
    cdef bitgen_t *bg = _bitgen(gen)
    cdef double t = t_from
    cdef double day, seg_end, alpha, h1, h2, h3, h0, wait, u
    while t < t_max:
        day = floor(t)
        seg_end = day + 1.0
        if t_max < seg_end:
            seg_end = t_max
        alpha = fvals[<Py_ssize_t> (<long long> day - cfstart)]
        h1 = (beta * ci + alpha) * cs
        h2 = gamma * ci
        h3 = mu * (cn - cs - ci)
        h0 = h1 + h2 + h3
        if h0 <= 0.0:
            t = seg_end
            continue
        wait = random_standard_exponential(bg) / h0
        if t + wait >= seg_end:
            t = seg_end
            continue
        t = t + wait
        u = random_standard_uniform(bg) * h0
        if u < h1:
            return t, EVENT_INFECTION, cs - 1, ci + 1
        if u < h1 + h2:
            return t, EVENT_RECOVERY, cs, ci - 1
        return t, EVENT_WANING, cs + 1, ci
    return t_max, EVENT_NONE, cs, ci
