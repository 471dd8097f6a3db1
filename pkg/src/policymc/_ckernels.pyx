# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled sweep kernels.

Mirrors `_pykernels.py` statement for statement; together with
-ffp-contract=off this keeps results bitwise-identical to the pure
Python backend.
"""


def vi_run(const long long[::1] state_choice_start,
           const long long[::1] choice_tstart,
           const long long[::1] t_target,
           const double[::1] t_prob,
           const long long[::1] unknown,
           double[::1] x,
           bint maximize, double tol, long long max_iter):
    cdef Py_ssize_t n_unknown = unknown.shape[0]
    if n_unknown == 0:
        return 0, 0.0
    cdef double[::1] x_prev = x.copy()
    cdef long long iters = 0
    cdef double delta = 0.0
    cdef double acc, best, d
    cdef Py_ssize_t i
    cdef long long s, c, k
    cdef bint first
    while iters < max_iter:
        iters += 1
        delta = 0.0
        for i in range(n_unknown):
            s = unknown[i]
            best = 0.0
            first = True
            for c in range(state_choice_start[s], state_choice_start[s + 1]):
                acc = 0.0
                for k in range(choice_tstart[c], choice_tstart[c + 1]):
                    acc += t_prob[k] * x_prev[t_target[k]]
                if first:
                    best = acc
                    first = False
                elif maximize:
                    if acc > best:
                        best = acc
                else:
                    if acc < best:
                        best = acc
            x[s] = best
            d = best - x_prev[s]
            if d < 0.0:
                d = -d
            if d > delta:
                delta = d
        for i in range(n_unknown):
            s = unknown[i]
            x_prev[s] = x[s]
        if delta < tol:
            break
    return iters, delta


def dtmc_gs_run(const long long[::1] row_start,
                const long long[::1] col,
                const double[::1] prob,
                const long long[::1] unknown,
                double[::1] x,
                double tol, long long max_iter):
    cdef Py_ssize_t n_unknown = unknown.shape[0]
    if n_unknown == 0:
        return 0, 0.0
    cdef long long iters = 0
    cdef double delta = 0.0
    cdef double acc, d
    cdef Py_ssize_t i
    cdef long long s, k
    while iters < max_iter:
        iters += 1
        delta = 0.0
        for i in range(n_unknown):
            s = unknown[i]
            acc = 0.0
            for k in range(row_start[s], row_start[s + 1]):
                acc += prob[k] * x[col[k]]
            d = acc - x[s]
            if d < 0.0:
                d = -d
            if d > delta:
                delta = d
            x[s] = acc
        if delta < tol:
            break
    return iters, delta


def q_values(const long long[::1] choice_tstart,
             const long long[::1] t_target,
             const double[::1] t_prob,
             const double[::1] x,
             double[::1] out):
    cdef Py_ssize_t n_choices = out.shape[0]
    cdef double acc
    cdef Py_ssize_t c
    cdef long long k
    for c in range(n_choices):
        acc = 0.0
        for k in range(choice_tstart[c], choice_tstart[c + 1]):
            acc += t_prob[k] * x[t_target[k]]
        out[c] = acc
