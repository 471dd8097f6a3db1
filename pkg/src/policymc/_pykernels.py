"""Pure-Python sweep kernels.

Reference implementation for the compiled extension: loop structure and
accumulation order match `_ckernels.pyx` statement for statement, so both
backends produce bitwise-identical float64 results.
"""


def vi_run(state_choice_start, choice_tstart, t_target, t_prob,
           unknown, x, maximize, tol, max_iter):
    """Jacobi value-iteration sweeps over the `unknown` states, in place
    on x.  Returns (iterations, last sup-norm delta)."""
    n_unknown = len(unknown)
    if n_unknown == 0:
        return 0, 0.0
    x_prev = x.copy()
    iters = 0
    delta = 0.0
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


def dtmc_gs_run(row_start, col, prob, unknown, x, tol, max_iter):
    """Gauss-Seidel sweeps over the `unknown` states in the given order,
    updating x in place.  Returns (iterations, last sup-norm delta)."""
    n_unknown = len(unknown)
    if n_unknown == 0:
        return 0, 0.0
    iters = 0
    delta = 0.0
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


def q_values(choice_tstart, t_target, t_prob, x, out):
    """One-step backup value of every choice under the value vector x."""
    n_choices = len(out)
    for c in range(n_choices):
        acc = 0.0
        for k in range(choice_tstart[c], choice_tstart[c + 1]):
            acc += t_prob[k] * x[t_target[k]]
        out[c] = acc
