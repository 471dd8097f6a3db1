#!/usr/bin/env python3
"""Time the compiled iteration kernels against the pure-Python ones.

Both backends must produce bitwise-identical vectors; this script checks
that while it times them.  Run from the repo root after an editable
install:

    python3 benchmarks/bench_kernels.py [--states N] [--repeat K]
"""

import argparse
import time

import numpy as np

from policymc import _pykernels
from policymc.kernels import BACKEND

try:
    from policymc import _ckernels
except ImportError:
    _ckernels = None


def random_csr(rng, n_states, n_actions, fanout):
    """Random MDP straight in the flat CSR form the kernels consume."""
    state_choice_start = [0]
    choice_tstart = [0]
    t_target = []
    t_prob = []
    for _ in range(n_states):
        for _ in range(rng.integers(1, n_actions + 1)):
            succ = rng.choice(n_states, size=fanout, replace=False)
            w = rng.random(fanout) + 1e-3
            w /= w.sum()
            t_target.extend(int(t) for t in succ)
            t_prob.extend(float(p) for p in w)
            choice_tstart.append(len(t_target))
        state_choice_start.append(len(choice_tstart) - 1)
    return (np.asarray(state_choice_start, dtype=np.int64),
            np.asarray(choice_tstart, dtype=np.int64),
            np.asarray(t_target, dtype=np.int64),
            np.asarray(t_prob, dtype=np.float64))


def bench(label, fn, args, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--states", type=int, default=2000)
    ap.add_argument("--actions", type=int, default=4)
    ap.add_argument("--fanout", type=int, default=6)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sweeps", type=int, default=300)
    args = ap.parse_args()

    if _ckernels is None:
        raise SystemExit("compiled kernels unavailable; build the "
                         "extension first (pip install -e . "
                         "--no-build-isolation)")
    print(f"default backend at import time: {BACKEND}")

    rng = np.random.default_rng(7)
    scs, cts, tt, tp = random_csr(rng, args.states, args.actions,
                                  args.fanout)
    goal = rng.random(args.states) < 0.05
    unknown = np.flatnonzero(~goal).astype(np.int64)
    x0 = np.where(goal, 1.0, 0.0)

    # A single-choice chain reuses the same transition pool for the
    # Gauss-Seidel pass.
    dscs, dcts, dtt, dtp = random_csr(rng, args.states, 1, args.fanout)

    rows = []
    # tol=0 pins both backends to exactly args.sweeps iterations so the
    # timings divide like-for-like work.
    for name, mod in (("pure", _pykernels), ("compiled", _ckernels)):
        x = x0.copy()
        dt, (iters, delta) = bench(
            name, mod.vi_run,
            (scs, cts, tt, tp, unknown, x, True, 0.0, args.sweeps),
            args.repeat)
        rows.append((f"vi_run/{name}", dt, iters, x))
    for name, mod in (("pure", _pykernels), ("compiled", _ckernels)):
        x = x0.copy()
        dt, (iters, delta) = bench(
            name, mod.dtmc_gs_run,
            (dcts, dtt, dtp, unknown, x, 0.0, args.sweeps),
            args.repeat)
        rows.append((f"dtmc_gs_run/{name}", dt, iters, x))

    print(f"\n{'kernel':<22}{'best of ' + str(args.repeat):>14}"
          f"{'sweeps':>9}")
    for label, dt, iters, _ in rows:
        print(f"{label:<22}{dt * 1e3:>11.2f} ms{iters:>9}")
    for i in (0, 2):
        pure, comp = rows[i], rows[i + 1]
        same = pure[3].tobytes() == comp[3].tobytes()
        kind = pure[0].split("/")[0]
        print(f"{kind}: speedup x{pure[1] / comp[1]:.1f}, "
              f"bitwise identical: {same}")
        if not same:
            raise SystemExit(f"{kind}: backends disagree")


if __name__ == "__main__":
    main()
