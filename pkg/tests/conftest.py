"""Shared fixtures: the running 4-state example, a random-MDP generator,
and dense brute-force oracles used to cross-check the solvers."""

import itertools

import numpy as np
import pytest

from policymc import ExplicitMdp, ObservationTable, build_explicit, parse_prism

LISTING1 = """
mdp

module sepsis
  s : [0..3] init 0;
  [a0] s=0 -> 0.7:(s'=1) + 0.3:(s'=2);
  [a1] s=0 -> 0.4:(s'=1) + 0.6:(s'=3);
  [a0] s=1 -> 0.8:(s'=2) + 0.2:(s'=3);
  [end] s=2 -> 1.0:(s'=2);
  [end] s=3 -> 1.0:(s'=3);
endmodule

label "survival" = s=2;
label "death" = s=3;

rewards
  s=2 : 1;
endrewards
"""


@pytest.fixture
def listing1():
    return build_explicit(parse_prism(LISTING1))


def one_hot_table(n, prefix="x"):
    eye = np.eye(n)
    return ObservationTable(n, [f"{prefix}{i}" for i in range(n)],
                            {s: eye[s] for s in range(n)})


def random_mdp(rng, max_states=6, max_actions=3):
    """Small MDP with two absorbing terminals (goal, sink).

    Transient states get 1..max_actions actions; every distribution
    touches at least one terminal so all schedulers are proper enough to
    keep brute-force enumeration cheap.
    """
    n = int(rng.integers(3, max_states + 1))
    goal, sink = n - 2, n - 1
    actions = tuple(f"a{i}" for i in range(max_actions))
    transitions = [dict() for _ in range(n)]
    for s in range(n - 2):
        n_act = int(rng.integers(1, max_actions + 1))
        for a in range(n_act):
            size = int(rng.integers(2, 4))
            targets = list(rng.choice(n, size=size, replace=False))
            if goal not in targets and sink not in targets:
                targets[int(rng.integers(0, size))] = int(
                    rng.choice([goal, sink]))
            targets = sorted(set(int(t) for t in targets))
            probs = rng.uniform(0.1, 1.0, size=len(targets))
            probs = probs / probs.sum()
            probs[-1] = 1.0 - float(probs[:-1].sum())
            transitions[s][a] = tuple(
                (t, float(p)) for t, p in zip(targets, probs))
    transitions[goal][0] = ((goal, 1.0),)
    transitions[sink][0] = ((sink, 1.0),)
    labels = {"goal": frozenset({goal}), "sink": frozenset({sink})}
    return ExplicitMdp(n, 0, actions, transitions, labels)


def chain_reach_exact(n, rows, phi1, phi2):
    """Dense least-fixed-point solve of P(phi1 U phi2) on a chain.

    rows[s] is the distribution of state s as ((target, prob), ...).
    """
    phi1 = np.asarray(phi1, dtype=bool)
    phi2 = np.asarray(phi2, dtype=bool)
    maybe = phi1 & ~phi2
    # States that can reach phi2 through phi1 states (backward closure).
    reach = phi2.copy()
    changed = True
    while changed:
        changed = False
        for s in range(n):
            if maybe[s] and not reach[s]:
                if any(reach[t] for t, p in rows[s] if p > 0.0):
                    reach[s] = True
                    changed = True
    x = np.zeros(n)
    x[phi2] = 1.0
    solve_states = [s for s in range(n) if maybe[s] and reach[s]]
    if solve_states:
        idx = {s: i for i, s in enumerate(solve_states)}
        k = len(solve_states)
        A = np.eye(k)
        b = np.zeros(k)
        for s in solve_states:
            i = idx[s]
            for t, p in rows[s]:
                if phi2[t]:
                    b[i] += p
                elif t in idx:
                    A[i, idx[t]] -= p
        x[solve_states] = np.linalg.solve(A, b)
    return x


def enumerate_schedulers(m):
    """Every deterministic memoryless scheduler as {state: action id}."""
    per_state = [m.enabled_actions(s) for s in range(m.n_states)]
    for combo in itertools.product(*per_state):
        yield dict(enumerate(combo))


def scheduler_rows(m, scheduler):
    return [m.transitions[s][scheduler[s]] for s in range(m.n_states)]


def brute_force_optimum(m, phi1, phi2, maximize):
    """Per-state optimal value by full scheduler enumeration."""
    best = None
    for sched in enumerate_schedulers(m):
        x = chain_reach_exact(m.n_states, scheduler_rows(m, sched),
                              phi1, phi2)
        if best is None:
            best = x
        else:
            best = np.maximum(best, x) if maximize else np.minimum(best, x)
    return best


def label_masks(m, phi2_label, phi1_label=None):
    n = m.n_states
    phi2 = np.zeros(n, dtype=bool)
    phi2[list(m.states_with_label(phi2_label))] = True
    if phi1_label is None:
        phi1 = np.ones(n, dtype=bool)
    else:
        phi1 = np.zeros(n, dtype=bool)
        phi1[list(m.states_with_label(phi1_label))] = True
    return phi1, phi2
