"""Policy-induced chain construction.

Fixing a deterministic policy in an MDP and keeping only the states
reachable from the initial state yields a Markov chain; transition
probabilities are copied exactly from the source model.  Labels come
from the source model, from label rules evaluated against the
observation table, and optionally from the chosen actions themselves.
"""

from .errors import CheckError, PolicyError
from .model import ExplicitDtmc, apply_label_rules


class InducedDtmc:
    """A chain plus provenance: which source state and chosen action each
    chain state corresponds to."""

    def __init__(self, chain, source_states, chosen_actions, stats):
        self.chain = chain
        self.source_states = tuple(source_states)
        self.chosen_actions = tuple(chosen_actions)
        self.stats = dict(stats)

    @property
    def n_states(self):
        return self.chain.n_states

    @property
    def labels(self):
        return self.chain.labels

    def relabel(self, labels):
        return InducedDtmc(self.chain.with_labels(labels),
                           self.source_states, self.chosen_actions,
                           self.stats)


def induce(m, policy, obs=None, rules=None):
    """Build the chain induced by `policy` on `m`.

    The policy is consulted as policy.choose(state_id, observation);
    tabular policies ignore the observation, net policies ignore the
    state id.  States are explored from the initial state with an
    iterative worklist and renumbered in ascending source-state order.
    Errors: the policy is undefined at a reachable state, or it picks an
    action that is not enabled there.
    """
    chosen = {}
    visited = set()
    stack = [m.initial_state]
    while stack:
        s = stack.pop()
        if s in visited:
            continue
        visited.add(s)
        o = obs.observe(s) if obs is not None else None
        a = policy.choose(s, o)
        if a not in m.transitions[s]:
            raise PolicyError(
                f"policy chose action {a} at state {s}, but only "
                f"{m.enabled_actions(s)} are enabled")
        chosen[s] = a
        # Push successors largest-first so smaller ids are explored first.
        succs = sorted({t for t, _ in m.transitions[s][a]}, reverse=True)
        for t in succs:
            if t not in visited:
                stack.append(t)

    source_states = sorted(visited)
    index = {s: i for i, s in enumerate(source_states)}
    transitions = []
    n_trans = 0
    for s in source_states:
        dist = tuple((index[t], p) for t, p in m.transitions[s][chosen[s]])
        transitions.append(dist)
        n_trans += len(dist)

    label_map = m.labels
    if rules is not None:
        if obs is None:
            raise PolicyError("label rules need an observation table")
        label_map = apply_label_rules(m, obs, rules)
    labels = {}
    for name, states in label_map.items():
        members = frozenset(index[s] for s in states if s in index)
        labels[name] = members

    chain = ExplicitDtmc(len(source_states), index[m.initial_state],
                         transitions, labels)
    stats = {
        "source_states": m.n_states,
        "reachable_states": len(source_states),
        "transitions": n_trans,
        "source_transitions": m.transition_count(),
    }
    return InducedDtmc(chain, source_states,
                       [chosen[s] for s in source_states], stats)


def label_actions(d, action_names):
    """Chain with each state labelled by its chosen action's name.

    Every state carries exactly one action label; a missing name for a
    chosen action id is an error.
    """
    labels = {name: set(states) for name, states in d.chain.labels.items()}
    for i, a in enumerate(d.chosen_actions):
        if a >= len(action_names):
            raise CheckError(f"no name for action id {a}")
        labels.setdefault(action_names[a], set()).add(i)
    return d.relabel({k: frozenset(v) for k, v in labels.items()})


def label_top_feature(d, report):
    """Chain with `imp_<feature>` labels on states the report covers."""
    labels = {name: set(states) for name, states in d.chain.labels.items()}
    for i, s in enumerate(d.source_states):
        if report.covers(s):
            labels.setdefault(f"imp_{report.top_feature(s)}", set()).add(i)
    return d.relabel({k: frozenset(v) for k, v in labels.items()})


# ---------------------------------------------------------------------------
# Exports


def save_tra(d, path):
    """Transition list: header lines, then one `src dst prob` per line."""
    lines = [f"states {d.chain.n_states}",
             f"transitions {d.chain.transition_count()}",
             f"initial {d.chain.initial_state}"]
    for s, dist in enumerate(d.chain.transitions):
        for t, p in dist:
            lines.append(f"{s} {t} {p!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def save_lab(d, path):
    """Label file: `<state>: <label> <label> ...`, labels sorted."""
    per_state = [[] for _ in range(d.chain.n_states)]
    for name in sorted(d.chain.labels):
        for s in d.chain.labels[name]:
            per_state[s].append(name)
    with open(path, "w") as fh:
        for s, names in enumerate(per_state):
            fh.write(f"{s}: {' '.join(sorted(names))}\n")


def save_stats(d, path, extra=None):
    items = dict(d.stats)
    if extra:
        items.update(extra)
    with open(path, "w") as fh:
        for key in sorted(items):
            fh.write(f"{key} = {items[key]}\n")
