"""Explicit-state models, observation tables, and label rules.

Transition probabilities are kept exactly as parsed (64-bit floats); sums
are checked against a 1e-12 tolerance but never silently renormalized.
All containers are treated as immutable after construction.
"""

import csv
import math
import re

import numpy as np

from .errors import FormatError, ModelError, ParseError

SUM_TOL = 1e-12

COMPARATORS = ("<=", ">=", "<", ">", "=")


def _compare(value, op, threshold):
    if op == "<":
        return value < threshold
    if op == "<=":
        return value <= threshold
    if op == ">":
        return value > threshold
    if op == ">=":
        return value >= threshold
    if op == "=":
        return value == threshold
    raise ModelError(f"unknown comparator {op!r}")


class ExplicitMdp:
    """Sparse explicit-state MDP.

    transitions[s] maps an enabled action id to a tuple of
    (successor, probability) pairs.  `actions` is the global action-name
    table; an action id indexes into it.  `labels` maps a label name to a
    frozen set of state ids.  `terminal_reward` maps state id to reward.
    """

    def __init__(self, n_states, initial_state, actions, transitions,
                 labels=None, terminal_reward=None):
        self.n_states = int(n_states)
        self.initial_state = int(initial_state)
        self.actions = tuple(actions)
        self.transitions = tuple(
            {int(a): tuple((int(t), float(p)) for t, p in dist)
             for a, dist in per_state.items()}
            for per_state in transitions
        )
        self.labels = {name: frozenset(states)
                       for name, states in (labels or {}).items()}
        self.terminal_reward = dict(terminal_reward or {})
        if len(self.transitions) != self.n_states:
            raise ModelError(
                f"transition table covers {len(self.transitions)} states, "
                f"expected {self.n_states}")

    def enabled_actions(self, s):
        return sorted(self.transitions[s])

    def distribution(self, s, a):
        try:
            return self.transitions[s][a]
        except KeyError:
            raise ModelError(f"action {a} not enabled in state {s}") from None

    def action_name(self, a):
        return self.actions[a]

    def states_with_label(self, name):
        return self.labels.get(name, frozenset())

    def with_labels(self, labels):
        """Copy of this model with `labels` as its label map."""
        return ExplicitMdp(self.n_states, self.initial_state, self.actions,
                           self.transitions, labels, self.terminal_reward)

    def transition_count(self):
        return sum(len(dist) for per_state in self.transitions
                   for dist in per_state.values())

    def choice_count(self):
        return sum(len(per_state) for per_state in self.transitions)


class ExplicitDtmc:
    """Sparse explicit-state Markov chain: one distribution per state."""

    def __init__(self, n_states, initial_state, transitions, labels=None):
        self.n_states = int(n_states)
        self.initial_state = int(initial_state)
        self.transitions = tuple(
            tuple((int(t), float(p)) for t, p in dist)
            for dist in transitions
        )
        self.labels = {name: frozenset(states)
                       for name, states in (labels or {}).items()}
        if len(self.transitions) != self.n_states:
            raise ModelError(
                f"transition table covers {len(self.transitions)} states, "
                f"expected {self.n_states}")

    def distribution(self, s):
        return self.transitions[s]

    def states_with_label(self, name):
        return self.labels.get(name, frozenset())

    def with_labels(self, labels):
        return ExplicitDtmc(self.n_states, self.initial_state,
                            self.transitions, labels)

    def transition_count(self):
        return sum(len(dist) for dist in self.transitions)

    def as_mdp(self, action_name="step"):
        """View this chain as a one-action-per-state MDP."""
        transitions = [{0: dist} for dist in self.transitions]
        return ExplicitMdp(self.n_states, self.initial_state, (action_name,),
                           transitions, self.labels)


class ObservationTable:
    """Feature vectors keyed by state id.

    States without a row (auxiliary initial/terminal states) observe as the
    all-zero vector.
    """

    def __init__(self, n_states, feature_names, rows):
        self.n_states = int(n_states)
        self.feature_names = tuple(feature_names)
        self.d = len(self.feature_names)
        if len(set(self.feature_names)) != self.d:
            raise ModelError("duplicate feature names in observation table")
        self.rows = {}
        for s, vec in rows.items():
            v = np.asarray(vec, dtype=np.float64)
            if v.shape != (self.d,):
                raise ModelError(
                    f"state {s}: row has {v.size} values, expected {self.d}")
            if not np.all(np.isfinite(v)):
                raise ModelError(f"state {s}: non-finite feature value")
            v.setflags(write=False)
            self.rows[int(s)] = v
        self._zero = np.zeros(self.d, dtype=np.float64)
        self._zero.setflags(write=False)

    def has_row(self, s):
        return s in self.rows

    def observe(self, s):
        return self.rows.get(s, self._zero)

    def feature_index(self, name):
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise ModelError(f"unknown feature {name!r}") from None

    def feature_values(self, i):
        """Values of feature i over all states having a row, id-sorted."""
        return np.array([self.rows[s][i] for s in sorted(self.rows)],
                        dtype=np.float64)


class LabelRule:
    """One labeling rule: states where `feature op threshold` gain `label`.

    threshold is either a float literal or the string "pNN" resolved as a
    percentile over the observed values of the feature.
    """

    def __init__(self, label, feature, op, threshold):
        if op not in COMPARATORS:
            raise ModelError(f"unknown comparator {op!r}")
        if isinstance(threshold, str):
            m = re.fullmatch(r"p(\d+(?:\.\d+)?)", threshold)
            if not m:
                raise ModelError(f"malformed percentile {threshold!r}")
            pct = float(m.group(1))
            if not 0.0 <= pct <= 100.0:
                raise ModelError(
                    f"percentile {pct} outside [0, 100] in rule for "
                    f"{label!r}")
        self.label = label
        self.feature = feature
        self.op = op
        self.threshold = threshold

    def resolve_threshold(self, obs):
        if isinstance(self.threshold, str):
            values = obs.feature_values(obs.feature_index(self.feature))
            if values.size == 0:
                raise ModelError(
                    f"rule for {self.label!r}: no observed values to take a "
                    f"percentile of")
            pct = float(self.threshold[1:])
            # Linear interpolation between order statistics: percentile p
            # lands at rank 1 + (k-1)p/100 over the sorted values.
            return float(np.percentile(values, pct))
        return float(self.threshold)

    def __repr__(self):
        return (f"LabelRule({self.label!r}, {self.feature!r}, "
                f"{self.op!r}, {self.threshold!r})")


class LabelRuleSet:

    def __init__(self, rules):
        self.rules = tuple(rules)

    def validate(self, obs):
        for rule in self.rules:
            obs.feature_index(rule.feature)

    def __iter__(self):
        return iter(self.rules)

    def __len__(self):
        return len(self.rules)


def validate_mdp(m):
    """Collect invariant violations; empty list means the model is ok.

    Reports, never raises: each entry names the offending state (and
    action where relevant).
    """
    violations = []
    if not 0 <= m.initial_state < m.n_states:
        violations.append(
            f"initial state {m.initial_state} outside [0, {m.n_states})")
    for s in range(m.n_states):
        per_state = m.transitions[s]
        if not per_state:
            violations.append(f"state {s}: no enabled action (deadlock)")
            continue
        for a in sorted(per_state):
            dist = per_state[a]
            if a < 0 or a >= len(m.actions):
                violations.append(f"state {s}, action {a}: unknown action id")
            total = 0.0
            for t, p in dist:
                if not (0.0 <= p <= 1.0) or not math.isfinite(p):
                    violations.append(
                        f"state {s}, action {a}: probability {p!r} "
                        f"outside [0, 1]")
                if not 0 <= t < m.n_states:
                    violations.append(
                        f"state {s}, action {a}: successor {t} outside "
                        f"[0, {m.n_states})")
                total += p
            if abs(total - 1.0) > SUM_TOL:
                violations.append(
                    f"state {s}, action {a}: distribution sums to {total!r}")
    for name, states in m.labels.items():
        for s in states:
            if not 0 <= s < m.n_states:
                violations.append(
                    f"label {name!r}: state {s} outside [0, {m.n_states})")
    return violations


def apply_label_rules(m, obs, rules):
    """Label map of `m` extended by the rules, evaluated against `obs`.

    Percentile thresholds are resolved over the feature's values across all
    states having an observation row, each state weighted equally.  Only
    states with a row are eligible for rule labels.  Existing labels are
    preserved (union per label name).
    """
    rules.validate(obs)
    labels = {name: set(states) for name, states in m.labels.items()}
    for rule in rules:
        threshold = rule.resolve_threshold(obs)
        idx = obs.feature_index(rule.feature)
        hit = labels.setdefault(rule.label, set())
        for s in sorted(obs.rows):
            if _compare(obs.rows[s][idx], rule.op, threshold):
                hit.add(s)
    return {name: frozenset(states) for name, states in labels.items()}


def load_observation_table(path, n_states=None):
    """Read a `state,<f1>,...,<fd>` CSV into an ObservationTable."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty observation file") from None
        if not header or header[0].strip() != "state":
            raise FormatError(
                f"{path}: header must start with 'state', got {header!r}")
        feature_names = [name.strip() for name in header[1:]]
        if not feature_names:
            raise FormatError(f"{path}: no feature columns")
        rows = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(feature_names) + 1:
                raise FormatError(
                    f"{path}:{lineno}: expected {len(feature_names) + 1} "
                    f"fields, got {len(row)}")
            try:
                s = int(row[0])
                vec = [float(x) for x in row[1:]]
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
            if s in rows:
                raise FormatError(f"{path}:{lineno}: duplicate state {s}")
            rows[s] = vec
    if n_states is None:
        n_states = max(rows) + 1 if rows else 0
    return ObservationTable(n_states, feature_names, rows)


_RULE_RE = re.compile(
    r"label\s+(\w+)\s*:=\s*([A-Za-z_]\w*)\s*(<=|>=|<|>|=)\s*(\S+)\s*$")


def load_label_rules(path):
    """Read label rules, one `label <name> := <feature> <op> <value|pNN>`
    per line; `#` starts a comment."""
    rules = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            m = _RULE_RE.match(line)
            if not m:
                raise ParseError(f"malformed label rule {line!r}",
                                 line=lineno, column=1)
            label, feature, op, value = m.groups()
            if re.fullmatch(r"p\d+(?:\.\d+)?", value):
                threshold = value
            else:
                try:
                    threshold = float(value)
                except ValueError:
                    raise ParseError(
                        f"bad threshold {value!r} (expected a number or pNN)",
                        line=lineno, column=1) from None
            try:
                rules.append(LabelRule(label, feature, op, threshold))
            except ModelError as exc:
                raise ParseError(str(exc), line=lineno, column=1) from None
    return LabelRuleSet(rules)
