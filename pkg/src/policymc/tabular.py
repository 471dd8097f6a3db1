"""Conversion of tabular transition data into the guarded-command form.

Input is three CSV files: transitions (state,action,next_state,prob),
initial distribution (state,prob), and a meta table naming actions and the
terminal state sets.  The converter emits an AST with one auxiliary initial
state wired to the admission distribution, and builds the explicit model
from that AST so both stay consistent.
"""

import csv

from .errors import FormatError
from .prism import (Command, Comparison, GuardOr, LabelDecl, PrismAst,
                    RewardItem, Update, build_explicit)

SUM_TOL = 1e-9


class TabularMdpInput:
    """Raw tabular MDP: transition rows, admission distribution, action
    names, and the survived/died terminal sets."""

    def __init__(self, transitions, initial, action_names, survived, died):
        self.transitions = tuple((int(s), int(a), int(t), float(p))
                                 for s, a, t, p in transitions)
        self.initial = tuple((int(s), float(p)) for s, p in initial)
        self.action_names = {int(a): str(name)
                             for a, name in action_names.items()}
        self.survived = frozenset(int(s) for s in survived)
        self.died = frozenset(int(s) for s in died)
        self._validate()

    def _validate(self):
        sums = {}
        for s, a, t, p in self.transitions:
            if not 0.0 <= p <= 1.0:
                raise FormatError(
                    f"transition ({s},{a},{t}): probability {p!r} "
                    f"outside [0, 1]")
            sums[(s, a)] = sums.get((s, a), 0.0) + p
        for (s, a), total in sorted(sums.items()):
            if abs(total - 1.0) > SUM_TOL:
                raise FormatError(
                    f"state {s}, action {a}: probabilities sum to {total!r}")
        total = sum(p for _, p in self.initial)
        if self.initial and abs(total - 1.0) > SUM_TOL:
            raise FormatError(
                f"initial distribution sums to {total!r}")
        overlap = self.survived & self.died
        if overlap:
            raise FormatError(
                f"states {sorted(overlap)} are both survived and died")


def _read_csv(path, expected_header):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if header != expected_header:
            raise FormatError(
                f"{path}: expected header {','.join(expected_header)!r}, "
                f"got {','.join(header)!r}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(expected_header):
                raise FormatError(
                    f"{path}:{lineno}: expected {len(expected_header)} "
                    f"fields, got {len(row)}")
            rows.append((lineno, row))
    return rows


def load_tabular(transitions_path, initial_path, meta_path):
    """Read the three-file tabular format into a TabularMdpInput."""
    transitions = []
    for lineno, row in _read_csv(transitions_path,
                                 ["state", "action", "next_state", "prob"]):
        try:
            transitions.append((int(row[0]), int(row[1]), int(row[2]),
                                float(row[3])))
        except ValueError as exc:
            raise FormatError(f"{transitions_path}:{lineno}: {exc}") from None
    initial = []
    for lineno, row in _read_csv(initial_path, ["state", "prob"]):
        try:
            initial.append((int(row[0]), float(row[1])))
        except ValueError as exc:
            raise FormatError(f"{initial_path}:{lineno}: {exc}") from None
    action_names = {}
    survived = set()
    died = set()
    for lineno, row in _read_csv(meta_path, ["kind", "id", "name"]):
        kind = row[0].strip()
        try:
            ident = int(row[1])
        except ValueError as exc:
            raise FormatError(f"{meta_path}:{lineno}: {exc}") from None
        if kind == "action":
            if ident in action_names:
                raise FormatError(
                    f"{meta_path}:{lineno}: duplicate action id {ident}")
            action_names[ident] = row[2].strip()
        elif kind == "survived":
            survived.add(ident)
        elif kind == "died":
            died.add(ident)
        else:
            raise FormatError(
                f"{meta_path}:{lineno}: unknown kind {kind!r} "
                f"(expected action, survived, or died)")
    return TabularMdpInput(transitions, initial, action_names,
                           survived, died)


def _or_guard(var, states):
    guard = None
    for s in sorted(states):
        atom = Comparison(var, "=", s)
        guard = atom if guard is None else GuardOr(guard, atom)
    return guard


def convert_tabular(inp, module_name="converted", var_name="s"):
    """Emit (PrismAst, ExplicitMdp) for a tabular input.

    Clinical states keep their ids 0..n-1; the auxiliary initial state is
    id n and reaches the admission distribution through a dedicated
    `admit` action.  Terminal states receive `end` self-loops, the
    survived/died labels, and reward 1 on survival.
    """
    terminals = inp.survived | inp.died
    sources = {s for s, _, _, _ in inp.transitions}
    known = sources | terminals | {s for s, _ in inp.initial}
    if not terminals:
        raise FormatError("meta file declares no terminal states")
    if not inp.initial:
        raise FormatError("initial distribution is empty")
    n = max(known) + 1
    missing = sorted(set(range(n)) - known)
    if missing:
        raise FormatError(f"state ids are not contiguous: missing {missing}")
    for s, a, t, p in inp.transitions:
        if t not in known:
            raise FormatError(f"unknown state {t} (next_state of ({s},{a}))")
        if s in terminals:
            raise FormatError(f"terminal state {s} has outgoing transitions")
    for s, _ in inp.initial:
        if s not in known:
            raise FormatError(f"unknown state {s} in initial distribution")
    deadlocked = sorted(known - sources - terminals)
    if deadlocked:
        raise FormatError(
            f"states {deadlocked} have no transitions and are not terminal")

    by_choice = {}
    for s, a, t, p in inp.transitions:
        by_choice.setdefault((s, a), []).append((t, p))
    commands = []
    for s, a in sorted(by_choice):
        if a not in inp.action_names:
            raise FormatError(f"no name for action id {a}")
        updates = tuple(Update(p, t) for t, p in by_choice[(s, a)])
        commands.append(Command(inp.action_names[a],
                                Comparison(var_name, "=", s), updates))
    aux = n
    commands.append(Command(
        "admit", Comparison(var_name, "=", aux),
        tuple(Update(p, s) for s, p in inp.initial)))
    for s in sorted(terminals):
        commands.append(Command("end", Comparison(var_name, "=", s),
                                (Update(1.0, s),)))

    labels = []
    if inp.survived:
        labels.append(LabelDecl("survived", _or_guard(var_name, inp.survived)))
    if inp.died:
        labels.append(LabelDecl("died", _or_guard(var_name, inp.died)))
    rewards = ()
    if inp.survived:
        rewards = (RewardItem(_or_guard(var_name, inp.survived), 1.0),)

    ast = PrismAst("mdp", module_name, var_name, 0, aux, aux,
                   tuple(commands), tuple(labels), rewards)
    return ast, build_explicit(ast)
