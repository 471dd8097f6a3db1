"""Frontend for the guarded-command subset: one module, one bounded
integer variable, literal probabilities.

The printer and parser round-trip: parse(pretty_print(ast)) == ast.
Probabilities are printed with repr so their float values survive exactly.
"""

from dataclasses import dataclass, field

from .errors import ModelError, ParseError
from .model import ExplicitDtmc, ExplicitMdp

PROB_SUM_TOL = 1e-9

KEYWORDS = {"mdp", "dtmc", "module", "endmodule", "init", "label",
            "rewards", "endrewards", "true", "false"}

# Reserved words from the full language that this subset rejects by name.
UNSUPPORTED = {"const", "formula", "global", "ctmc", "pta", "pomdp",
               "system", "endsystem", "invariant", "nondeterministic",
               "probabilistic"}


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Comparison:
    var: str
    op: str
    value: int


@dataclass(frozen=True)
class GuardConst:
    value: bool


@dataclass(frozen=True)
class GuardAnd:
    left: object
    right: object


@dataclass(frozen=True)
class GuardOr:
    left: object
    right: object


@dataclass(frozen=True)
class Update:
    prob: float
    value: int


@dataclass(frozen=True)
class Command:
    action: object          # str, or None for an unlabeled command
    guard: object
    updates: tuple
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class LabelDecl:
    name: str
    guard: object
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class RewardItem:
    guard: object
    value: float
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class PrismAst:
    kind: str               # "mdp" or "dtmc"
    module_name: str
    var_name: str
    var_low: int
    var_high: int
    var_init: int
    commands: tuple
    labels: tuple = ()
    rewards: tuple = ()


def eval_guard(guard, value):
    """Truth of a guard at a variable value."""
    if isinstance(guard, GuardConst):
        return guard.value
    if isinstance(guard, GuardAnd):
        return eval_guard(guard.left, value) and eval_guard(guard.right, value)
    if isinstance(guard, GuardOr):
        return eval_guard(guard.left, value) or eval_guard(guard.right, value)
    if isinstance(guard, Comparison):
        op = guard.op
        if op == "=":
            return value == guard.value
        if op == "!=":
            return value != guard.value
        if op == "<":
            return value < guard.value
        if op == "<=":
            return value <= guard.value
        if op == ">":
            return value > guard.value
        if op == ">=":
            return value >= guard.value
    raise ModelError(f"bad guard node {guard!r}")


def _guard_vars(guard, out):
    if isinstance(guard, Comparison):
        out.add(guard.var)
    elif isinstance(guard, (GuardAnd, GuardOr)):
        _guard_vars(guard.left, out)
        _guard_vars(guard.right, out)


def guard_states(guard, lo, hi):
    """Set of variable values in [lo..hi] satisfying the guard.

    Set algebra instead of a per-value scan; equality guards, the common
    case in converted tabular models, resolve in constant time.
    """
    if isinstance(guard, GuardConst):
        return set(range(lo, hi + 1)) if guard.value else set()
    if isinstance(guard, GuardAnd):
        return guard_states(guard.left, lo, hi) & \
            guard_states(guard.right, lo, hi)
    if isinstance(guard, GuardOr):
        return guard_states(guard.left, lo, hi) | \
            guard_states(guard.right, lo, hi)
    if isinstance(guard, Comparison):
        v = guard.value
        if guard.op == "=":
            return {v} if lo <= v <= hi else set()
        if guard.op == "!=":
            return {x for x in range(lo, hi + 1) if x != v}
        if guard.op == "<":
            return set(range(lo, min(v, hi + 1)))
        if guard.op == "<=":
            return set(range(lo, min(v + 1, hi + 1)))
        if guard.op == ">":
            return set(range(max(v + 1, lo), hi + 1))
        if guard.op == ">=":
            return set(range(max(v, lo), hi + 1))
    raise ModelError(f"bad guard node {guard!r}")


# ---------------------------------------------------------------------------
# Lexer


_PUNCT = ("->", "..", "<=", ">=", "!=", "[", "]", "(", ")", ";", ":",
          "'", "+", "<", ">", "=", "&", "|")


class _Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind = kind
        self.text = text
        self.line = line
        self.col = col

    def __repr__(self):
        return f"{self.kind}({self.text!r})@{self.line}:{self.col}"


def _tokenize(text):
    tokens = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c == '"':
            j = i + 1
            while j < n and text[j] != '"':
                if text[j] == "\n":
                    raise ParseError("unterminated string", line, col)
                j += 1
            if j >= n:
                raise ParseError("unterminated string", line, col)
            tokens.append(_Token("STRING", text[i + 1:j], line, col))
            col += j + 1 - i
            i = j + 1
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            is_decimal = False
            # A '..' range operator must not be eaten as a decimal point.
            if j < n and text[j] == "." and not text.startswith("..", j):
                is_decimal = True
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    is_decimal = True
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            kind = "DECIMAL" if is_decimal else "INT"
            tokens.append(_Token(kind, text[i:j], line, col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("IDENT", text[i:j], line, col))
            col += j - i
            i = j
            continue
        for p in _PUNCT:
            if text.startswith(p, i):
                tokens.append(_Token(p, p, line, col))
                col += len(p)
                i += len(p)
                break
        else:
            raise ParseError(f"unexpected character {c!r}", line, col)
    tokens.append(_Token("EOF", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# Parser


class _Parser:

    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        raise ParseError(message, tok.line, tok.col)

    def expect(self, kind, what=None):
        tok = self.peek()
        if tok.kind != kind:
            self.error(f"expected {what or kind}, got {tok.text!r}")
        return self.next()

    def keyword(self, word):
        tok = self.peek()
        if tok.kind != "IDENT" or tok.text != word:
            self.error(f"expected {word!r}, got {tok.text!r}")
        return self.next()

    def check_supported(self, tok):
        if tok.kind == "IDENT" and tok.text in UNSUPPORTED:
            self.error(f"unsupported construct {tok.text!r}", tok)

    # model := ('mdp'|'dtmc') module labels? rewards?
    def parse_model(self):
        tok = self.peek()
        self.check_supported(tok)
        if tok.kind != "IDENT" or tok.text not in ("mdp", "dtmc"):
            self.error(f"expected model kind 'mdp' or 'dtmc', "
                       f"got {tok.text!r}")
        kind = self.next().text
        module_name, var, commands = self.parse_module()
        labels = []
        rewards = []
        while True:
            tok = self.peek()
            if tok.kind == "EOF":
                break
            self.check_supported(tok)
            if tok.kind == "IDENT" and tok.text == "label":
                labels.append(self.parse_label())
            elif tok.kind == "IDENT" and tok.text == "rewards":
                rewards.extend(self.parse_rewards())
            elif tok.kind == "IDENT" and tok.text == "module":
                self.error("unsupported construct: multiple modules", tok)
            else:
                self.error(f"unexpected {tok.text!r} after module", tok)
        var_name, lo, hi, init = var
        ast = PrismAst(kind, module_name, var_name, lo, hi, init,
                       tuple(commands), tuple(labels), tuple(rewards))
        _validate_ast(ast)
        return ast

    def parse_module(self):
        self.check_supported(self.peek())
        self.keyword("module")
        name = self.expect("IDENT", "module name").text
        var = self.parse_vardecl()
        commands = []
        while True:
            tok = self.peek()
            if tok.kind == "IDENT" and tok.text == "endmodule":
                self.next()
                break
            if tok.kind == "[":
                commands.append(self.parse_command(len(commands)))
            elif tok.kind == "IDENT":
                self.check_supported(tok)
                if tok.text == "module":
                    self.error("unsupported construct: multiple modules", tok)
                self.error("unsupported construct: second variable "
                           "declaration" if self.tokens[self.pos + 1].kind
                           == ":" else f"unexpected {tok.text!r} in module",
                           tok)
            elif tok.kind == "EOF":
                self.error("unexpected end of input inside module", tok)
            else:
                self.error(f"unexpected {tok.text!r} in module", tok)
        if not commands:
            self.error("no commands in module body", self.peek())
        return name, var, commands

    # vardecl := IDENT ':' '[' INT '..' INT ']' 'init' INT ';'
    def parse_vardecl(self):
        tok = self.peek()
        self.check_supported(tok)
        name = self.expect("IDENT", "variable name").text
        self.expect(":")
        self.expect("[")
        lo = int(self.expect("INT", "lower bound").text)
        self.expect("..")
        hi = int(self.expect("INT", "upper bound").text)
        self.expect("]")
        self.keyword("init")
        init = int(self.expect("INT", "initial value").text)
        self.expect(";")
        if hi < lo:
            self.error(f"empty range [{lo}..{hi}]", tok)
        if not lo <= init <= hi:
            self.error(f"initial value {init} outside [{lo}..{hi}]", tok)
        return name, lo, hi, init

    # command := '[' IDENT? ']' guard '->' update ('+' update)* ';'
    def parse_command(self, index):
        start = self.expect("[")
        action = None
        if self.peek().kind == "IDENT":
            action = self.next().text
        self.expect("]")
        guard = self.parse_guard()
        self.expect("->")
        updates = [self.parse_update()]
        while self.peek().kind == "+":
            self.next()
            updates.append(self.parse_update())
        self.expect(";")
        total = sum(u.prob for u in updates)
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ParseError(
                f"update probabilities sum to {total!r}",
                start.line, start.col)
        return Command(action, guard, tuple(updates), line=start.line)

    # update := DECIMAL ':' '(' IDENT ''' '=' INT ')'
    def parse_update(self):
        tok = self.peek()
        if tok.kind not in ("DECIMAL", "INT"):
            self.error(f"expected probability literal, got {tok.text!r}")
        prob = float(self.next().text)
        self.expect(":")
        self.expect("(")
        self.expect("IDENT", "variable name")
        self.expect("'")
        self.expect("=")
        value = int(self.expect("INT", "assigned value").text)
        self.expect(")")
        return Update(prob, value)

    # guard := conj ('|' conj)* ; conj := atom ('&' atom)*
    def parse_guard(self):
        left = self.parse_conj()
        while self.peek().kind == "|":
            self.next()
            left = GuardOr(left, self.parse_conj())
        return left

    def parse_conj(self):
        left = self.parse_guard_atom()
        while self.peek().kind == "&":
            self.next()
            left = GuardAnd(left, self.parse_guard_atom())
        return left

    def parse_guard_atom(self):
        tok = self.peek()
        if tok.kind == "(":
            self.next()
            inner = self.parse_guard()
            self.expect(")")
            return inner
        if tok.kind == "IDENT" and tok.text == "true":
            self.next()
            return GuardConst(True)
        if tok.kind == "IDENT" and tok.text == "false":
            self.next()
            return GuardConst(False)
        if tok.kind == "IDENT":
            var = self.next().text
            op_tok = self.peek()
            if op_tok.kind not in ("=", "!=", "<", "<=", ">", ">="):
                self.error(f"expected comparison operator, "
                           f"got {op_tok.text!r}")
            op = self.next().text
            value = int(self.expect("INT", "comparison literal").text)
            return Comparison(var, op, value)
        self.error(f"expected guard, got {tok.text!r}")

    # label := 'label' STRING '=' guard ';'
    def parse_label(self):
        start = self.keyword("label")
        name = self.expect("STRING", "quoted label name").text
        self.expect("=")
        guard = self.parse_guard()
        self.expect(";")
        return LabelDecl(name, guard, line=start.line)

    # rewards := 'rewards' (guard ':' DECIMAL ';')* 'endrewards'
    def parse_rewards(self):
        self.keyword("rewards")
        items = []
        while not (self.peek().kind == "IDENT"
                   and self.peek().text == "endrewards"):
            tok = self.peek()
            if tok.kind == "EOF":
                self.error("unexpected end of input inside rewards", tok)
            guard = self.parse_guard()
            self.expect(":")
            val_tok = self.peek()
            if val_tok.kind not in ("DECIMAL", "INT"):
                self.error(f"expected reward literal, got {val_tok.text!r}")
            value = float(self.next().text)
            self.expect(";")
            items.append(RewardItem(guard, value, line=tok.line))
        self.next()
        return items


def _validate_ast(ast):
    for cmd in ast.commands:
        seen = set()
        _guard_vars(cmd.guard, seen)
        for var in sorted(seen):
            if var != ast.var_name:
                raise ParseError(
                    f"guard references undeclared variable {var!r}",
                    cmd.line, 1)
        for u in cmd.updates:
            if not ast.var_low <= u.value <= ast.var_high:
                raise ParseError(
                    f"update assigns {u.value}, outside "
                    f"[{ast.var_low}..{ast.var_high}]", cmd.line, 1)
            if not 0.0 <= u.prob <= 1.0:
                raise ParseError(
                    f"probability {u.prob!r} outside [0, 1]", cmd.line, 1)
    for decl in ast.labels + ast.rewards:
        seen = set()
        _guard_vars(decl.guard, seen)
        for var in sorted(seen):
            if var != ast.var_name:
                raise ParseError(
                    f"guard references undeclared variable {var!r}",
                    decl.line, 1)


def parse_prism(text):
    return _Parser(text).parse_model()


def load_prism(path):
    with open(path) as fh:
        return parse_prism(fh.read())


# ---------------------------------------------------------------------------
# Printer


def _format_number(x):
    # repr keeps the float exact through a reparse; integers stay short.
    if x == int(x) and abs(x) < 1e15:
        return repr(float(x)) if isinstance(x, float) else str(int(x))
    return repr(x)


def format_guard(guard, _parent=None):
    if isinstance(guard, GuardConst):
        return "true" if guard.value else "false"
    if isinstance(guard, Comparison):
        return f"{guard.var}{guard.op}{guard.value}"
    if isinstance(guard, GuardAnd):
        left = format_guard(guard.left, "&")
        right = format_guard(guard.right, "&")
        if isinstance(guard.left, GuardOr):
            left = f"({left})"
        if isinstance(guard.right, GuardOr):
            right = f"({right})"
        return f"{left} & {right}"
    if isinstance(guard, GuardOr):
        return (f"{format_guard(guard.left, '|')} | "
                f"{format_guard(guard.right, '|')}")
    raise ModelError(f"bad guard node {guard!r}")


def pretty_print(ast):
    lines = [ast.kind, ""]
    lines.append(f"module {ast.module_name}")
    lines.append(f"  {ast.var_name} : [{ast.var_low}..{ast.var_high}] "
                 f"init {ast.var_init};")
    for cmd in ast.commands:
        updates = " + ".join(
            f"{repr(u.prob)}:({ast.var_name}'={u.value})"
            for u in cmd.updates)
        action = cmd.action or ""
        lines.append(f"  [{action}] {format_guard(cmd.guard)} -> {updates};")
    lines.append("endmodule")
    if ast.labels:
        lines.append("")
        for decl in ast.labels:
            lines.append(f'label "{decl.name}" = {format_guard(decl.guard)};')
    if ast.rewards:
        lines.append("")
        lines.append("rewards")
        for item in ast.rewards:
            lines.append(f"  {format_guard(item.guard)} : "
                         f"{_format_number(item.value)};")
        lines.append("endrewards")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Explicit-state construction


def build_explicit(ast):
    """Materialize the AST: one state per variable value in [low..high].

    Commands sharing an action label share one action id, so a label like
    `end` used by many disjoint commands stays a single action.  When two
    same-named commands are enabled at the same state they are distinct
    nondeterministic choices, so the later one gets a derived name.  A
    state with no enabled command is a deadlock and is reported by name.
    """
    lo, hi = ast.var_low, ast.var_high
    n = hi - lo + 1
    enabled = [guard_states(cmd.guard, lo, hi) for cmd in ast.commands]
    names = [cmd.action if cmd.action is not None else f"__cmd{k}"
             for k, cmd in enumerate(ast.commands)]
    taken = set(names)
    covered = {}
    for k, name in enumerate(names):
        cover = covered.get(name)
        if cover is None:
            covered[name] = set(enabled[k])
        elif cover & enabled[k]:
            fresh = f"{name}__cmd{k}"
            while fresh in taken:
                fresh += "_"
            names[k] = fresh
            taken.add(fresh)
            covered[fresh] = set(enabled[k])
        else:
            cover |= enabled[k]
    action_ids = {}
    for name in names:
        if name not in action_ids:
            action_ids[name] = len(action_ids)
    actions = tuple(action_ids)
    transitions = [{} for _ in range(n)]
    for k, cmd in enumerate(ast.commands):
        merged = {}
        for u in cmd.updates:
            # Updates assigning the same target value sum up.
            t = u.value - lo
            merged[t] = merged.get(t, 0.0) + u.prob
        dist = tuple(sorted(merged.items()))
        a = action_ids[names[k]]
        for value in sorted(enabled[k]):
            transitions[value - lo][a] = dist
    deadlocks = [s for s in range(n) if not transitions[s]]
    if deadlocks:
        names = ", ".join(f"{ast.var_name}={s + lo}" for s in deadlocks)
        raise ModelError(f"no enabled command at state(s) {names}")
    if ast.kind == "dtmc":
        for s in range(n):
            if len(transitions[s]) > 1:
                raise ModelError(
                    f"dtmc model is nondeterministic at state "
                    f"{ast.var_name}={s + lo}")
    labels = {}
    for decl in ast.labels:
        members = {v - lo for v in guard_states(decl.guard, lo, hi)}
        labels[decl.name] = labels.get(decl.name, frozenset()) | members
    terminal_reward = {}
    for item in ast.rewards:
        for v in sorted(guard_states(item.guard, lo, hi)):
            terminal_reward[v - lo] = item.value
    return ExplicitMdp(n, ast.var_init - lo, actions, transitions,
                       labels, terminal_reward)


def to_dtmc(m):
    """Collapse a one-action-per-state MDP into an ExplicitDtmc."""
    transitions = []
    for s in range(m.n_states):
        enabled = m.enabled_actions(s)
        if len(enabled) != 1:
            raise ModelError(
                f"state {s} has {len(enabled)} actions, cannot view as a "
                f"Markov chain")
        transitions.append(m.transitions[s][enabled[0]])
    return ExplicitDtmc(m.n_states, m.initial_state, transitions, m.labels)
