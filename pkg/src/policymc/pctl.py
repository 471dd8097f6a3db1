"""PCTL property parsing: probability queries over eventually/until paths.

Grammar, one property per line in files, `#` comments:

    prop := 'P' ('max'|'min')? ('=?' | op PROB) '[' path ']'
    path := 'F' sf | sf 'U' sf
    sf   := '"' label '"' | '!' sf | sf '&' sf | sf '|' sf | '(' sf ')'
            | 'true' | 'false'
    op   := '<' | '<=' | '>=' | '>'
"""

import re
from dataclasses import dataclass

import numpy as np

from .errors import CheckError, ParseError


# ---------------------------------------------------------------------------
# State formulas


@dataclass(frozen=True)
class Atom:
    label: str


@dataclass(frozen=True)
class NotF:
    inner: object


@dataclass(frozen=True)
class AndF:
    left: object
    right: object


@dataclass(frozen=True)
class OrF:
    left: object
    right: object


@dataclass(frozen=True)
class BoolF:
    value: bool


TRUE = BoolF(True)
FALSE = BoolF(False)


@dataclass(frozen=True)
class Eventually:
    target: object


@dataclass(frozen=True)
class Until:
    left: object
    right: object


@dataclass(frozen=True)
class PctlFormula:
    """direction: None, "max", or "min".  bound: None for a compute query,
    else (op, p) for a threshold query."""
    direction: object
    bound: object
    path: object

    @property
    def kind(self):
        if self.bound is not None:
            return "threshold"
        if self.direction == "max":
            return "compute-max"
        if self.direction == "min":
            return "compute-min"
        return "compute"


def atoms_of(sf):
    """All label names mentioned in a state formula or path formula."""
    if isinstance(sf, Atom):
        return {sf.label}
    if isinstance(sf, NotF):
        return atoms_of(sf.inner)
    if isinstance(sf, (AndF, OrF)):
        return atoms_of(sf.left) | atoms_of(sf.right)
    if isinstance(sf, BoolF):
        return set()
    if isinstance(sf, Eventually):
        return atoms_of(sf.target)
    if isinstance(sf, Until):
        return atoms_of(sf.left) | atoms_of(sf.right)
    if isinstance(sf, PctlFormula):
        return atoms_of(sf.path)
    raise CheckError(f"bad formula node {sf!r}")


def unresolved_labels(formula, labels):
    return sorted(name for name in atoms_of(formula) if name not in labels)


def evaluate_state_formula(sf, labels, n_states):
    """Boolean satisfaction vector of a state formula.

    `labels` maps label name to a set of state ids; a missing name is an
    error (an empty set is not).
    """
    if isinstance(sf, BoolF):
        return np.full(n_states, sf.value, dtype=bool)
    if isinstance(sf, Atom):
        if sf.label not in labels:
            raise CheckError(f"unresolved label {sf.label!r}")
        out = np.zeros(n_states, dtype=bool)
        members = [s for s in labels[sf.label] if 0 <= s < n_states]
        out[members] = True
        return out
    if isinstance(sf, NotF):
        return ~evaluate_state_formula(sf.inner, labels, n_states)
    if isinstance(sf, AndF):
        return (evaluate_state_formula(sf.left, labels, n_states)
                & evaluate_state_formula(sf.right, labels, n_states))
    if isinstance(sf, OrF):
        return (evaluate_state_formula(sf.left, labels, n_states)
                | evaluate_state_formula(sf.right, labels, n_states))
    raise CheckError(f"bad state-formula node {sf!r}")


def path_masks(path, labels, n_states):
    """(phi1, phi2) boolean vectors; Eventually(t) is Until(true, t)."""
    if isinstance(path, Eventually):
        return (np.ones(n_states, dtype=bool),
                evaluate_state_formula(path.target, labels, n_states))
    if isinstance(path, Until):
        return (evaluate_state_formula(path.left, labels, n_states),
                evaluate_state_formula(path.right, labels, n_states))
    raise CheckError(f"bad path-formula node {path!r}")


# ---------------------------------------------------------------------------
# Parser


_TOKEN_RE = re.compile(r"""
    \s*(?P<tok>
        "(?P<str>[^"]*)"
      | =\? | <= | >= | < | >
      | [()\[\]!&|]
      | (?P<num>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
      | (?P<word>[A-Za-z_]\w*)
    )""", re.VERBOSE)


def _tokenize_property(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            rest = text[pos:].lstrip()
            if not rest:
                break
            raise ParseError(f"unexpected character {rest[0]!r}",
                             line=1, column=pos + 1)
        if m.group("str") is not None:
            tokens.append(("STRING", m.group("str"), m.start("tok") + 1))
        elif m.group("num") is not None:
            tokens.append(("NUM", m.group("num"), m.start("tok") + 1))
        elif m.group("word") is not None:
            tokens.append(("WORD", m.group("word"), m.start("tok") + 1))
        else:
            tok = m.group("tok")
            tokens.append((tok, tok, m.start("tok") + 1))
        pos = m.end()
    tokens.append(("EOF", "", len(text) + 1))
    return tokens


class _PropParser:

    def __init__(self, text):
        self.tokens = _tokenize_property(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, message):
        kind, text, col = self.peek()
        raise ParseError(message, line=1, column=col)

    def expect(self, kind, what=None):
        if self.peek()[0] != kind:
            self.error(f"expected {what or kind}, "
                       f"got {self.peek()[1] or 'end of input'!r}")
        return self.next()

    def parse(self):
        kind, word, col = self.peek()
        if kind != "WORD" or word not in ("P", "Pmax", "Pmin"):
            self.error(f"expected P, Pmax, or Pmin, got {word!r}")
        self.next()
        direction = {"P": None, "Pmax": "max", "Pmin": "min"}[word]
        bound = None
        tok = self.peek()
        if tok[0] == "=?":
            self.next()
        elif tok[0] in ("<", "<=", ">=", ">"):
            op = self.next()[0]
            num = self.expect("NUM", "probability literal")
            p = float(num[1])
            if not 0.0 <= p <= 1.0:
                raise ParseError(f"threshold {p!r} out of range [0, 1]",
                                 line=1, column=num[2])
            bound = (op, p)
        else:
            self.error(f"expected '=?' or a comparison, got {tok[1]!r}")
        self.expect("[")
        path = self.parse_path()
        self.expect("]")
        self.expect("EOF", "end of property")
        return PctlFormula(direction, bound, path)

    def parse_path(self):
        tok = self.peek()
        if tok[0] == "WORD" and tok[1] == "F":
            self.next()
            return Eventually(self.parse_sf())
        left = self.parse_sf()
        tok = self.peek()
        if tok[0] == "WORD" and tok[1] == "U":
            self.next()
            return Until(left, self.parse_sf())
        self.error(f"expected 'U', got {tok[1] or 'end of input'!r}")

    # precedence: ! > & > |
    def parse_sf(self):
        left = self.parse_sf_and()
        while self.peek()[0] == "|":
            self.next()
            left = OrF(left, self.parse_sf_and())
        return left

    def parse_sf_and(self):
        left = self.parse_sf_atom()
        while self.peek()[0] == "&":
            self.next()
            left = AndF(left, self.parse_sf_atom())
        return left

    def parse_sf_atom(self):
        kind, text, col = self.peek()
        if kind == "!":
            self.next()
            return NotF(self.parse_sf_atom())
        if kind == "(":
            self.next()
            inner = self.parse_sf()
            self.expect(")")
            return inner
        if kind == "STRING":
            self.next()
            # Quoted true/false mean the constants, not label names.
            if text == "true":
                return TRUE
            if text == "false":
                return FALSE
            return Atom(text)
        if kind == "WORD" and text == "true":
            self.next()
            return TRUE
        if kind == "WORD" and text == "false":
            self.next()
            return FALSE
        self.error(f"expected a state formula, got {text or 'end of input'!r}")


def parse_property(text):
    return _PropParser(text).parse()


def parse_property_file(path):
    """[(line text, formula)] in file order, skipping blanks and comments."""
    out = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                out.append((line, parse_property(line)))
            except ParseError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
    return out


# ---------------------------------------------------------------------------
# Printer


def format_state_formula(sf):
    if isinstance(sf, BoolF):
        return "true" if sf.value else "false"
    if isinstance(sf, Atom):
        return f'"{sf.label}"'
    if isinstance(sf, NotF):
        inner = format_state_formula(sf.inner)
        if isinstance(sf.inner, (AndF, OrF)):
            inner = f"({inner})"
        return f"!{inner}"
    if isinstance(sf, AndF):
        parts = []
        for side in (sf.left, sf.right):
            text = format_state_formula(side)
            parts.append(f"({text})" if isinstance(side, OrF) else text)
        return " & ".join(parts)
    if isinstance(sf, OrF):
        return (f"{format_state_formula(sf.left)} | "
                f"{format_state_formula(sf.right)}")
    raise CheckError(f"bad state-formula node {sf!r}")


def format_property(f):
    head = "P" + (f.direction or "")
    if f.bound is None:
        head += "=?"
    else:
        head += f"{f.bound[0]}{f.bound[1]!r}"
    if isinstance(f.path, Eventually):
        body = f"F {format_state_formula(f.path.target)}"
    else:
        body = (f"{format_state_formula(f.path.left)} U "
                f"{format_state_formula(f.path.right)}")
    return f"{head} [ {body} ]"
