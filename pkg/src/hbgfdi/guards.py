"""Guard predicates for controlled junctions.

Grammar::

    expr   := conj ('||' conj)*
    conj   := atom ('&&' atom)*
    atom   := '(' expr ')' | NAME OP NUMBER
    OP     := '>=' | '>' | '<=' | '<' | '==' | '!='

Guards evaluate on scalars or on numpy arrays (element-wise), which is how
mode series are recomputed from sampled sensor signals.
"""
from __future__ import annotations

import operator
import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

_OPS = {
    ">=": operator.ge,
    ">": operator.gt,
    "<=": operator.le,
    "<": operator.lt,
    "==": operator.eq,
    "!=": operator.ne,
}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>>=|<=|==|!=|>|<|&&|\|\||\(|\)))"
)


class GuardSyntaxError(ValueError):
    pass


@dataclass(frozen=True)
class Compare:
    signal: str
    op: str
    value: float

    def __str__(self):
        return f"{self.signal} {self.op} {_fmt(self.value)}"


@dataclass(frozen=True)
class And:
    items: tuple

    def __str__(self):
        return " && ".join(_wrap(i, Or) for i in self.items)


@dataclass(frozen=True)
class Or:
    items: tuple

    def __str__(self):
        return " || ".join(str(i) for i in self.items)


Guard = Union[Compare, And, Or]


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def _wrap(node, kind) -> str:
    return f"({node})" if isinstance(node, kind) else str(node)


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise GuardSyntaxError(f"unexpected character {text[pos:].strip()[:1]!r} in guard {text!r}")
        kind = m.lastgroup
        tokens.append((kind, m.group(kind)))
        pos = m.end()
    return tokens


def parse_guard(text: str) -> Guard:
    tokens = _tokenize(text)
    pos = 0

    def peek():
        return tokens[pos] if pos < len(tokens) else (None, None)

    def take(kind=None, value=None):
        nonlocal pos
        tok = peek()
        if tok[0] is None or (kind and tok[0] != kind) or (value and tok[1] != value):
            raise GuardSyntaxError(f"unexpected token {tok[1]!r} in guard {text!r}")
        pos += 1
        return tok

    def expr():
        items = [conj()]
        while peek() == ("op", "||"):
            take()
            items.append(conj())
        return items[0] if len(items) == 1 else Or(tuple(items))

    def conj():
        items = [atom()]
        while peek() == ("op", "&&"):
            take()
            items.append(atom())
        return items[0] if len(items) == 1 else And(tuple(items))

    def atom():
        if peek() == ("op", "("):
            take()
            node = expr()
            take("op", ")")
            return node
        name = take("name")[1]
        op = take("op")[1]
        if op not in _OPS:
            raise GuardSyntaxError(f"expected comparison after {name!r} in guard {text!r}")
        return Compare(name, op, float(take("num")[1]))

    node = expr()
    if pos != len(tokens):
        raise GuardSyntaxError(f"trailing input in guard {text!r}")
    return node


def guard_signals(g: Guard) -> frozenset[str]:
    if isinstance(g, Compare):
        return frozenset({g.signal})
    out = frozenset()
    for item in g.items:
        out |= guard_signals(item)
    return out


def evaluate_guard(g: Guard, signals: Mapping[str, object]):
    """Evaluate to a bool, or to a bool array when the signals are arrays."""
    if isinstance(g, Compare):
        return _OPS[g.op](signals[g.signal], g.value)
    parts = [evaluate_guard(i, signals) for i in g.items]
    if isinstance(g, And):
        return np.logical_and.reduce(parts) if len(parts) > 1 else parts[0]
    return np.logical_or.reduce(parts) if len(parts) > 1 else parts[0]
