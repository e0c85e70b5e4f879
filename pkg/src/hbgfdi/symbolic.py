"""Expression trees for analytical redundancy relations.

Trees are immutable and hashable. :func:`simplify` returns a canonical form in
which commutative children are ordered deterministically, so two derivations of
the same relation compare equal with ``==``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping

import numpy as np

from .conditions import ModeCondition


class EvaluationError(ValueError):
    pass


class ExpressionSyntaxError(ValueError):
    pass


def _c(x) -> "Expr":
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float)):
        return Const(float(x))
    raise TypeError(f"cannot use {x!r} in an expression")


class Expr:
    __slots__ = ()

    def __add__(self, o):
        return Sum((self, _c(o)), (1, 1))

    def __radd__(self, o):
        return Sum((_c(o), self), (1, 1))

    def __sub__(self, o):
        return Sum((self, _c(o)), (1, -1))

    def __rsub__(self, o):
        return Sum((_c(o), self), (1, -1))

    def __mul__(self, o):
        return Product((self, _c(o)))

    def __rmul__(self, o):
        return Product((_c(o), self))

    def __truediv__(self, o):
        return Product((self, Reciprocal(_c(o))))

    def __rtruediv__(self, o):
        return Product((_c(o), Reciprocal(self)))

    def __neg__(self):
        return Neg(self)

    def __str__(self):
        return render(self)


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: float


@dataclass(frozen=True)
class Param(Expr):
    name: str


@dataclass(frozen=True)
class ModeBool(Expr):
    name: str


@dataclass(frozen=True)
class Signal(Expr):
    name: str


@dataclass(frozen=True)
class Sum(Expr):
    children: tuple
    signs: tuple

    def __post_init__(self):
        if len(self.children) != len(self.signs) or any(s not in (1, -1) for s in self.signs):
            raise ValueError("Sum needs one sign (+1 or -1) per child")


@dataclass(frozen=True)
class Product(Expr):
    children: tuple


@dataclass(frozen=True)
class Reciprocal(Expr):
    child: Expr


@dataclass(frozen=True)
class TimeDeriv(Expr):
    child: Expr

    def __post_init__(self):
        p, m, _ = free_symbols(self.child)
        if p or m:
            raise ValueError("time derivatives apply to measured signals only")


@dataclass(frozen=True)
class MaxConst(Expr):
    child: Expr
    c: float


@dataclass(frozen=True)
class Sign(Expr):
    child: Expr


@dataclass(frozen=True)
class Abs(Expr):
    child: Expr


@dataclass(frozen=True)
class Neg(Expr):
    child: Expr


ZERO = Const(0.0)
ONE = Const(1.0)


def sum_of(*terms: Expr) -> Expr:
    return Sum(tuple(terms), (1,) * len(terms)) if terms else ZERO


# ---------------------------------------------------------------------------
# structure

@lru_cache(maxsize=None)
def ser(e: Expr) -> str:
    """Stable prefix serialization used as the ordering key."""
    if isinstance(e, Const):
        return f"C({_num(e.value)})"
    if isinstance(e, Param):
        return f"P({e.name})"
    if isinstance(e, ModeBool):
        return f"M({e.name})"
    if isinstance(e, Signal):
        return f"S({e.name})"
    if isinstance(e, Sum):
        return "+(" + ",".join(("" if s > 0 else "-") + ser(c) for c, s in zip(e.children, e.signs)) + ")"
    if isinstance(e, Product):
        return "*(" + ",".join(ser(c) for c in e.children) + ")"
    if isinstance(e, MaxConst):
        return f"X({ser(e.child)},{_num(e.c)})"
    tag = {Reciprocal: "R", TimeDeriv: "D", Sign: "G", Abs: "A", Neg: "N"}[type(e)]
    return f"{tag}({ser(e.child)})"


def _children(e: Expr) -> tuple:
    if isinstance(e, (Sum, Product)):
        return e.children
    if isinstance(e, (Reciprocal, TimeDeriv, MaxConst, Sign, Abs, Neg)):
        return (e.child,)
    return ()


@lru_cache(maxsize=None)
def free_symbols(e: Expr) -> tuple[frozenset, frozenset, frozenset]:
    """(parameter names, mode names, signal names) occurring in ``e``."""
    if isinstance(e, Param):
        return frozenset({e.name}), frozenset(), frozenset()
    if isinstance(e, ModeBool):
        return frozenset(), frozenset({e.name}), frozenset()
    if isinstance(e, Signal):
        return frozenset(), frozenset(), frozenset({e.name})
    p, m, s = frozenset(), frozenset(), frozenset()
    for c in _children(e):
        cp, cm, cs = free_symbols(c)
        p, m, s = p | cp, m | cm, s | cs
    return p, m, s


def guarded_occurrences(e: Expr, p: str) -> ModeCondition:
    """Disjunction of the mode guards under which parameter ``p`` occurs."""
    out = ModeCondition.false()

    def walk(node, guard):
        nonlocal out
        if isinstance(node, Param):
            if node.name == p:
                out = out | ModeCondition.conj((g, True) for g in guard)
            return
        if isinstance(node, Product):
            modes = guard | {c.name for c in node.children if isinstance(c, ModeBool)}
            for c in node.children:
                walk(c, modes)
            return
        for c in _children(node):
            walk(c, guard)

    walk(e, frozenset())
    return out


def substitute_modes(e: Expr, mode: Mapping[str, int]) -> Expr:
    def sub(node):
        if isinstance(node, ModeBool) and node.name in mode:
            return Const(float(mode[node.name]))
        return _rebuild(node, [sub(c) for c in _children(node)])

    return simplify(sub(e))


def _rebuild(node, kids):
    if isinstance(node, Sum):
        return Sum(tuple(kids), node.signs)
    if isinstance(node, Product):
        return Product(tuple(kids))
    if isinstance(node, MaxConst):
        return MaxConst(kids[0], node.c)
    if isinstance(node, (Reciprocal, TimeDeriv, Sign, Abs, Neg)):
        return type(node)(kids[0])
    return node


# ---------------------------------------------------------------------------
# simplification

_RANK = {Const: 0, ModeBool: 1, Param: 2, Reciprocal: 3, Signal: 4, TimeDeriv: 5,
         MaxConst: 6, Sign: 7, Abs: 8, Sum: 9, Product: 10, Neg: 11}


def _params_key(node):
    params = sorted(free_symbols(node)[0])
    return (0, tuple(params)) if params else (1, ())


@lru_cache(maxsize=None)
def simplify(e: Expr) -> Expr:
    if isinstance(e, (Const, Param, ModeBool, Signal)):
        return e
    if isinstance(e, Neg):
        return _mk_sum([(-1, simplify(e.child))])
    if isinstance(e, Sum):
        return _mk_sum([(s, simplify(c)) for c, s in zip(e.children, e.signs)])
    if isinstance(e, Product):
        return _mk_product([simplify(c) for c in e.children])
    if isinstance(e, Reciprocal):
        return _mk_reciprocal(simplify(e.child))
    if isinstance(e, TimeDeriv):
        return _mk_deriv(simplify(e.child))
    if isinstance(e, MaxConst):
        x = simplify(e.child)
        return Const(max(x.value, e.c)) if isinstance(x, Const) else MaxConst(x, e.c)
    if isinstance(e, Sign):
        x = simplify(e.child)
        if isinstance(x, Const):
            return Const(float(np.sign(x.value)))
        sg, x = _orient(x)
        return Sign(x) if sg > 0 else _mk_sum([(-1, Sign(x))])
    if isinstance(e, Abs):
        x = simplify(e.child)
        return Const(abs(x.value)) if isinstance(x, Const) else Abs(_orient(x)[1])
    raise TypeError(f"not an expression: {e!r}")


def _orient(node):
    """``(sign, x)`` with ``node == sign * x`` and the leading term of a sum ``x`` positive."""
    if not isinstance(node, Sum):
        return 1, node
    _, lead_sign = min(zip(node.children, node.signs), key=lambda cs: (_params_key(cs[0]), ser(cs[0])))
    if lead_sign > 0:
        return 1, node
    return -1, _mk_sum([(-sg, c) for c, sg in zip(node.children, node.signs)])


def _split_coef(node):
    if isinstance(node, Product) and isinstance(node.children[0], Const):
        rest = node.children[1:]
        return node.children[0].value, rest[0] if len(rest) == 1 else Product(rest)
    return 1.0, node


def _mk_sum(pairs) -> Expr:
    const = 0.0
    coefs: dict = {}
    work = list(pairs)
    while work:
        s, node = work.pop(0)
        if isinstance(node, Sum):
            work[0:0] = [(s * cs, c) for c, cs in zip(node.children, node.signs)]
            continue
        if isinstance(node, Const):
            const += s * node.value
            continue
        k, term = _split_coef(node)
        coefs[term] = coefs.get(term, 0.0) + s * k
    items = []
    for term, k in coefs.items():
        if k == 0:
            continue
        node = term if abs(k) == 1 else _mk_product([Const(abs(k)), term])
        items.append((1 if k > 0 else -1, node))
    if const != 0:
        items.append((1 if const > 0 else -1, Const(abs(const))))
    if not items:
        return ZERO
    items.sort(key=lambda it: (0 if it[0] > 0 else 1, _params_key(it[1]), ser(it[1])))
    if len(items) == 1 and items[0][0] > 0:
        return items[0][1]
    if len(items) == 1 and isinstance(items[0][1], Const):
        return Const(-items[0][1].value)  # a lone constant is folded, sign included
    return Sum(tuple(n for _, n in items), tuple(s for s, _ in items))


def _mk_product(factors) -> Expr:
    coef = 1.0
    modes: set = set()
    others: list = []
    work = list(factors)
    while work:
        f = work.pop(0)
        if isinstance(f, Product):
            work[0:0] = list(f.children)
        elif isinstance(f, Const):
            coef *= f.value
        elif isinstance(f, ModeBool):
            modes.add(f)
        elif isinstance(f, Sum):
            sg, g = _orient(f)
            coef *= sg
            if isinstance(g, Sum):
                others.append(g)
            else:
                work.insert(0, g)
        else:
            others.append(f)
    if coef == 0:
        return ZERO
    # y * (1/y) -> 1
    changed = True
    while changed:
        changed = False
        for i, f in enumerate(others):
            if isinstance(f, Reciprocal) and f.child in others:
                j = others.index(f.child)
                for idx in sorted((i, j), reverse=True):
                    del others[idx]
                changed = True
                break
    # sign(y) * y -> |y|
    changed = True
    while changed:
        changed = False
        for i, f in enumerate(others):
            if isinstance(f, Sign) and f.child in others:
                j = others.index(f.child)
                for idx in sorted((i, j), reverse=True):
                    del others[idx]
                others.append(Abs(f.child))
                changed = True
                break
    fs = sorted(modes, key=ser) + sorted(others, key=lambda n: (_RANK[type(n)], ser(n)))
    if not fs:
        return Const(coef)
    mag = abs(coef)
    if mag != 1:
        fs.insert(0, Const(mag))
    node = fs[0] if len(fs) == 1 else Product(tuple(fs))
    if isinstance(node, Sum):
        return _mk_sum([(1 if coef > 0 else -1, node)])  # a negated sum is distributed
    return node if coef > 0 else Sum((node,), (-1,))


def _mk_reciprocal(x: Expr) -> Expr:
    if isinstance(x, Const) and x.value != 0:
        return Const(1.0 / x.value)
    if isinstance(x, Reciprocal):
        return x.child
    if isinstance(x, Product):
        return _mk_product([_mk_reciprocal(c) for c in x.children])
    sg, x = _orient(x)
    if sg < 0:
        return _mk_sum([(-1, _mk_reciprocal(x))])
    return Reciprocal(x)


def _mk_deriv(x: Expr) -> Expr:
    if isinstance(x, Const):
        return ZERO
    if isinstance(x, Sum):
        return _mk_sum([(s, _mk_deriv(c)) for c, s in zip(x.children, x.signs)])
    k, rest = _split_coef(x)
    if k != 1:
        return _mk_product([Const(k), _mk_deriv(rest)])
    return TimeDeriv(x)


# ---------------------------------------------------------------------------
# evaluation

@dataclass(frozen=True)
class Valuation:
    params: Mapping[str, float] = field(default_factory=dict)
    modes: Mapping[str, object] = field(default_factory=dict)
    signals: Mapping[str, object] = field(default_factory=dict)
    signal_derivs: Mapping[str, object] = field(default_factory=dict)


def _lookup(table, name, what):
    try:
        return table[name]
    except KeyError:
        raise EvaluationError(f"unresolved {what} {name!r}") from None


def evaluate(e: Expr, v: Valuation):
    """Numeric value of ``e``; works element-wise when ``v`` holds arrays."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Param):
        return _lookup(v.params, e.name, "parameter")
    if isinstance(e, ModeBool):
        return _lookup(v.modes, e.name, "mode")
    if isinstance(e, Signal):
        return _lookup(v.signals, e.name, "signal")
    if isinstance(e, Sum):
        total = 0.0
        for c, s in zip(e.children, e.signs):
            total = total + s * evaluate(c, v)
        return total
    if isinstance(e, Product):
        total = 1.0
        for c in e.children:
            total = total * evaluate(c, v)
        return total
    if isinstance(e, Reciprocal):
        return 1.0 / evaluate(e.child, v)
    if isinstance(e, TimeDeriv):
        return _eval_deriv(e.child, v)
    if isinstance(e, MaxConst):
        return np.maximum(evaluate(e.child, v), e.c)
    if isinstance(e, Sign):
        return np.sign(evaluate(e.child, v))
    if isinstance(e, Abs):
        return np.abs(evaluate(e.child, v))
    if isinstance(e, Neg):
        return -evaluate(e.child, v)
    raise TypeError(f"not an expression: {e!r}")


def _eval_deriv(e: Expr, v: Valuation):
    # d/dt is linear; only signal leaves carry derivative values
    if isinstance(e, Signal):
        return _lookup(v.signal_derivs, e.name, "signal derivative")
    if isinstance(e, Const):
        return 0.0
    if isinstance(e, Sum):
        total = 0.0
        for c, s in zip(e.children, e.signs):
            total = total + s * _eval_deriv(c, v)
        return total
    if isinstance(e, Neg):
        return -_eval_deriv(e.child, v)
    if isinstance(e, Product):
        consts = [c for c in e.children if isinstance(c, Const)]
        rest = [c for c in e.children if not isinstance(c, Const)]
        if len(rest) == 1:
            k = float(np.prod([c.value for c in consts])) if consts else 1.0
            return k * _eval_deriv(rest[0], v)
    raise EvaluationError(f"cannot differentiate {render(e)} numerically")


# ---------------------------------------------------------------------------
# rendering

def _num(v: float) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)


_ATOMIC = (Const, Param, ModeBool, Signal, TimeDeriv, MaxConst, Sign, Abs)


def _atom(e: Expr) -> str:
    text = render(e)
    if isinstance(e, _ATOMIC) or (isinstance(e, Product) and text.startswith("(") and text.endswith(")")
                                  and _balanced(text[1:-1])):
        return text
    return f"({text})"


def _balanced(s: str) -> bool:
    depth = 0
    for ch in s:
        depth += ch == "("
        depth -= ch == ")"
        if depth < 0:
            return False
    return depth == 0


def render(e: Expr) -> str:
    if isinstance(e, Const):
        return _num(e.value)
    if isinstance(e, (Param, ModeBool, Signal)):
        return e.name
    if isinstance(e, Sum):
        out = []
        for i, (c, s) in enumerate(zip(e.children, e.signs)):
            text = f"({render(c)})" if isinstance(c, Sum) else render(c)
            if i == 0:
                out.append(text if s > 0 else f"-{text}")
            else:
                out.append(f" + {text}" if s > 0 else f" - {text}")
        return "".join(out)
    if isinstance(e, Product):
        return _render_product(e.children)
    if isinstance(e, Reciprocal):
        return _render_product((e,))
    if isinstance(e, TimeDeriv):
        return f"d/dt({render(e.child)})"
    if isinstance(e, MaxConst):
        return f"max({render(e.child)},{_num(e.c)})"
    if isinstance(e, Sign):
        return f"sign({render(e.child)})"
    if isinstance(e, Abs):
        return f"abs({render(e.child)})"
    if isinstance(e, Neg):
        return f"-{_atom(e.child)}"
    raise TypeError(f"not an expression: {e!r}")


def _render_product(children) -> str:
    coef = [c for c in children if isinstance(c, (Const, ModeBool, Param))]
    den = [c.child for c in children if isinstance(c, Reciprocal)]
    rest = [c for c in children if not isinstance(c, (Const, ModeBool, Param, Reciprocal))]
    parts = []
    if den:
        num = "*".join(render(c) for c in coef) or "1"
        d = _atom(den[0]) if len(den) == 1 else "(" + "*".join(_atom(c) for c in den) + ")"
        parts.append(f"({num}/{d})")
    else:
        parts.extend(render(c) for c in coef)
    parts.extend(_atom(c) for c in rest)
    return "*".join(parts)


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<deriv>d/dt\s*\()"
    r"|(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/(),]))"
)


def parse_expression(text: str, modes=(), signals=()) -> Expr:
    """Parse the infix syntax produced by :func:`render`.

    Names listed in ``modes`` become mode booleans, those in ``signals`` become
    signals, any other name is a parameter.
    """
    modes, signals = set(modes), set(signals)
    tokens = []
    pos = 0
    stripped = text.rstrip()
    while pos < len(stripped):
        m = _TOKEN.match(stripped, pos)
        if not m or m.end() == pos:
            raise ExpressionSyntaxError(f"unexpected input at {stripped[pos:pos + 10]!r}")
        tokens.append((m.lastgroup, m.group(m.lastgroup)))
        pos = m.end()
    i = 0

    def peek():
        return tokens[i] if i < len(tokens) else (None, None)

    def take(kind=None, value=None):
        nonlocal i
        tok = peek()
        if tok[0] is None or (kind and tok[0] != kind) or (value and tok[1] != value):
            raise ExpressionSyntaxError(f"unexpected token {tok[1]!r} in {text!r}")
        i += 1
        return tok

    def expr():
        kids, signs = [term()], [1]
        while peek() in (("op", "+"), ("op", "-")):
            signs.append(1 if take()[1] == "+" else -1)
            kids.append(term())
        return kids[0] if len(kids) == 1 else Sum(tuple(kids), tuple(signs))

    def term():
        node = unary()
        while peek() in (("op", "*"), ("op", "/")):
            op = take()[1]
            rhs = unary()
            node = Product((node, rhs if op == "*" else Reciprocal(rhs)))
        return node

    def unary():
        if peek() == ("op", "-"):
            take()
            return Neg(unary())
        if peek() == ("op", "+"):
            take()
        return atom()

    def atom():
        kind, val = peek()
        if kind == "deriv":
            take()
            inner = expr()
            take("op", ")")
            return TimeDeriv(inner)
        if kind == "num":
            take()
            return Const(float(val))
        if kind == "name":
            take()
            if peek() == ("op", "("):
                take()
                arg = expr()
                if val == "max":
                    take("op", ",")
                    neg = peek() == ("op", "-")
                    if neg:
                        take()
                    c = float(take("num")[1])
                    take("op", ")")
                    return MaxConst(arg, -c if neg else c)
                take("op", ")")
                if val == "sign":
                    return Sign(arg)
                if val == "abs":
                    return Abs(arg)
                raise ExpressionSyntaxError(f"unknown function {val!r}")
            if val in modes:
                return ModeBool(val)
            if val in signals:
                return Signal(val)
            return Param(val)
        if (kind, val) == ("op", "("):
            take()
            node = expr()
            take("op", ")")
            return node
        raise ExpressionSyntaxError(f"unexpected token {val!r} in {text!r}")

    node = expr()
    if i != len(tokens):
        raise ExpressionSyntaxError(f"trailing input in {text!r}")
    return node


def expression_leaves(e: Expr) -> list[Expr]:
    """All leaf nodes in left-to-right order (used by tests and the TCG)."""
    if not _children(e):
        return [e]
    out = []
    for c in _children(e):
        out.extend(expression_leaves(c))
    return out
