"""Boolean conditions over mode signals, kept in minimal disjunctive normal form."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterable, Mapping

from sympy import symbols
from sympy.logic import SOPform
from sympy.logic.boolalg import And as SAnd, Not as SNot, Or as SOr

Literal = tuple[str, bool]  # (mode name, polarity)


def _absorb(terms: set[frozenset]) -> frozenset:
    # drop contradictory terms and any term that is a superset of another
    terms = {t for t in terms if not any((n, not p) in t for n, p in t)}
    kept = {t for t in terms if not any(o < t for o in terms)}
    return frozenset(kept)


@dataclass(frozen=True)
class ModeCondition:
    """Disjunction of conjunctions of mode literals.

    The empty disjunction is false; a disjunction holding the empty conjunction is true.
    """

    terms: frozenset = frozenset()

    @staticmethod
    def false() -> "ModeCondition":
        return ModeCondition(frozenset())

    @staticmethod
    def true() -> "ModeCondition":
        return ModeCondition(frozenset({frozenset()}))

    @staticmethod
    def literal(name: str, positive: bool = True) -> "ModeCondition":
        return ModeCondition(frozenset({frozenset({(name, positive)})}))

    @staticmethod
    def conj(literals: Iterable[Literal]) -> "ModeCondition":
        return ModeCondition(_absorb({frozenset(literals)}))

    @property
    def is_false(self) -> bool:
        return not self.terms

    @property
    def is_true(self) -> bool:
        return frozenset() in self.terms

    @property
    def modes(self) -> frozenset[str]:
        return frozenset(n for t in self.terms for n, _ in t)

    def __or__(self, other: "ModeCondition") -> "ModeCondition":
        return ModeCondition(_absorb(set(self.terms) | set(other.terms)))

    def __and__(self, other: "ModeCondition") -> "ModeCondition":
        return ModeCondition(_absorb({a | b for a in self.terms for b in other.terms}))

    def __invert__(self) -> "ModeCondition":
        out = ModeCondition.true()
        for t in self.terms:
            out = out & ModeCondition(_absorb({frozenset({(n, not p)}) for n, p in t}))
        return out

    def evaluate(self, mode: Mapping[str, int]) -> bool:
        return any(all(bool(mode[n]) == p for n, p in t) for t in self.terms)

    def substitute(self, mode: Mapping[str, int]) -> "ModeCondition":
        """Fix the modes named in ``mode``, leaving the others symbolic."""
        out = set()
        for t in self.terms:
            rest = set()
            ok = True
            for n, p in t:
                if n in mode:
                    if bool(mode[n]) != p:
                        ok = False
                        break
                else:
                    rest.add((n, p))
            if ok:
                out.add(frozenset(rest))
        return ModeCondition(_absorb(out))

    def minimized(self, universe: Iterable[str] | None = None) -> "ModeCondition":
        names = sorted(set(universe or ()) | self.modes)
        return from_truth_table(names, lambda m: self.evaluate(m))

    def equivalent(self, other: "ModeCondition") -> bool:
        names = sorted(self.modes | other.modes)
        return all(
            self.evaluate(m) == other.evaluate(m)
            for m in (dict(zip(names, bits)) for bits in product((0, 1), repeat=len(names)))
        )

    def render(self) -> str:
        if self.is_false:
            return "0"
        if self.is_true:
            return "1"
        parts = []
        for t in sorted(self.terms, key=lambda t: (len(t), sorted(t))):
            parts.append("*".join(("" if p else "!") + n for n, p in sorted(t)))
        return " | ".join(parts)

    def __str__(self) -> str:
        return self.render()


def from_truth_table(names: list[str], fn) -> ModeCondition:
    """Minimal DNF of ``fn`` over the modes ``names`` (``fn`` takes a dict)."""
    names = list(names)
    minterms = [
        list(bits)
        for bits in product((0, 1), repeat=len(names))
        if fn(dict(zip(names, bits)))
    ]
    if not minterms:
        return ModeCondition.false()
    if len(minterms) == 2 ** len(names):
        return ModeCondition.true()
    syms = symbols(names) if len(names) > 1 else (symbols(names[0]),)
    expr = SOPform(list(syms), minterms)
    terms = set()
    for clause in (expr.args if isinstance(expr, SOr) else (expr,)):
        lits = clause.args if isinstance(clause, SAnd) else (clause,)
        t = set()
        for lit in lits:
            if isinstance(lit, SNot):
                t.add((str(lit.args[0]), False))
            else:
                t.add((str(lit), True))
        terms.add(frozenset(t))
    return ModeCondition(_absorb(terms))


def parse_condition(text: str) -> ModeCondition:
    """Inverse of :meth:`ModeCondition.render`."""
    text = text.strip()
    if text == "0":
        return ModeCondition.false()
    if text == "1":
        return ModeCondition.true()
    out = ModeCondition.false()
    for clause in text.split("|"):
        lits = []
        for lit in clause.strip().split("*"):
            lit = lit.strip()
            lits.append((lit[1:], False) if lit.startswith("!") else (lit, True))
        out = out | ModeCondition.conj(lits)
    return out
