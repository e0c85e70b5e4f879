"""Global analytical redundancy relations by causal substitution on a DHBG."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .bondgraph import Bond, BondGraph, Element
from .causality import Dhbg
from .symbolic import (
    Expr,
    MaxConst,
    ModeBool,
    Param,
    Product,
    Reciprocal,
    Signal,
    Sum,
    TimeDeriv,
    ZERO,
    render,
    simplify,
)


class DerivationError(ValueError):
    pass


class AlgebraicLoopError(DerivationError):
    pass


class NonDerivativeStorageError(DerivationError):
    pass


@dataclass(frozen=True)
class GarrSet:
    garrs: tuple  # ((name, Expression), ...)
    junction_of: Mapping[str, str]

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.garrs]

    def __getitem__(self, name: str) -> Expr:
        for n, e in self.garrs:
            if n == name:
                return e
        raise KeyError(f"unknown relation {name!r}")

    def __len__(self):
        return len(self.garrs)


def _signed_sum(terms) -> Expr:
    terms = list(terms)
    if not terms:
        return ZERO
    return Sum(tuple(t for _, t in terms), tuple(s for s, _ in terms))


class _Deriver:
    def __init__(self, d: Dhbg):
        self.g: BondGraph = d.graph
        self.ca = d.assignment
        self.memo: dict = {}
        self.active: list = []

    # helpers
    def _sensor(self, jid: str, kind: str):
        for s in self.g.sensors_at(jid):
            if s.kind == kind:
                return s
        return None

    def _mode_factor(self, b: Bond, jkind: str) -> list:
        """Mode booleans of controlled junctions of ``jkind`` at either end of ``b``."""
        out = []
        for end in (b.tail, b.head):
            if self.g.is_junction(end):
                j = self.g.node(end)
                if j.controlled is not None and j.kind == jkind:
                    out.append(ModeBool(j.controlled))
        return out

    def _resolve(self, key, fn):
        if key in self.memo:
            return self.memo[key]
        if key in self.active:
            chain = " -> ".join(f"{k}{i}" for k, i in self.active[self.active.index(key):] + [key])
            raise AlgebraicLoopError(f"algebraic loop, cannot be resolved: {chain}")
        self.active.append(key)
        try:
            val = fn()
        finally:
            self.active.pop()
        self.memo[key] = val
        return val

    # bond variables
    def effort(self, b: Bond) -> Expr:
        return self._resolve(("e", b.id), lambda: self._effort(b))

    def flow(self, b: Bond) -> Expr:
        return self._resolve(("f", b.id), lambda: self._flow(b))

    def _effort(self, b: Bond) -> Expr:
        src = self.ca.effort_source(self.g, b.id)
        node = self.g.node(src)
        if isinstance(node, Element):
            k = node.kind
            if k == "Se":
                return Signal(node.signal)
            if k == "R":
                return Product((Param(node.param), self.flow(b)))
            if k == "I":
                return Product((Param(node.param), self._deriv(self.flow(b), node)))
            if k == "C":
                raise NonDerivativeStorageError(f"storage {node.id!r} is in integral causality")
            raise DerivationError(f"{k} element {node.id!r} cannot impose an effort here")
        factors = self._mode_factor(b, "0")
        if node.kind == "0":
            sensor = self._sensor(src, "De")
            if sensor is not None:
                e = Signal(sensor.signal)
            else:
                det = [x for x in self.g.bonds_at(src) if x.id != b.id
                       and self.ca.effort_receiver(self.g, x.id) == src]
                if len(det) != 1:
                    raise DerivationError(f"junction {src!r} has no unique effort determiner")
                e = self.effort(det[0])
            if b.floor is not None:
                e = MaxConst(e, b.floor)
        else:
            sensor = self._sensor(src, "Df")
            if sensor is not None:
                e = self._invert_for_effort(b, src)
            else:
                # effort balance of a 1-junction, solved for the determining bond
                terms = [(-b.sign_at(src) * c.sign_at(src), self.effort(c))
                         for c in self.g.bonds_at(src) if c.id != b.id]
                e = _signed_sum(terms)
        return Product(tuple(factors) + (e,)) if factors else e

    def _flow(self, b: Bond) -> Expr:
        dst = self.ca.effort_receiver(self.g, b.id)
        node = self.g.node(dst)
        if isinstance(node, Element):
            k = node.kind
            if k == "Sf":
                return Signal(node.signal)
            if k == "R":
                return Product((self.effort(b), Reciprocal(Param(node.param))))
            if k == "Rs":
                return ZERO
            if k == "C":
                return Product((Param(node.param), self._deriv(self.effort(b), node)))
            if k == "I":
                raise NonDerivativeStorageError(f"storage {node.id!r} is in integral causality")
            raise DerivationError(f"{k} element {node.id!r} cannot impose a flow here")
        factors = self._mode_factor(b, "1")
        if node.kind == "1":
            sensor = self._sensor(dst, "Df")
            if sensor is not None:
                f = Signal(sensor.signal)
            else:
                det = [x for x in self.g.bonds_at(dst) if x.id != b.id
                       and self.ca.effort_source(self.g, x.id) == dst]
                if len(det) != 1:
                    raise DerivationError(f"junction {dst!r} has no unique flow determiner")
                f = self.flow(det[0])
        else:
            sensor = self._sensor(dst, "De")
            if sensor is not None:
                f = self._invert_for_flow(b, dst)
            else:
                terms = [(-b.sign_at(dst) * c.sign_at(dst), self.flow(c))
                         for c in self.g.bonds_at(dst) if c.id != b.id]
                f = _signed_sum(terms)
        return Product(tuple(factors) + (f,)) if factors else f

    def _invert_for_flow(self, b: Bond, jid: str) -> Expr:
        # the junction effort is measured, so the element behind b yields the flow
        el = self.g.node(b.other(jid))
        if isinstance(el, Element) and el.kind == "R":
            e = Signal(self._sensor(jid, "De").signal)
            if b.floor is not None:
                e = MaxConst(e, b.floor)
            return Product((e, Reciprocal(Param(el.param))))
        if isinstance(el, Element) and el.kind == "Rs":
            return ZERO
        raise DerivationError(f"cannot resolve the flow of bond {b.id} at sensor junction {jid!r}")

    def _invert_for_effort(self, b: Bond, jid: str) -> Expr:
        el = self.g.node(b.other(jid))
        if isinstance(el, Element) and el.kind == "R":
            return Product((Param(el.param), Signal(self._sensor(jid, "Df").signal)))
        if isinstance(el, Element) and el.kind == "Rs":
            return ZERO
        raise DerivationError(f"cannot resolve the effort of bond {b.id} at sensor junction {jid!r}")

    def _deriv(self, e: Expr, el: Element) -> Expr:
        e = simplify(e)
        try:
            return TimeDeriv(e)
        except ValueError:
            raise NonDerivativeStorageError(
                f"storage {el.id!r} would differentiate an unmeasured quantity {render(e)}"
            ) from None


def generate_garrs(d: Dhbg) -> GarrSet:
    for el, c in sorted(d.storage_causality.items()):
        if c != "derivative":
            raise NonDerivativeStorageError(f"storage {el!r} is in integral causality")
    g = d.graph
    der = _Deriver(d)
    junctions = sorted({s.at for s in g.sensors})
    garrs = []
    junction_of = {}
    for i, jid in enumerate(junctions, start=1):
        j = g.node(jid)
        var = der.flow if j.kind == "0" else der.effort
        terms = [(c.sign_at(jid), var(c)) for c in sorted(g.bonds_at(jid), key=lambda c: c.id)]
        name = f"GARR{i}"
        garrs.append((name, simplify(_signed_sum(terms))))
        junction_of[name] = jid
    return GarrSet(tuple(garrs), junction_of)


def render_garr(g: GarrSet, name: str) -> str:
    return render(g[name])


def render_garrs(g: GarrSet, fmt: str = "text") -> str:
    lines = []
    for name, e in g.garrs:
        if fmt == "machine":
            lines.append(f"{name}\t{g.junction_of[name]}\t{render(e)}")
        else:
            lines.append(f"{name} = {render(e)}")
    return "\n".join(lines) + "\n"
