"""Temporal causal graphs built from a causally assigned bond graph.

Two views are produced. The raw view has one node per bond variable
(``e3``, ``f3``). The reduced view composes away the variables of
junction-to-junction and source bonds and names the remaining element port
variables by element (``P_c1``, ``f_R12``); it is the one used for qualitative
reasoning.
"""
from __future__ import annotations

import shlex
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

from .bondgraph import BondGraph, Element
from .causality import CausalAssignment


class TcgError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Gain:
    sign: int
    kind: str  # unit | eq | param | recip
    name: Optional[str] = None

    def __str__(self):
        if self.kind == "eq":
            return "="
        if self.kind == "unit":
            return "+1" if self.sign > 0 else "-1"
        body = self.name if self.kind == "param" else f"1/{self.name}"
        return body if self.sign > 0 else f"-{body}"

    def then(self, other: "Gain") -> "Gain":
        """Gain of the path ``self`` followed by ``other``."""
        if self.kind in ("unit", "eq") and other.kind in ("unit", "eq"):
            kind = "eq" if self.kind == other.kind == "eq" else "unit"
            return Gain(self.sign * other.sign, kind)
        if self.kind in ("unit", "eq"):
            return Gain(self.sign * other.sign, other.kind, other.name)
        if other.kind in ("unit", "eq"):
            return Gain(self.sign * other.sign, self.kind, self.name)
        raise TcgError(f"cannot compose parameter gains {self} and {other}")

    @property
    def parameter(self) -> Optional[str]:
        return self.name if self.kind in ("param", "recip") else None


def parse_gain(text: str) -> Gain:
    if text == "=":
        return Gain(1, "eq")
    if text in ("+1", "1", "-1"):
        return Gain(-1 if text == "-1" else 1, "unit")
    sign = -1 if text.startswith("-") else 1
    body = text.lstrip("+-")
    if body.startswith("1/"):
        return Gain(sign, "recip", body[2:])
    return Gain(sign, "param", body)


EQ = Gain(1, "eq")
PLUS = Gain(1, "unit")
MINUS = Gain(-1, "unit")


@dataclass(frozen=True, order=True)
class TcgEdge:
    source: str
    target: str
    gain: Gain
    temporal: bool = False
    condition: Optional[str] = None  # mode signal name, None when unconditional
    derivative: bool = False  # storage in derivative causality

    @property
    def key(self):
        return (self.source, self.target, self.condition)


@dataclass(frozen=True)
class Tcg:
    nodes: tuple
    edges: tuple
    zero_when_off: Mapping[str, str] = field(default_factory=dict)  # node -> mode signal
    measured: Mapping[str, str] = field(default_factory=dict)  # sensor signal -> node
    zero_nodes: frozenset = frozenset()
    mode: Optional[Mapping[str, int]] = None

    def __post_init__(self):
        seen = set()
        for e in self.edges:
            if e.key in seen:
                raise TcgError(f"duplicate edge {e.source} -> {e.target} under {e.condition}")
            seen.add(e.key)
            if e.source not in self.nodes or e.target not in self.nodes:
                raise TcgError(f"edge {e.source} -> {e.target} references an unknown node")

    def out_edges(self, node: str) -> list[TcgEdge]:
        return [e for e in self.edges if e.source == node]

    def in_edges(self, node: str) -> list[TcgEdge]:
        return [e for e in self.edges if e.target == node]

    def parameter_edges(self, param: str) -> list[TcgEdge]:
        return [e for e in self.edges if e.gain.parameter == param]

    @property
    def mode_names(self) -> list[str]:
        return sorted({e.condition for e in self.edges if e.condition} | set(self.zero_when_off.values()))


# ---------------------------------------------------------------------------
# construction

def _raw_edges(bg: BondGraph, ca: CausalAssignment):
    missing = [b.id for b in bg.bonds if b.id not in ca.orientation]
    if missing:
        raise TcgError(f"bonds without causality: {', '.join(map(str, missing))}")
    edges: list[TcgEdge] = []
    zero: dict[str, str] = {}

    def add(*args, **kw):
        edges.append(TcgEdge(*args, **kw))

    for el in bg.one_ports:
        b = bg.bonds_at(el.id)[0]
        e, f = b.effort_var, b.flow_var
        effort_in = ca.effort_receiver(bg, b.id) == el.id
        if el.kind == "R":
            if effort_in:
                add(e, f, Gain(1, "recip", el.param))
            else:
                add(f, e, Gain(1, "param", el.param))
        elif el.kind == "C":
            if effort_in:
                add(e, f, Gain(1, "param", el.param), temporal=True, derivative=True)
            else:
                add(f, e, Gain(1, "recip", el.param), temporal=True)
        elif el.kind == "I":
            if effort_in:
                add(e, f, Gain(1, "recip", el.param), temporal=True)
            else:
                add(f, e, Gain(1, "param", el.param), temporal=True, derivative=True)
        elif el.kind == "Rs":
            raise TcgError("sensor resistors are not part of the temporal causal graph")

    for j in bg.junctions:
        bonds = sorted(bg.bonds_at(j.id), key=lambda b: b.id)
        if j.kind == "0":
            det = [b for b in bonds if ca.effort_receiver(bg, b.id) == j.id]
        else:
            det = [b for b in bonds if ca.effort_source(bg, b.id) == j.id]
        if len(det) != 1:
            raise TcgError(f"junction {j.id!r} is not causally determined")
        d = det[0]
        sd = d.sign_at(j.id)
        for c in bonds:
            if c.id == d.id:
                continue
            balance = Gain(-sd * c.sign_at(j.id), "unit")
            if j.kind == "0":
                add(d.effort_var, c.effort_var, EQ)
                add(c.flow_var, d.flow_var, balance, condition=j.controlled)
            else:
                add(d.flow_var, c.flow_var, EQ)
                add(c.effort_var, d.effort_var, balance, condition=j.controlled)
        if j.controlled is not None:
            for b in bonds:
                zero[b.flow_var if j.kind == "1" else b.effort_var] = j.controlled

    measured = {}
    for s in bg.sensors:
        j = bg.node(s.at)
        bonds = bg.bonds_at(j.id)
        if s.kind == "De":
            if j.kind == "0":
                d = [b for b in bonds if ca.effort_receiver(bg, b.id) == j.id][0]
            else:
                d = [b for b in bonds if ca.effort_source(bg, b.id) == j.id][0]
            measured[s.signal] = d.effort_var
        else:
            if j.kind == "1":
                d = [b for b in bonds if ca.effort_source(bg, b.id) == j.id][0]
            else:
                d = [b for b in bonds if ca.effort_receiver(bg, b.id) == j.id][0]
            measured[s.signal] = d.flow_var
    return edges, zero, measured


def build_raw_tcg(bg: BondGraph, ca: CausalAssignment) -> Tcg:
    edges, zero, measured = _raw_edges(bg, ca)
    nodes = sorted({v for b in bg.bonds for v in (b.effort_var, b.flow_var)}, key=_var_key)
    return Tcg(tuple(nodes), tuple(sorted(edges)), zero, measured)


def _var_key(name: str):
    return (int(name[1:]), name[0]) if name[1:].isdigit() else (10**9, name)


def _eliminate(edges: list[TcgEdge], zero: dict, v: str) -> list[TcgEdge]:
    ins = [e for e in edges if e.target == v]
    outs = [e for e in edges if e.source == v]
    rest = [e for e in edges if e.source != v and e.target != v]
    for a in ins:
        for b in outs:
            if a.source == b.target:
                continue
            conds = {c for c in (a.condition, b.condition) if c}
            zv = zero.get(v)
            if zv and zero.get(a.source) != zv and zero.get(b.target) != zv:
                conds.add(zv)
            if len(conds) > 1:
                raise TcgError(f"path through {v} needs more than one mode condition")
            if a.temporal and b.temporal:
                raise TcgError(f"path through {v} crosses two storages")
            rest.append(
                TcgEdge(a.source, b.target, a.gain.then(b.gain), a.temporal or b.temporal,
                        conds.pop() if conds else None, a.derivative or b.derivative)
            )
    return rest


def build_parametrized_tcg(bg: BondGraph, ca: CausalAssignment, reduced: bool = True) -> Tcg:
    """Mode-parametrized TCG; ``reduced=False`` gives the raw bond-variable view."""
    if not reduced:
        return build_raw_tcg(bg, ca)
    edges, zero, measured = _raw_edges(bg, ca)
    alias: dict[str, str] = {}
    doomed: list[str] = []
    for b in sorted(bg.bonds, key=lambda b: b.id):
        ends = [bg.node(n) for n in (b.tail, b.head)]
        el = next((n for n in ends if isinstance(n, Element)), None)
        if el is None or el.kind in ("Se", "Sf"):
            doomed += [b.effort_var, b.flow_var]
        else:
            alias[b.effort_var] = f"{bg.effort_symbol}_{el.id}"
            alias[b.flow_var] = f"f_{el.id}"
    # measured junction variables must survive; follow equality edges to a port variable
    for sig, var in list(measured.items()):
        if var in doomed:
            raise TcgError(f"measured variable {var} of {sig} is not an element port")
    for v in doomed:
        edges = _eliminate(edges, zero, v)
    renamed = [replace(e, source=alias[e.source], target=alias[e.target]) for e in edges]
    order = []
    for el in bg.one_ports:
        if el.kind in ("Se", "Sf"):
            continue
        b = bg.bonds_at(el.id)[0]
        order.append(alias[b.effort_var])
        order.append(alias[b.flow_var])
    return Tcg(
        tuple(order),
        tuple(sorted(renamed)),
        {alias[k]: m for k, m in zero.items() if k in alias},
        {s: alias[v] for s, v in measured.items()},
    )


def instantiate_mode(t: Tcg, mode: Mapping[str, int]) -> Tcg:
    """Keep edges whose condition holds; variables of OFF junctions become constant zero."""
    missing = [m for m in t.mode_names if m not in mode]
    if missing:
        raise TcgError(f"mode vector does not assign {', '.join(missing)}")
    zero = frozenset(n for n, m in t.zero_when_off.items() if not mode[m])
    keep = tuple(
        e for e in t.edges
        if (e.condition is None or mode[e.condition]) and e.source not in zero and e.target not in zero
    )
    return replace(t, edges=keep, zero_nodes=zero, mode=dict(mode))


# ---------------------------------------------------------------------------
# matrix view and exports

@dataclass(frozen=True)
class Tcm:
    order: tuple
    entries: tuple  # rows are effects, columns are causes; "0" where no edge

    def entry(self, effect: str, cause: str) -> str:
        return self.entries[self.order.index(effect)][self.order.index(cause)]


def edge_weight(e: TcgEdge) -> str:
    g = e.gain
    factors = []
    if e.temporal:
        factors.append("λ^-1")
    if e.condition:
        factors.append(e.condition)
    if g.kind == "param":
        factors.append(g.name)
    num = "*".join(factors)
    if g.kind == "recip":
        num = f"{num or '1'}/{g.name}"
    num = num or "1"
    return num if g.sign > 0 else f"-{num}"


def to_tcm(t: Tcg, order: Sequence[str]) -> Tcm:
    order = tuple(order)
    if sorted(order) != sorted(t.nodes) or len(set(order)) != len(order):
        raise TcgError("variable order must list every node exactly once")
    idx = {v: i for i, v in enumerate(order)}
    cells = [["0"] * len(order) for _ in order]
    for e in sorted(t.edges):
        w = edge_weight(e)
        cur = cells[idx[e.target]][idx[e.source]]
        cells[idx[e.target]][idx[e.source]] = w if cur == "0" else f"{cur} + {w}"
    return Tcm(order, tuple(tuple(r) for r in cells))


def render_tcm(m: Tcm) -> str:
    width = max([len(v) for v in m.order] + [len(c) for r in m.entries for c in r])
    head = " " * width + "  " + "  ".join(v.rjust(width) for v in m.order)
    rows = [v.rjust(width) + "  " + "  ".join(c.rjust(width) for c in r) for v, r in zip(m.order, m.entries)]
    return "\n".join([head, *rows]) + "\n"


def export_dot(t: Tcg, name: str = "tcg") -> str:
    lines = [f'digraph "{name}" {{', "  rankdir=LR;"]
    for n in t.nodes:
        attrs = ' [style=dotted, label="' + n + ' = 0"]' if n in t.zero_nodes else ""
        lines.append(f'  "{n}"{attrs};')
    for e in sorted(t.edges):
        label = str(e.gain) + (f" [{e.condition}]" if e.condition else "")
        attrs = [f'label="{label}"']
        if e.temporal:
            attrs.append("style=dashed")
        lines.append(f'  "{e.source}" -> "{e.target}" [{", ".join(attrs)}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_edge_list(t: Tcg) -> str:
    return "".join(
        f"edge {e.source} {e.target} gain={e.gain} temporal={int(e.temporal)} cond={e.condition or 1}\n"
        for e in sorted(t.edges)
    )


def parse_edge_list(text: str) -> list[TcgEdge]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = shlex.split(line)
        if parts[0] != "edge" or len(parts) != 6:
            raise TcgError(f"line {lineno}: expected 'edge <src> <dst> gain= temporal= cond='")
        kv = dict(p.split("=", 1) for p in parts[3:])
        out.append(TcgEdge(parts[1], parts[2], parse_gain(kv["gain"]), kv["temporal"] == "1",
                           None if kv["cond"] == "1" else kv["cond"]))
    return out
