"""Qualitative {-, 0, +} fault reasoning over a mode-instantiated TCG."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .bondgraph import BondGraph
from .fsm import DiagnosabilityRow
from .tcg import Tcg, TcgEdge, instantiate_mode

PLUS, MINUS, ZERO, UNKNOWN = "+", "-", "0", "?"


def negate(q: str) -> str:
    return {PLUS: MINUS, MINUS: PLUS}.get(q, q)


def times(q: str, sign: int) -> str:
    return q if sign > 0 else negate(q)


def _merge(a: str, b: str) -> str:
    if a == b:
        return a
    return UNKNOWN


@dataclass(frozen=True, order=True)
class Hypothesis:
    parameter: str
    direction: str  # "+" or "-"

    def __str__(self):
        return f"{self.parameter}{self.direction}"

    def opposite(self) -> "Hypothesis":
        return Hypothesis(self.parameter, negate(self.direction))


def parse_hypothesis(text: str) -> Hypothesis:
    text = text.strip()
    if len(text) < 2 or text[-1] not in "+-":
        raise ValueError(f"hypothesis must look like R12+ or C1-, got {text!r}")
    return Hypothesis(text[:-1], text[-1])


def default_hypotheses(bg: BondGraph) -> list[Hypothesis]:
    """Capacity loss and resistance increase for every parameterised element, in element order."""
    out = []
    for el in bg.one_ports:
        if el.kind in ("C", "I"):
            out.append(Hypothesis(el.param, MINUS))
        elif el.kind == "R":
            out.append(Hypothesis(el.param, PLUS))
    return out


def _seed_sign(edge: TcgEdge, direction: str) -> str:
    # a larger R on f->e raises e; a larger R (or C) dividing lowers its target
    return direction if edge.gain.kind == "param" else negate(direction)


def forward_propagate(t: Tcg, h: Hypothesis, k_max: int = 1) -> dict[str, str]:
    """Predicted (magnitude, slope, ...) symbols per measured signal, as strings such as ``"0+"``."""
    seeds: dict[str, str] = {}
    for e in t.parameter_edges(h.parameter):
        if e.source in t.zero_nodes or e.target in t.zero_nodes:
            continue
        s = _seed_sign(e, h.direction)
        seeds[e.target] = _merge(seeds[e.target], s) if e.target in seeds else s
    values: list[dict[str, str]] = []
    frontier = seeds
    for _order in range(k_max + 1):
        level = _instantaneous_closure(t, frontier)
        values.append(level)
        nxt: dict[str, str] = {}
        for node, q in level.items():
            for e in t.out_edges(node):
                if not e.temporal:
                    continue
                if e.derivative:
                    # differentiation would lower the order; blocked
                    continue
                s = times(q, e.gain.sign)
                nxt[e.target] = _merge(nxt[e.target], s) if e.target in nxt else s
        frontier = nxt
    sig = {}
    for signal, node in t.measured.items():
        sig[signal] = "".join(level.get(node, ZERO) for level in values)
    return sig


def _instantaneous_closure(t: Tcg, seeds: Mapping[str, str]) -> dict[str, str]:
    """Propagate over non-temporal edges; signs meeting at a node with disagreement become ``?``."""
    values = dict(seeds)
    queue = list(seeds)
    guard = 0
    while queue:
        guard += 1
        if guard > 10_000:
            raise RuntimeError("qualitative propagation did not converge")
        node = queue.pop(0)
        q = values[node]
        for e in t.out_edges(node):
            if e.temporal:
                continue
            s = times(q, e.gain.sign)
            old = values.get(e.target)
            new = s if old is None else _merge(old, s)
            if new != old:
                values[e.target] = new
                queue.append(e.target)
    return values


def back_propagate(t: Tcg, variable: str, q: str) -> set[Hypothesis]:
    """Hypotheses that could explain a deviation ``q`` observed on ``variable``."""
    if q not in (PLUS, MINUS):
        raise ValueError("observed deviation must be '+' or '-'")
    if variable not in t.nodes:
        raise ValueError(f"unknown variable {variable!r}")
    out: set[Hypothesis] = set()
    seen = {(variable, q)}
    stack = [(variable, q)]
    while stack:
        node, s = stack.pop()
        for e in t.in_edges(node):
            if e.derivative:
                continue
            if e.gain.parameter is not None:
                d = s if e.gain.kind == "param" else negate(s)
                out.add(Hypothesis(e.gain.parameter, d))
            prev = (e.source, times(s, e.gain.sign))
            if prev not in seen:
                seen.add(prev)
                stack.append(prev)
    return out


@dataclass(frozen=True)
class QualFsm:
    mode: Mapping[str, int]
    signals: tuple
    rows: Mapping[Hypothesis, tuple]  # one two-symbol signature per signal
    db: Mapping[Hypothesis, int]
    ib: Mapping[Hypothesis, int]


def build_qual_fsm(t: Tcg, mode: Mapping[str, int], hypotheses: Sequence[Hypothesis], k_max: int = 1) -> QualFsm:
    inst = instantiate_mode(t, mode)
    signals = tuple(t.measured)
    rows = {}
    for h in hypotheses:
        sig = forward_propagate(inst, h, k_max)
        rows[h] = tuple(sig[s] for s in signals)
    zero = "0" * (k_max + 1)
    db = {h: int(any(x != zero for x in r)) for h, r in rows.items()}
    ib = {h: int(db[h] and all(r != o for g, o in rows.items() if g != h)) for h, r in rows.items()}
    return QualFsm(dict(mode), signals, rows, db, ib)


def _matches(pred: str, obs: str) -> bool:
    return all(o == UNKNOWN or p == UNKNOWN or o == p for p, o in zip(pred, obs))


def qual_isolate(observed: Mapping[str, str], fsm: QualFsm) -> set[Hypothesis]:
    """Hypotheses whose signatures agree with every determinate observed symbol."""
    unknown = [s for s in observed if s not in fsm.signals]
    if unknown:
        raise ValueError(f"unknown measurements: {', '.join(unknown)}")
    if all(set(v) <= {ZERO} for v in observed.values()):
        return set(fsm.rows)
    out = set()
    for h, row in fsm.rows.items():
        pred = dict(zip(fsm.signals, row))
        if all(_matches(pred[s], v) for s, v in observed.items()):
            out.add(h)
    return out


def summarize_qual(t: Tcg, modes: Sequence[Mapping[str, int]], hypotheses: Sequence[Hypothesis]) -> list[DiagnosabilityRow]:
    tables = [build_qual_fsm(t, m, hypotheses) for m in modes]
    out = []
    for h in hypotheses:
        det = tuple(i for i, f in enumerate(tables, start=1) if f.db[h])
        iso = tuple(i for i, f in enumerate(tables, start=1) if f.ib[h])
        out.append(DiagnosabilityRow(str(h), det, iso, len(modes)))
    return out


def render_qual_fsm(f: QualFsm, fmt: str = "text") -> str:
    header = ["fault", *(f"P({s})" if fmt == "text" else s for s in f.signals), "Db", "Ib"]
    body = [[str(h), *r, str(f.db[h]), str(f.ib[h])] for h, r in f.rows.items()]
    if fmt == "csv":
        return "\n".join(",".join(r) for r in [header, *body]) + "\n"
    widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in [header, *body]) + "\n"
