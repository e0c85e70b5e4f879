"""Hybrid bond graph data model, model-file parser and the three-tank benchmark.

Model files are line oriented, ``#`` starts a comment::

    graph three_tank effort=P
    element C c1 param=C1 value=1
    junction 0 0_1
    junction 1 1_c1 mode=a1
    mode a1 guard="De1 >= 0.5 || De2 >= 0.5"
    bond 4 from=0_1 to=1_c1 floor=0.5
    sensor De De1 at=0_1 signal=De1

``floor`` on a bond clamps the effort it carries from below (a pipe inlet at a
given height sees ``max(level, floor)``).
"""
from __future__ import annotations

import shlex
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Iterable, Optional

from .guards import Guard, GuardSyntaxError, guard_signals, parse_guard

ONE_PORT_KINDS = ("Se", "Sf", "C", "I", "R", "Rs")
SENSOR_KINDS = ("De", "Df")
ELEMENT_KINDS = ONE_PORT_KINDS + SENSOR_KINDS
SIGNAL_KINDS = ("Se", "Sf", "De", "Df")
STORAGE_KINDS = ("C", "I")


class ModelError(ValueError):
    """A model file could not be turned into a valid bond graph."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class Element:
    kind: str
    id: str
    param: Optional[str] = None
    value: Optional[float] = None
    signal: Optional[str] = None
    at: Optional[str] = None  # sensor attachment junction

    @property
    def is_sensor(self) -> bool:
        return self.kind in SENSOR_KINDS


@dataclass(frozen=True)
class Junction:
    kind: str  # "0" or "1"
    id: str
    controlled: Optional[str] = None  # mode signal name


@dataclass(frozen=True)
class Bond:
    id: int
    tail: str
    head: str
    floor: Optional[float] = None

    @property
    def effort_var(self) -> str:
        return f"e{self.id}"

    @property
    def flow_var(self) -> str:
        return f"f{self.id}"

    def other(self, node: str) -> str:
        return self.head if node == self.tail else self.tail

    def sign_at(self, node: str) -> int:
        """+1 when power flows into ``node`` along this bond."""
        return 1 if self.head == node else -1


@dataclass(frozen=True)
class ModeSignal:
    name: str
    guard: Optional[Guard] = None  # None means an external flag


@dataclass(frozen=True)
class BondGraph:
    name: str
    elements: tuple[Element, ...] = ()
    junctions: tuple[Junction, ...] = ()
    bonds: tuple[Bond, ...] = ()
    mode_signals: tuple[ModeSignal, ...] = ()
    effort_symbol: str = "e"
    _index: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        nodes = {}
        for el in self.elements:
            nodes.setdefault(el.id, el)
        for j in self.junctions:
            nodes.setdefault(j.id, j)
        incident: dict[str, list[Bond]] = {}
        for b in self.bonds:
            incident.setdefault(b.tail, []).append(b)
            if b.head != b.tail:
                incident.setdefault(b.head, []).append(b)
        object.__setattr__(
            self,
            "_index",
            {
                "nodes": nodes,
                "incident": incident,
                "bonds": {b.id: b for b in self.bonds},
                "modes": {m.name: m for m in self.mode_signals},
            },
        )

    # lookups
    def node(self, node_id: str):
        return self._index["nodes"][node_id]

    def has_node(self, node_id: str) -> bool:
        return node_id in self._index["nodes"]

    def bond(self, bond_id: int) -> Bond:
        return self._index["bonds"][bond_id]

    def bonds_at(self, node_id: str) -> list[Bond]:
        return list(self._index["incident"].get(node_id, ()))

    def mode(self, name: str) -> ModeSignal:
        return self._index["modes"][name]

    def is_junction(self, node_id: str) -> bool:
        return isinstance(self._index["nodes"].get(node_id), Junction)

    @property
    def one_ports(self) -> list[Element]:
        return [e for e in self.elements if not e.is_sensor]

    @property
    def sensors(self) -> list[Element]:
        return [e for e in self.elements if e.is_sensor]

    @property
    def mode_names(self) -> list[str]:
        return [m.name for m in self.mode_signals]

    @property
    def parameters(self) -> dict[str, float]:
        return {e.param: e.value for e in self.elements if e.param is not None}

    def sensors_at(self, junction_id: str) -> list[Element]:
        return [e for e in self.sensors if e.at == junction_id]

    def with_elements(self, elements: Iterable[Element], bonds: Iterable[Bond]) -> "BondGraph":
        return replace(self, elements=tuple(elements), bonds=tuple(bonds))


def validate(bg: BondGraph) -> list[str]:
    """Return one diagnostic per violated invariant (empty when valid)."""
    diags: list[str] = []
    seen_ids: set[str] = set()
    for node in list(bg.elements) + list(bg.junctions):
        if node.id in seen_ids:
            diags.append(f"duplicate node id {node.id!r}")
        seen_ids.add(node.id)
    bond_ids: set[int] = set()
    for b in bg.bonds:
        if b.id in bond_ids:
            diags.append(f"duplicate bond id {b.id}")
        bond_ids.add(b.id)
        for end in (b.tail, b.head):
            if not bg.has_node(end):
                diags.append(f"bond {b.id} references unknown node {end!r}")
            elif isinstance(bg.node(end), Element) and bg.node(end).is_sensor:
                diags.append(f"bond {b.id} attaches to sensor {end!r}; sensors use at=")
    params: set[str] = set()
    for el in bg.elements:
        if el.kind not in ELEMENT_KINDS:
            diags.append(f"element {el.id!r} has unsupported kind {el.kind!r}")
            continue
        if el.param is not None:
            if el.param in params:
                diags.append(f"duplicate parameter name {el.param!r}")
            params.add(el.param)
        if el.kind in SIGNAL_KINDS:
            if el.signal is None:
                diags.append(f"{el.kind} element {el.id!r} needs a signal name")
        elif el.kind != "Rs" and el.param is None:
            diags.append(f"{el.kind} element {el.id!r} needs a parameter name")
        if el.is_sensor:
            if el.at is None or not bg.is_junction(el.at):
                diags.append(f"sensor {el.id!r} must sit at an existing junction")
        else:
            n = len(bg.bonds_at(el.id))
            if n != 1:
                diags.append(f"element {el.id!r} has {n} bonds, expected exactly 1")
    mode_names = {m.name for m in bg.mode_signals}
    sensor_signals = {e.signal for e in bg.sensors}
    for j in bg.junctions:
        if j.kind not in ("0", "1"):
            diags.append(f"junction {j.id!r} has unsupported kind {j.kind!r}")
        n = len(bg.bonds_at(j.id))
        if n < 2:
            diags.append(f"junction {j.id!r} has {n} bond(s), expected at least 2")
        if j.controlled is not None and j.controlled not in mode_names:
            diags.append(f"controlled junction {j.id!r} references unknown mode {j.controlled!r}")
    for m in bg.mode_signals:
        if m.guard is not None:
            for s in sorted(guard_signals(m.guard) - sensor_signals):
                diags.append(f"guard of {m.name!r} references unknown sensor signal {s!r}")
    return diags


# ---------------------------------------------------------------------------
# model file format

_ELEMENT_KEYS = {"param", "value", "signal"}


def _keyvals(parts: list[str], allowed: set[str], lineno: int) -> dict[str, str]:
    out = {}
    for p in parts:
        if "=" not in p:
            raise ModelError(f"expected key=value, got {p!r}", lineno)
        k, v = p.split("=", 1)
        if k not in allowed:
            raise ModelError(f"unknown key {k!r}", lineno)
        if k in out:
            raise ModelError(f"repeated key {k!r}", lineno)
        out[k] = v
    return out


def _float(text: str, lineno: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise ModelError(f"expected a number, got {text!r}", lineno) from None


def parse_annotated(text: str, allow_rs: bool = False) -> tuple[BondGraph, dict[int, str]]:
    """Parse a model file, returning the graph and any ``causality`` lines."""
    name = "model"
    effort_symbol = "e"
    elements: list[Element] = []
    junctions: list[Junction] = []
    bonds: list[Bond] = []
    modes: list[ModeSignal] = []
    causality: dict[int, str] = {}
    ids: dict[str, int] = {}
    bond_ids: dict[int, int] = {}

    def claim(node_id, lineno):
        if node_id in ids:
            raise ModelError(f"duplicate id {node_id!r} (first defined on line {ids[node_id]})", lineno)
        ids[node_id] = lineno

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            parts = shlex.split(line)
        except ValueError as exc:
            raise ModelError(str(exc), lineno) from None
        head, args = parts[0], parts[1:]
        if head == "graph":
            if not args:
                raise ModelError("graph needs a name", lineno)
            name = args[0]
            kv = _keyvals(args[1:], {"effort"}, lineno)
            effort_symbol = kv.get("effort", effort_symbol)
        elif head == "element":
            if len(args) < 2:
                raise ModelError("element needs a kind and an id", lineno)
            kind, el_id = args[0], args[1]
            if kind in ("TF", "GY"):
                raise ModelError(f"{kind} elements are not supported", lineno)
            if kind == "Rs" and not allow_rs:
                raise ModelError("Rs elements are reserved for sensor resistors inserted by the causality step", lineno)
            if kind not in ONE_PORT_KINDS:
                raise ModelError(f"unknown element kind {kind!r}", lineno)
            kv = _keyvals(args[2:], _ELEMENT_KEYS, lineno)
            claim(el_id, lineno)
            elements.append(
                Element(
                    kind,
                    el_id,
                    param=kv.get("param"),
                    value=_float(kv["value"], lineno) if "value" in kv else None,
                    signal=kv.get("signal"),
                )
            )
        elif head == "junction":
            if len(args) < 2 or args[0] not in ("0", "1"):
                raise ModelError("junction needs a kind (0 or 1) and an id", lineno)
            kv = _keyvals(args[2:], {"mode"}, lineno)
            claim(args[1], lineno)
            junctions.append(Junction(args[0], args[1], controlled=kv.get("mode")))
        elif head == "bond":
            if not args:
                raise ModelError("bond needs an id", lineno)
            try:
                bid = int(args[0].lstrip("b"))
            except ValueError:
                raise ModelError(f"bad bond id {args[0]!r}", lineno) from None
            if bid in bond_ids:
                raise ModelError(f"duplicate bond id {bid} (first defined on line {bond_ids[bid]})", lineno)
            bond_ids[bid] = lineno
            kv = _keyvals(args[1:], {"from", "to", "floor"}, lineno)
            if "from" not in kv or "to" not in kv:
                raise ModelError("bond needs from= and to=", lineno)
            bonds.append(
                Bond(bid, kv["from"], kv["to"], floor=_float(kv["floor"], lineno) if "floor" in kv else None)
            )
        elif head == "mode":
            if not args:
                raise ModelError("mode needs a name", lineno)
            kv = _keyvals(args[1:], {"guard"}, lineno)
            guard = None
            if "guard" in kv:
                try:
                    guard = parse_guard(kv["guard"])
                except GuardSyntaxError as exc:
                    raise ModelError(str(exc), lineno) from None
            modes.append(ModeSignal(args[0], guard))
        elif head == "sensor":
            if len(args) < 2 or args[0] not in SENSOR_KINDS:
                raise ModelError("sensor needs a kind (De or Df) and an id", lineno)
            kv = _keyvals(args[2:], {"at", "signal"}, lineno)
            if "at" not in kv:
                raise ModelError("sensor needs at=<junction>", lineno)
            claim(args[1], lineno)
            elements.append(Element(args[0], args[1], signal=kv.get("signal", args[1]), at=kv["at"]))
        elif head == "causality":
            if len(args) != 2 or args[1] not in ("head", "tail"):
                raise ModelError("causality needs a bond id and head|tail", lineno)
            causality[int(args[0])] = args[1]
        else:
            raise ModelError(f"unknown statement {head!r}", lineno)

    # dangling references are reported against the line that made them
    for b in bonds:
        for end in (b.tail, b.head):
            if end not in ids:
                raise ModelError(f"bond {b.id} references unknown node {end!r}", bond_ids[b.id])
    for el in elements:
        if el.at is not None and el.at not in ids:
            raise ModelError(f"sensor {el.id!r} references unknown junction {el.at!r}", ids[el.id])
    mode_names = {m.name for m in modes}
    for j in junctions:
        if j.controlled is not None and j.controlled not in mode_names:
            raise ModelError(f"junction {j.id!r} references undeclared mode {j.controlled!r}", ids[j.id])

    bg = BondGraph(name, tuple(elements), tuple(junctions), tuple(bonds), tuple(modes), effort_symbol)
    diags = validate(bg)
    if diags:
        raise ModelError("; ".join(diags))
    return bg, causality


def parse_model(text: str) -> BondGraph:
    return parse_annotated(text)[0]


def load_model(path) -> BondGraph:
    if str(path) == "builtin:three-tank":
        return builtin_three_tank()
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def render_model(bg: BondGraph, causality: Optional[dict[int, str]] = None) -> str:
    lines = [f"graph {bg.name}" + (f" effort={bg.effort_symbol}" if bg.effort_symbol != "e" else "")]
    for el in bg.one_ports:
        parts = ["element", el.kind, el.id]
        if el.param is not None:
            parts.append(f"param={el.param}")
        if el.value is not None:
            parts.append(f"value={_fmt(el.value)}")
        if el.signal is not None:
            parts.append(f"signal={el.signal}")
        lines.append(" ".join(parts))
    for j in bg.junctions:
        lines.append(f"junction {j.kind} {j.id}" + (f" mode={j.controlled}" if j.controlled else ""))
    for m in bg.mode_signals:
        lines.append(f"mode {m.name}" + (f' guard="{m.guard}"' if m.guard is not None else ""))
    for b in bg.bonds:
        lines.append(f"bond {b.id} from={b.tail} to={b.head}" + (f" floor={_fmt(b.floor)}" if b.floor is not None else ""))
    for s in bg.sensors:
        lines.append(f"sensor {s.kind} {s.id} at={s.at} signal={s.signal}")
    for bid in sorted(causality or {}):
        lines.append(f"causality {bid} {causality[bid]}")
    return "\n".join(lines) + "\n"


def builtin_three_tank() -> BondGraph:
    """Three coupled tanks; valves R12 (inlet height 0.5 m) and R23 (0.7 m)."""
    els = [
        Element("Sf", "Sf1", signal="Qp1"),
        Element("Sf", "Sf2", signal="Qp2"),
        Element("R", "R1", param="R1", value=1.0),
        Element("C", "c1", param="C1", value=1.0),
        Element("R", "R12", param="R12", value=1.0),
        Element("C", "c2", param="C2", value=1.0),
        Element("R", "R23", param="R23", value=1.0),
        Element("C", "c3", param="C3", value=1.0),
        Element("R", "R2", param="R2", value=1.0),
        Element("De", "De1", signal="De1", at="0_1"),
        Element("De", "De2", signal="De2", at="0_2"),
        Element("De", "De3", signal="De3", at="0_3"),
    ]
    juncs = [
        Junction("0", "0_1"),
        Junction("0", "0_2"),
        Junction("0", "0_3"),
        Junction("1", "1_c1", controlled="a1"),
        Junction("1", "1_c2", controlled="a2"),
    ]
    # bond 8 is left for the sensor resistor of the diagnostic graph
    bonds = [
        Bond(1, "Sf1", "0_1"),
        Bond(2, "0_1", "c1"),
        Bond(3, "0_1", "R1"),
        Bond(4, "0_1", "1_c1", floor=0.5),
        Bond(5, "1_c1", "R12"),
        Bond(6, "1_c1", "0_2", floor=0.5),
        Bond(7, "0_2", "c2"),
        Bond(9, "0_2", "1_c2", floor=0.7),
        Bond(10, "1_c2", "R23"),
        Bond(11, "1_c2", "0_3", floor=0.7),
        Bond(12, "0_3", "c3"),
        Bond(13, "0_3", "R2"),
        Bond(14, "Sf2", "0_3"),
    ]
    modes = [
        ModeSignal("a1", parse_guard("De1 >= 0.5 || De2 >= 0.5")),
        ModeSignal("a2", parse_guard("De2 >= 0.7 || De3 >= 0.7")),
    ]
    return BondGraph("three_tank", tuple(els), tuple(juncs), tuple(bonds), tuple(modes), effort_symbol="P")


def three_tank_model_text() -> str:
    return resources.files("hbgfdi").joinpath("models/three_tank.hbg").read_text(encoding="utf-8")
