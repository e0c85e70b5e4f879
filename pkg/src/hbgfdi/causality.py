"""Sequential causality assignment and the diagnostic hybrid bond graph.

An orientation records, per bond, which end receives the effort. A 0-junction
has exactly one incident bond carrying effort into it (its determiner); a
1-junction has exactly one incident bond carrying effort out of it (the bond
whose flow determines the junction).
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Mapping

from .bondgraph import Bond, BondGraph, Element, Junction

PROVENANCES = (
    "source-fixed",
    "storage-preferred",
    "controlled-junction-preferred",
    "junction-propagated",
    "indifferent",
)


class CausalityError(ValueError):
    pass


class CausalConflict(CausalityError):
    def __init__(self, junction: str, bonds):
        self.junction = junction
        self.bonds = tuple(sorted(bonds))
        super().__init__(
            f"causal conflict at junction {junction!r}: bonds {', '.join(map(str, self.bonds))}"
        )


@dataclass(frozen=True)
class CausalAssignment:
    orientation: Mapping[int, str]  # bond id -> "head" | "tail" (end receiving effort)
    provenance: Mapping[int, str]

    def effort_receiver(self, bg: BondGraph, bond_id: int) -> str:
        b = bg.bond(bond_id)
        return b.head if self.orientation[bond_id] == "head" else b.tail

    def effort_source(self, bg: BondGraph, bond_id: int) -> str:
        b = bg.bond(bond_id)
        return b.tail if self.orientation[bond_id] == "head" else b.head

    def determiner(self, bg: BondGraph, junction_id: str) -> list[int]:
        """Bonds that determine the junction's common variable."""
        j = bg.node(junction_id)
        out = []
        for b in bg.bonds_at(junction_id):
            into = self.effort_receiver(bg, b.id) == junction_id
            if (j.kind == "0") == into:
                out.append(b.id)
        return out


def _is_determiner(kind: str, receiver_is_junction: bool) -> bool:
    return receiver_is_junction if kind == "0" else not receiver_is_junction


class _Assigner:
    def __init__(self, bg: BondGraph):
        self.bg = bg
        self.recv: dict[int, str] = {}
        self.prov: dict[int, str] = {}
        self.phase_prov = "junction-propagated"

    def assign(self, bond: Bond, receiver: str, prov: str):
        if bond.id in self.recv:
            if prov == "source-fixed" and self.recv[bond.id] != receiver:
                # a source cannot bend; report at the junction that forced it
                jid = bond.other(receiver) if self.bg.is_junction(bond.other(receiver)) else receiver
                raise CausalConflict(jid, [b.id for b in self.bg.bonds_at(jid) if b.id in self.recv])
            return
        self.recv[bond.id] = receiver
        self.prov[bond.id] = prov
        self._propagate([bond.head, bond.tail])

    def _propagate(self, nodes):
        queue = [n for n in nodes if self.bg.is_junction(n)]
        while queue:
            jid = queue.pop(0)
            j = self.bg.node(jid)
            bonds = sorted(self.bg.bonds_at(jid), key=lambda b: b.id)
            dets = [b.id for b in bonds if b.id in self.recv and _is_determiner(j.kind, self.recv[b.id] == jid)]
            free = [b for b in bonds if b.id not in self.recv]
            if len(dets) > 1:
                raise CausalConflict(jid, dets)
            forced = []
            if dets:
                # every other bond takes the non-determining orientation
                for b in free:
                    forced.append((b, b.other(jid) if j.kind == "0" else jid))
            elif len(free) == 1:
                b = free[0]
                forced.append((b, jid if j.kind == "0" else b.other(jid)))
            elif not free:
                raise CausalConflict(jid, [b.id for b in bonds])
            for b, receiver in forced:
                self.recv[b.id] = receiver
                self.prov[b.id] = self.phase_prov
                other = b.other(jid)
                if self.bg.is_junction(other):
                    queue.append(other)


def scap_assign(bg: BondGraph, pref: str = "integral") -> CausalAssignment:
    """Sequential causality assignment with the given storage preference."""
    if pref not in ("integral", "derivative"):
        raise ValueError("pref must be 'integral' or 'derivative'")
    a = _Assigner(bg)

    def attached(el: Element) -> Bond:
        return bg.bonds_at(el.id)[0]

    # controlled junctions: the switched element takes the junction variable as input
    for j in bg.junctions:
        if j.controlled is None:
            continue
        cands = sorted(
            (b for b in bg.bonds_at(j.id)
             if isinstance(bg.node(b.other(j.id)), Element) and bg.node(b.other(j.id)).kind in ("R", "Rs")),
            key=lambda b: b.id,
        )
        if cands:
            b = cands[0]
            a.assign(b, j.id if j.kind == "0" else b.other(j.id), "controlled-junction-preferred")

    for el in bg.one_ports:
        if el.kind == "Se":
            b = attached(el)
            a.assign(b, b.other(el.id), "source-fixed")
        elif el.kind == "Sf":
            a.assign(attached(el), el.id, "source-fixed")

    storages = sorted((el for el in bg.one_ports if el.kind in ("C", "I")), key=lambda el: attached(el).id)
    for el in storages:
        b = attached(el)
        # integral C and derivative I both impose effort on the junction
        imposes_effort = (el.kind == "C") == (pref == "integral")
        a.assign(b, b.other(el.id) if imposes_effort else el.id, "storage-preferred")

    a.phase_prov = "indifferent"
    resistors = sorted((el for el in bg.one_ports if el.kind in ("R", "Rs")), key=lambda el: attached(el).id)
    for el in resistors:
        b = attached(el)
        if b.id in a.recv:
            continue
        jid = b.other(el.id)
        node = bg.node(jid)
        if not isinstance(node, Junction):
            a.assign(b, el.id, "indifferent")
            continue
        has_det = any(
            x.id in a.recv and _is_determiner(node.kind, a.recv[x.id] == jid) for x in bg.bonds_at(jid)
        )
        # become the determiner when the junction still lacks one
        want_det = not has_det
        into_junction = want_det if node.kind == "0" else not want_det
        a.assign(b, jid if into_junction else el.id, "indifferent")

    # junction-junction bonds still open: orient effort into the head, then propagate
    for b in sorted(bg.bonds, key=lambda b: b.id):
        if b.id not in a.recv:
            a.assign(b, b.head, "indifferent")

    orientation = {}
    for b in bg.bonds:
        orientation[b.id] = "head" if a.recv[b.id] == b.head else "tail"
    ca = CausalAssignment(orientation, dict(a.prov))
    check_assignment(bg, ca)
    return ca


def check_assignment(bg: BondGraph, ca: CausalAssignment, skip_bonds=frozenset()) -> None:
    """Raise CausalConflict unless every junction has exactly one determiner."""
    for j in bg.junctions:
        bonds = [b for b in bg.bonds_at(j.id) if b.id not in skip_bonds]
        if not bonds:
            continue
        dets = [b.id for b in bonds if _is_determiner(j.kind, ca.effort_receiver(bg, b.id) == j.id)]
        if len(dets) != 1:
            raise CausalConflict(j.id, dets or [b.id for b in bonds])
    for el in bg.one_ports:
        for b in bg.bonds_at(el.id):
            recv = ca.effort_receiver(bg, b.id)
            if el.kind == "Se" and recv == el.id:
                raise CausalConflict(el.id, [b.id])
            if el.kind == "Sf" and recv != el.id:
                raise CausalConflict(el.id, [b.id])


def storage_causality(bg: BondGraph, ca: CausalAssignment) -> dict[str, str]:
    out = {}
    for el in bg.one_ports:
        if el.kind not in ("C", "I"):
            continue
        b = bg.bonds_at(el.id)[0]
        effort_in = ca.effort_receiver(bg, b.id) == el.id
        out[el.id] = "derivative" if effort_in == (el.kind == "C") else "integral"
    return out


def mode_vectors(names) -> list[dict[str, int]]:
    return [dict(zip(names, bits)) for bits in product((1, 0), repeat=len(names))]


def check_mode_invariance(bg: BondGraph, ca: CausalAssignment) -> None:
    """Check the assignment stays valid when any subset of controlled junctions is off.

    An OFF junction forces its common variable to zero, which removes its bonds
    from the neighbouring junction balances.
    """
    for mode in mode_vectors(bg.mode_names):
        off = {j.id for j in bg.junctions if j.controlled is not None and not mode[j.controlled]}
        skip = frozenset(b.id for jid in off for b in bg.bonds_at(jid))
        sub = BondGraph(
            bg.name,
            bg.elements,
            tuple(j for j in bg.junctions if j.id not in off),
            bg.bonds,
            bg.mode_signals,
            bg.effort_symbol,
        )
        try:
            check_assignment(sub, ca, skip_bonds=skip)
        except CausalConflict as exc:
            raise CausalityError(f"assignment not valid in mode {mode}: {exc}") from None


@dataclass(frozen=True)
class Dhbg:
    graph: BondGraph
    assignment: CausalAssignment
    retained_rs: frozenset
    storage_causality: Mapping[str, str]


def insert_sensor_resistors(bg: BondGraph) -> BondGraph:
    """Attach one Rs element to every junction carrying a sensor."""
    next_id = max((b.id for b in bg.bonds), default=0) + 1
    elements = list(bg.one_ports)
    bonds = list(bg.bonds)
    seen = []
    for s in bg.sensors:
        if s.at not in seen:
            seen.append(s.at)
    for jid in seen:
        rs_id = f"Rs_{jid}"
        elements.append(Element("Rs", rs_id))
        bonds.append(Bond(next_id, jid, rs_id))
        next_id += 1
    return bg.with_elements(elements + list(bg.sensors), bonds)


def derive_dhbg(bg: BondGraph) -> Dhbg:
    """Insert sensor resistors, assign derivative causality, drop those not determining their junction."""
    if not bg.sensors:
        raise CausalityError("the graph has no sensors; nothing to diagnose")
    g1 = insert_sensor_resistors(bg)
    ca1 = scap_assign(g1, "derivative")
    dropped = set()
    retained = set()
    for el in g1.one_ports:
        if el.kind != "Rs":
            continue
        b = g1.bonds_at(el.id)[0]
        # an Rs that is its junction's determiner cannot go without breaking the junction
        needed = b.id in ca1.determiner(g1, b.other(el.id))
        (retained if needed else dropped).add(el.id)
    drop_bonds = {g1.bonds_at(rid)[0].id for rid in dropped}
    g2 = g1.with_elements(
        [e for e in g1.elements if e.id not in dropped],
        [b for b in g1.bonds if b.id not in drop_bonds],
    )
    ca2 = CausalAssignment(
        {k: v for k, v in ca1.orientation.items() if k not in drop_bonds},
        {k: v for k, v in ca1.provenance.items() if k not in drop_bonds},
    )
    check_assignment(g2, ca2)
    check_mode_invariance(g2, ca2)
    return Dhbg(g2, ca2, frozenset(retained), storage_causality(g2, ca2))


def render_dhbg(d: Dhbg) -> str:
    from .bondgraph import render_model

    return render_model(d.graph, dict(d.assignment.orientation))


# ---------------------------------------------------------------------------
# exhaustive reference used by the test-suite

def enumerate_assignments(bg: BondGraph, pref: str | None = None) -> list[dict[int, str]]:
    """All junction-consistent orientations honouring source causality.

    With ``pref`` set, storages are additionally held to that causality.
    """
    bonds = sorted(bg.bonds, key=lambda b: b.id)
    out = []
    for bits in product(("head", "tail"), repeat=len(bonds)):
        orient = {b.id: o for b, o in zip(bonds, bits)}
        ca = CausalAssignment(orient, {})
        try:
            check_assignment(bg, ca)
        except CausalConflict:
            continue
        if pref is not None and any(v != pref for v in storage_causality(bg, ca).values()):
            continue
        out.append(orient)
    return out
