"""Mode-parametrized fault signature matrices."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Mapping, Sequence

from .conditions import ModeCondition, from_truth_table
from .garr import GarrSet
from .symbolic import free_symbols, guarded_occurrences


@dataclass(frozen=True)
class FsmTable:
    garr_names: tuple
    mode_names: tuple
    rows: Mapping[str, tuple]  # parameter -> one ModeCondition per relation
    db: Mapping[str, ModeCondition]
    ib: Mapping[str, ModeCondition]

    @property
    def parameters(self) -> list[str]:
        return list(self.rows)


@dataclass(frozen=True)
class ModeFsm:
    mode: Mapping[str, int]
    matrix: Mapping[str, tuple]  # parameter -> 0/1 per relation
    db: Mapping[str, int]
    ib: Mapping[str, int]


def _instantiate_rows(rows, mode) -> dict[str, tuple]:
    return {p: tuple(int(c.evaluate(mode)) for c in row) for p, row in rows.items()}


def _flags(matrix: Mapping[str, tuple]) -> tuple[dict, dict]:
    db = {p: int(any(r)) for p, r in matrix.items()}
    ib = {}
    for p, r in matrix.items():
        unique = all(r != other for q, other in matrix.items() if q != p)
        ib[p] = int(db[p] and unique)
    return db, ib


def build_symbolic_fsm(g: GarrSet, parameter_order: Sequence[str] | None = None) -> FsmTable:
    """Rows from the guarded occurrences of each parameter; D_b and I_b as mode conditions."""
    params_seen: list[str] = []
    modes: set[str] = set()
    for _, e in g.garrs:
        p, m, _ = free_symbols(e)
        modes |= m
        for name in sorted(p):
            if name not in params_seen:
                params_seen.append(name)
    if parameter_order is not None:
        # parameters absent from every relation stay as all-zero (undetectable) rows
        order = list(dict.fromkeys(parameter_order))
        order += [p for p in params_seen if p not in order]
    else:
        order = params_seen
    mode_names = tuple(sorted(modes))
    rows = {p: tuple(guarded_occurrences(e, p) for _, e in g.garrs) for p in order}
    db = {}
    for p, row in rows.items():
        acc = ModeCondition.false()
        for c in row:
            acc = acc | c
        db[p] = acc.minimized(mode_names) if mode_names else acc

    def ib_fn(p):
        return lambda mode: bool(_flags(_instantiate_rows(rows, mode))[1][p])

    ib = {p: from_truth_table(list(mode_names), ib_fn(p)) for p in order}
    return FsmTable(tuple(g.names), mode_names, rows, db, ib)


def instantiate_mode_fsm(f: FsmTable, mode: Mapping[str, int]) -> ModeFsm:
    missing = [m for m in f.mode_names if m not in mode]
    if missing:
        raise ValueError(f"mode vector does not assign {', '.join(missing)}")
    matrix = _instantiate_rows(f.rows, mode)
    db, ib = _flags(matrix)
    return ModeFsm(dict(mode), matrix, db, ib)


def standard_modes(mode_names: Sequence[str]) -> list[dict[str, int]]:
    """Modes numbered from all-on downwards: (1,1), (1,0), (0,1), (0,0) for two signals."""
    return [dict(zip(mode_names, bits)) for bits in product((1, 0), repeat=len(mode_names))]


def _mode_list_label(indices: list[int], total: int) -> str:
    if len(indices) == total:
        return "all-mode"
    if not indices:
        return "Nil"
    return "Mode " + ", ".join(map(str, indices))


@dataclass(frozen=True)
class DiagnosabilityRow:
    parameter: str
    detectable: tuple  # 1-based mode numbers
    isolable: tuple
    n_modes: int

    @property
    def detectable_label(self) -> str:
        return _mode_list_label(list(self.detectable), self.n_modes)

    @property
    def isolable_label(self) -> str:
        return _mode_list_label(list(self.isolable), self.n_modes)


def summarize_diagnosability(f: FsmTable, modes: Sequence[Mapping[str, int]]) -> list[DiagnosabilityRow]:
    inst = [instantiate_mode_fsm(f, m) for m in modes]
    out = []
    for p in f.parameters:
        det = tuple(i for i, mf in enumerate(inst, start=1) if mf.db[p])
        iso = tuple(i for i, mf in enumerate(inst, start=1) if mf.ib[p])
        out.append(DiagnosabilityRow(p, det, iso, len(modes)))
    return out


# ---------------------------------------------------------------------------
# text / csv rendering

def _align(rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows) + "\n"


def render_fsm(f: FsmTable, fmt: str = "text") -> str:
    header = ["param", *f.garr_names, "Db", "Ib"]
    body = [[p, *(c.render() for c in f.rows[p]), f.db[p].render(), f.ib[p].render()] for p in f.parameters]
    if fmt == "csv":
        return "\n".join(",".join(r) for r in [header, *body]) + "\n"
    return _align([header, *body])


def render_mode_fsm(mf: ModeFsm, garr_names: Sequence[str], fmt: str = "text") -> str:
    header = ["param", *garr_names, "Db", "Ib"]
    body = [[p, *map(str, r), str(mf.db[p]), str(mf.ib[p])] for p, r in mf.matrix.items()]
    if fmt == "csv":
        return "\n".join(",".join(r) for r in [header, *body]) + "\n"
    return _align([header, *body])


def render_summary(rows: Sequence[DiagnosabilityRow], fmt: str = "text") -> str:
    header = ["param", "detectable", "isolable"]
    body = [[r.parameter, r.detectable_label, r.isolable_label] for r in rows]
    if fmt == "csv":
        return "\n".join(",".join(f'"{c}"' if "," in c else c for c in r) for r in [header, *body]) + "\n"
    return _align([header, *body])
