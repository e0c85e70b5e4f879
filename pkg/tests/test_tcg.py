from pathlib import Path

import pytest

from hbgfdi.causality import scap_assign
from hbgfdi.tcg import (
    Gain,
    Tcg,
    TcgEdge,
    TcgError,
    build_parametrized_tcg,
    build_raw_tcg,
    export_dot,
    export_edge_list,
    instantiate_mode,
    parse_edge_list,
    parse_gain,
    to_tcm,
)

FIXTURE = Path(__file__).parent / "fixtures" / "tcg_mode00.edges"
TCM_ORDER = ["f_c1", "P_c1", "P_R1", "f_R1", "P_R12", "f_R12", "f_c2", "P_c2",
             "P_R23", "f_R23", "f_c3", "P_c3", "P_R2", "f_R2"]


def _keys(edges):
    return sorted(e.key for e in edges)


@pytest.fixture(scope="module")
def raw(bg):
    return build_raw_tcg(bg, scap_assign(bg, "integral"))


def test_mode00_matches_fixture(raw):
    got = instantiate_mode(raw, {"a1": 0, "a2": 0})
    assert _keys(got.edges) == _keys(parse_edge_list(FIXTURE.read_text()))


def test_fixture_narrative_edges():
    edges = {(e.source, e.target): e for e in parse_edge_list(FIXTURE.read_text())}
    assert str(edges["e3", "f3"].gain) == "1/R1"
    assert str(edges["f1", "f2"].gain) == "+1" and str(edges["f3", "f2"].gain) == "-1"
    assert edges["f2", "e2"].temporal and str(edges["f2", "e2"].gain) == "1/C1"
    assert str(edges["e2", "e1"].gain) == "=" and str(edges["e2", "e3"].gain) == "="


def test_mode_monotone_edge_sets(raw, modes):
    full = set(_keys(instantiate_mode(raw, modes[0]).edges))
    for m in modes[1:]:
        assert set(_keys(instantiate_mode(raw, m).edges)) <= full


def test_reduced_graph(qual):
    t, _ = qual
    assert sorted(t.nodes) == sorted(TCM_ORDER)
    assert len(t.edges) == 19
    assert dict(t.zero_when_off) == {"f_R12": "a1", "f_R23": "a2"}
    assert dict(t.measured) == {"De1": "P_c1", "De2": "P_c2", "De3": "P_c3"}
    conds = {(e.source, e.target): e.condition for e in t.edges if e.condition}
    assert conds == {("P_c1", "P_R12"): "a1", ("P_c2", "P_R12"): "a1",
                     ("P_c2", "P_R23"): "a2", ("P_c3", "P_R23"): "a2"}


def test_tcm_structure(qual):
    t, _ = qual
    m = to_tcm(t, TCM_ORDER)
    cells = [(r, c, m.entries[i][j]) for i, r in enumerate(TCM_ORDER) for j, c in enumerate(TCM_ORDER)
             if m.entries[i][j] != "0"]
    temporal = [(r, c) for r, c, w in cells if "λ^-1" in w]
    assert temporal == [("P_c1", "f_c1"), ("P_c2", "f_c2"), ("P_c3", "f_c3")]
    guarded_rows = {r for r, c, w in cells if "a1" in w or "a2" in w}
    assert guarded_rows == {"P_R12", "P_R23"}
    assert m.entry("P_R12", "P_c2") == "-a1"
    assert m.entry("f_R1", "P_R1") == "1/R1"
    with pytest.raises(TcgError):
        to_tcm(t, TCM_ORDER[:-1])


def test_dot_is_deterministic(bg, qual):
    t, _ = qual
    a = export_dot(instantiate_mode(t, {"a1": 1, "a2": 0}), bg.name)
    b = export_dot(instantiate_mode(build_parametrized_tcg(bg, scap_assign(bg, "integral")), {"a1": 1, "a2": 0}), bg.name)
    assert a == b
    assert '"f_R23" [style=dotted' in a
    assert 'style=dashed' in a and "[a1]" in a


def test_edge_list_round_trip(qual):
    t, _ = qual
    assert _keys(parse_edge_list(export_edge_list(t))) == _keys(t.edges)


@pytest.mark.parametrize("text", ["=", "+1", "-1", "R1", "1/C2", "-R12", "-1/R2"])
def test_gain_round_trip(text):
    assert str(parse_gain(text)) == text


def test_gain_composition():
    assert str(parse_gain("-1").then(parse_gain("-1"))) == "+1"
    assert str(parse_gain("=").then(parse_gain("1/R1"))) == "1/R1"


def test_graph_validation():
    with pytest.raises(TcgError):
        Tcg(("a",), (TcgEdge("a", "b", Gain(1, "unit")),))
    t = Tcg(("a", "b"), (TcgEdge("a", "b", Gain(1, "unit"), condition="m"),))
    with pytest.raises(TcgError, match="m"):
        instantiate_mode(t, {})
