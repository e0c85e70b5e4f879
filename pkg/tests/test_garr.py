import numpy as np
import pytest

from hbgfdi.bondgraph import Bond, BondGraph, Element, Junction
from hbgfdi.causality import derive_dhbg
from hbgfdi.garr import generate_garrs, render_garrs
from hbgfdi.symbolic import Valuation, evaluate, free_symbols

EXPECTED = {
    "GARR1": "Qp1 - C1*d/dt(De1) - (1/R1)*De1 - (a1/R12)*(max(De1,0.5) - max(De2,0.5))",
    "GARR2": "(a1/R12)*(max(De1,0.5) - max(De2,0.5)) - C2*d/dt(De2) - (a2/R23)*(max(De2,0.7) - max(De3,0.7))",
    "GARR3": "(a2/R23)*(max(De2,0.7) - max(De3,0.7)) + Qp2 - C3*d/dt(De3) - (1/R2)*De3",
}


def test_rendered_relations(analysis):
    g = analysis.garrs
    assert g.names == ["GARR1", "GARR2", "GARR3"]
    assert {n: str(e) for n, e in g.garrs} == EXPECTED
    assert g.junction_of == {"GARR1": "0_1", "GARR2": "0_2", "GARR3": "0_3"}


def test_machine_format(analysis):
    lines = render_garrs(analysis.garrs, "machine").splitlines()
    assert lines[0].split("\t") == ["GARR1", "0_1", EXPECTED["GARR1"]]


def test_unknown_name(analysis):
    with pytest.raises(KeyError):
        analysis.garrs["GARR9"]


def test_relations_vanish_on_true_trajectories(analysis, default_run):
    """Evaluated with exact derivatives from the model equations, nominal data gives zero."""
    rng = np.random.default_rng(3)
    n = 500
    h = rng.uniform(0, 1.2, (n, 3))
    a1 = ((h[:, 0] >= 0.5) | (h[:, 1] >= 0.5)).astype(float)
    a2 = ((h[:, 1] >= 0.7) | (h[:, 2] >= 0.7)).astype(float)
    q1, q2 = rng.uniform(0, 2, n), rng.uniform(0, 2, n)
    p = {k: rng.uniform(0.5, 2, n) for k in ["R1", "C1", "R12", "C2", "R23", "C3", "R2"]}
    q12 = a1 / p["R12"] * (np.maximum(h[:, 0], 0.5) - np.maximum(h[:, 1], 0.5))
    q23 = a2 / p["R23"] * (np.maximum(h[:, 1], 0.7) - np.maximum(h[:, 2], 0.7))
    dh = np.stack([(q1 - h[:, 0] / p["R1"] - q12) / p["C1"], (q12 - q23) / p["C2"],
                   (q23 + q2 - h[:, 2] / p["R2"]) / p["C3"]], axis=1)
    v = Valuation(p, {"a1": a1, "a2": a2},
                  {"De1": h[:, 0], "De2": h[:, 1], "De3": h[:, 2], "Qp1": q1, "Qp2": q2},
                  {"De1": dh[:, 0], "De2": dh[:, 1], "De3": dh[:, 2]})
    for _, e in analysis.garrs.garrs:
        assert np.max(np.abs(evaluate(e, v))) < 1e-12


def test_two_tank_chain():
    """A smaller uncontrolled chain yields one relation per sensor junction."""
    els = (Element("Sf", "S", signal="Q"), Element("C", "ca", param="Ca", value=1.0),
           Element("R", "Rab", param="Rab", value=1.0), Element("C", "cb", param="Cb", value=1.0),
           Element("R", "Ro", param="Ro", value=1.0),
           Element("De", "ha", signal="ha", at="A"), Element("De", "hb", signal="hb", at="B"))
    juncs = (Junction("0", "A"), Junction("1", "v"), Junction("0", "B"))
    bonds = (Bond(1, "S", "A"), Bond(2, "A", "ca"), Bond(3, "A", "v"), Bond(4, "v", "Rab"), Bond(5, "v", "B"),
             Bond(6, "B", "cb"), Bond(7, "B", "Ro"))
    g = generate_garrs(derive_dhbg(BondGraph("two", els, juncs, bonds)))
    assert len(g) == 2
    assert str(g["GARR1"]) == "Q - Ca*d/dt(ha) - (1/Rab)*(ha - hb)"
    assert str(g["GARR2"]) == "(1/Rab)*(ha - hb) - Cb*d/dt(hb) - (1/Ro)*hb"
    assert free_symbols(g["GARR2"])[0] == {"Rab", "Cb", "Ro"}
