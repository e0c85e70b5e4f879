import numpy as np
import pytest
from hypothesis import given, strategies as st

from hbgfdi.plantsim import FaultProfile, PlantModel, constant_input, simulate
from hbgfdi.qualitative import (
    Hypothesis,
    back_propagate,
    build_qual_fsm,
    forward_propagate,
    negate,
    parse_hypothesis,
    qual_isolate,
)
from hbgfdi.tcg import Gain, Tcg, TcgEdge, instantiate_mode

MODES = [{"a1": a, "a2": b} for a in (1, 0) for b in (1, 0)]


def _neg_sig(sig):
    return {k: "".join(negate(c) for c in v) for k, v in sig.items()}


def test_spec_examples(qual):
    t, _ = qual
    m11 = instantiate_mode(t, {"a1": 1, "a2": 1})
    assert forward_propagate(m11, Hypothesis("R23", "+")) == {"De1": "00", "De2": "0+", "De3": "0-"}
    sig = forward_propagate(m11, Hypothesis("C1", "-"))
    assert sig["De1"] == "+-" and sig["De2"] == "0+"
    m10 = instantiate_mode(t, {"a1": 1, "a2": 0})
    assert set(forward_propagate(m10, Hypothesis("R23", "+")).values()) == {"00"}


@pytest.mark.parametrize("mode", MODES)
def test_sign_flip_symmetry(qual, mode):
    t, hyps = qual
    inst = instantiate_mode(t, mode)
    for h in hyps:
        assert forward_propagate(inst, h.opposite()) == _neg_sig(forward_propagate(inst, h))


@pytest.mark.parametrize("mode", MODES)
def test_back_forward_consistency(qual, mode):
    t, hyps = qual
    inst = instantiate_mode(t, mode)
    for h in hyps:
        for signal, sym in forward_propagate(inst, h).items():
            for q in sym:
                if q in "+-":
                    assert h in back_propagate(inst, t.measured[signal], q)


def test_mode_monotonicity(qual):
    """Switching a valve off never adds a nonzero symbol."""
    t, hyps = qual
    full = instantiate_mode(t, MODES[0])
    for mode in MODES[1:]:
        part = instantiate_mode(t, mode)
        for h in hyps:
            a, b = forward_propagate(full, h), forward_propagate(part, h)
            for s in a:
                for x, y in zip(a[s], b[s]):
                    assert y == "0" or x != "0"


def test_back_propagation_covers_numeric_oracle(qual):
    """Every deviation that raises h1 in simulation is among the back-propagated hypotheses."""
    t, hyps = qual
    back = back_propagate(instantiate_mode(t, {"a1": 1, "a2": 1}), "P_c1", "+")
    model = PlantModel(h0=(0.9, 0.8, 0.75))
    pumps = constant_input(1.5, 0.5)
    base = simulate(model, pumps, None, 3.0, 0.01)
    raising = set()
    for h in hyps:
        fault = FaultProfile(h.parameter, "abrupt", t0=0.5, value=2.0 if h.direction == "+" else 0.5)
        tr = simulate(model, pumps, fault, 3.0, 0.01)
        assert tr.modes["a1"].all() and tr.modes["a2"].all()
        if np.max(tr.levels[:, 0] - base.levels[:, 0]) > 1e-6:
            raising.add(h)
    assert {Hypothesis("R1", "+"), Hypothesis("C1", "-"), Hypothesis("R12", "+")} <= raising
    assert raising <= back


def test_back_propagation_respects_mode(qual):
    t, _ = qual
    m00 = instantiate_mode(t, {"a1": 0, "a2": 0})
    assert not any(h.parameter == "R23" for h in back_propagate(m00, "P_c1", "+"))
    assert back_propagate(m00, "P_c2", "+") == {Hypothesis("C2", "-")}


def test_back_propagation_on_isolated_node():
    t = Tcg(("x", "y"), (TcgEdge("x", "y", Gain(1, "unit")),))
    assert back_propagate(t, "x", "+") == set()
    with pytest.raises(ValueError):
        back_propagate(t, "x", "0")
    with pytest.raises(ValueError):
        back_propagate(t, "zz", "+")


def test_conflicting_paths_give_unknown():
    # p+ reaches y through two instantaneous paths of opposite sign
    edges = (
        TcgEdge("a", "x", Gain(1, "param", "p")),
        TcgEdge("x", "y", Gain(1, "unit")),
        TcgEdge("x", "z", Gain(1, "unit")),
        TcgEdge("z", "y", Gain(-1, "unit")),
    )
    t = Tcg(("a", "x", "y", "z"), edges, measured={"Y": "y", "X": "x"})
    sig = forward_propagate(t, Hypothesis("p", "+"))
    assert sig == {"Y": "?0", "X": "+0"}


def test_temporal_edge_raises_order():
    edges = (TcgEdge("a", "x", Gain(1, "param", "p")), TcgEdge("x", "y", Gain(-1, "recip", "c"), temporal=True))
    t = Tcg(("a", "x", "y"), edges, measured={"Y": "y"})
    assert forward_propagate(t, Hypothesis("p", "+")) == {"Y": "0-"}
    assert forward_propagate(t, Hypothesis("p", "+"), k_max=2) == {"Y": "0-0"}


def test_isolation(qual):
    t, hyps = qual
    f10 = build_qual_fsm(t, {"a1": 1, "a2": 0}, hyps)
    assert qual_isolate({"De1": "0+", "De2": "0-", "De3": "00"}, f10) == {Hypothesis("R12", "+")}
    f11 = build_qual_fsm(t, {"a1": 1, "a2": 1}, hyps)
    assert qual_isolate({"De1": "0+", "De2": "00", "De3": "00"}, f11) == {Hypothesis("R1", "+")}
    assert qual_isolate({"De1": "00", "De2": "00", "De3": "00"}, f11) == set(hyps)
    assert Hypothesis("R1", "+") in qual_isolate({"De1": "?+"}, f11)
    with pytest.raises(ValueError):
        qual_isolate({"De9": "0+"}, f11)


@given(st.sampled_from(["R1", "C12", "x"]), st.sampled_from("+-"))
def test_hypothesis_text_round_trip(param, d):
    h = parse_hypothesis(f"{param}{d}")
    assert str(h) == f"{param}{d}" and h.opposite().opposite() == h


def test_hypothesis_syntax():
    with pytest.raises(ValueError):
        parse_hypothesis("R1")
