import numpy as np
import pytest

from hbgfdi.bondgraph import (
    ModelError,
    builtin_three_tank,
    load_model,
    parse_annotated,
    parse_model,
    render_model,
    three_tank_model_text,
    validate,
)
from hbgfdi.guards import GuardSyntaxError, evaluate_guard, guard_signals, parse_guard


def test_shipped_file_matches_builtin():
    assert parse_model(three_tank_model_text()) == builtin_three_tank()
    assert load_model("builtin:three-tank") == builtin_three_tank()


def test_render_round_trip(bg):
    assert parse_model(render_model(bg)) == bg


def test_builtin_is_valid(bg):
    assert validate(bg) == []
    assert [e.id for e in bg.sensors] == ["De1", "De2", "De3"]
    assert bg.mode_names == ["a1", "a2"]
    assert bg.parameters == {p: 1.0 for p in ["R1", "C1", "R12", "C2", "R23", "C3", "R2"]}


@pytest.mark.parametrize(
    "text, fragment, line",
    [
        ("junction 0 j\nbond 1 from=j to=ghost\n", "unknown node 'ghost'", 2),
        ("junction 0 j\njunction 1 j\n", "duplicate id 'j'", 2),
        ("element TF t param=m\n", "not supported", 1),
        ("element Rs r\n", "reserved", 1),
        ("frobnicate\n", "unknown statement", 1),
        ("junction 1 j mode=a9\nelement R r param=R\nelement C c param=C\nbond 1 from=j to=r\nbond 2 from=j to=c\n",
         "undeclared mode", 1),
    ],
)
def test_parse_errors_carry_line_numbers(text, fragment, line):
    with pytest.raises(ModelError) as exc:
        parse_model(text)
    assert fragment in str(exc.value)
    assert exc.value.line == line


def test_validate_flags_dangling_element():
    text = "junction 0 j\nelement R r param=R\nelement C c param=C\nelement C lone param=C9\nbond 1 from=j to=r\nbond 2 from=j to=c\n"
    with pytest.raises(ModelError, match="lone"):
        parse_model(text)


def test_causality_annotations_parse(bg):
    text = render_model(bg, {1: "head", 2: "tail"})
    g, ca = parse_annotated(text)
    assert g == bg and ca == {1: "head", 2: "tail"}


def test_guards_scalar_and_array():
    g = parse_guard("De1 >= 0.5 || De2 >= 0.5")
    assert guard_signals(g) == {"De1", "De2"}
    assert evaluate_guard(g, {"De1": 0.5, "De2": 0.0})
    assert not evaluate_guard(g, {"De1": 0.49, "De2": 0.1})
    arr = evaluate_guard(g, {"De1": np.array([0.0, 0.6, 0.1]), "De2": np.array([0.0, 0.0, 0.7])})
    assert arr.tolist() == [False, True, True]
    assert str(parse_guard("(x > 1 || y < 2) && z == 3")) == "(x > 1 || y < 2) && z == 3"


@pytest.mark.parametrize("bad", ["", "De1 >=", "De1 >= 0.5 ||", "(De1 > 1", "De1 ~ 2"])
def test_guard_syntax_errors(bad):
    with pytest.raises(GuardSyntaxError):
        parse_guard(bad)
