import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from hbgfdi.symbolic import (
    Abs,
    Const,
    EvaluationError,
    ExpressionSyntaxError,
    MaxConst,
    ModeBool,
    Neg,
    Param,
    Product,
    Reciprocal,
    Sign,
    Signal,
    Sum,
    TimeDeriv,
    Valuation,
    evaluate,
    free_symbols,
    guarded_occurrences,
    parse_expression,
    render,
    simplify,
    substitute_modes,
)

N = 10_000
leaves = st.one_of(
    st.builds(Const, st.sampled_from([0.0, 1.0, 2.0, -1.0, 0.5, 3.0])),
    st.builds(Param, st.sampled_from(["R1", "R2", "C1"])),
    st.builds(ModeBool, st.sampled_from(["a1", "a2"])),
    st.builds(Signal, st.sampled_from(["x", "y"])),
    st.builds(lambda s: TimeDeriv(Signal(s)), st.sampled_from(["x", "y"])),
)


def _extend(children):
    pair = st.tuples(children, children)
    return st.one_of(
        pair.flatmap(lambda p: st.tuples(st.sampled_from([1, -1]), st.sampled_from([1, -1])).map(
            lambda s: Sum(p, s))),
        pair.map(Product),
        st.builds(lambda p: Reciprocal(Param(p)), st.sampled_from(["R1", "R2", "C1"])),
        st.builds(MaxConst, children, st.sampled_from([0.5, 0.7])),
        st.builds(Sign, children),
        st.builds(Abs, children),
        st.builds(Neg, children),
    )


exprs = st.recursive(leaves, _extend, max_leaves=12)


def _valuation(seed):
    rng = np.random.default_rng(seed)
    return Valuation(
        params={p: rng.uniform(0.2, 5.0, N) for p in ["R1", "R2", "C1"]},
        modes={m: rng.integers(0, 2, N).astype(float) for m in ["a1", "a2"]},
        signals={s: rng.uniform(-2, 2, N) for s in ["x", "y"]},
        signal_derivs={s: rng.uniform(-2, 2, N) for s in ["x", "y"]},
    )


VAL = _valuation(0)


@settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(exprs)
def test_simplification_is_sound(e):
    """Simplified and raw trees agree on 10^4 random valuations."""
    s = simplify(e)
    a = np.broadcast_to(evaluate(e, VAL), (N,))
    b = np.broadcast_to(evaluate(s, VAL), (N,))
    np.testing.assert_allclose(b, a, rtol=1e-9, atol=1e-9)


@settings(max_examples=150, deadline=None)
@given(exprs)
def test_simplify_is_idempotent(e):
    s = simplify(e)
    assert simplify(s) == s


@settings(max_examples=150, deadline=None)
@given(exprs)
def test_render_parse_round_trip(e):
    s = simplify(e)
    back = simplify(parse_expression(render(s), modes={"a1", "a2"}, signals={"x", "y"}))
    assert back == s


def test_canonical_rewrites():
    x, a1 = Signal("x"), ModeBool("a1")
    assert simplify(a1 * a1 * x) == simplify(a1 * x)
    assert simplify(Sign(x) * x) == Abs(x)
    assert simplify(Const(0) * x + Const(1) * Signal("y")) == Signal("y")
    assert simplify(Param("R1") * Reciprocal(Param("R1"))) == Const(1.0)
    assert render(simplify(x - x)) == "0"


def test_time_derivative_rejects_parameters():
    with pytest.raises(ValueError):
        TimeDeriv(Param("C1") * Signal("x"))


def test_free_symbols_and_guards():
    e = parse_expression("(a1/R12)*(max(De1,0.5) - De2) + C1*d/dt(De1)", modes={"a1"}, signals={"De1", "De2"})
    params, modes, signals = free_symbols(e)
    assert params == {"R12", "C1"} and modes == {"a1"} and signals == {"De1", "De2"}
    assert guarded_occurrences(simplify(e), "R12").render() == "a1"
    assert guarded_occurrences(simplify(e), "C1").render() == "1"
    assert guarded_occurrences(simplify(e), "R9").render() == "0"
    assert "R12" not in free_symbols(simplify(substitute_modes(e, {"a1": 0})))[0]


def test_unresolved_symbol():
    with pytest.raises(EvaluationError, match="R1"):
        evaluate(Param("R1"), Valuation())


@pytest.mark.parametrize("bad", ["(x + ", "x $ y", "max(x)", ""])
def test_syntax_errors(bad):
    with pytest.raises(ExpressionSyntaxError):
        parse_expression(bad)
