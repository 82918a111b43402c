import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liiss.errors import ExpressionError
from liiss.expr import Expression, parse


@pytest.mark.parametrize("text,t,want", [
    ("5/(1+t)", 2.0, 5 / 3),
    ("0.08+0.03*sin(3*pi*t)", 0.5, 0.08 + 0.03 * math.sin(1.5 * math.pi)),
    ("qroot(t)", 16.0, 2.0),
    ("min(t, 2)^2", 3.0, 4.0),
    ("max(t, 2)", 3.0, 3.0),
    ("-t^2", 3.0, -9.0),
    ("2^-1", 0.0, 0.5),
    ("abs(-t)*e", 1.0, math.e),
    ("10*t", 1.5, 15.0),
])
def test_scalar_evaluation(text, t, want):
    assert parse(text)(t) == pytest.approx(want, rel=1e-15)


def test_vector_evaluation_matches_scalar():
    e = parse("A*(0.6*exp(-qroot(t))+1.2*cos(pi*t))", params={"A": 3.0})
    ts = np.linspace(0, 5, 11)
    assert np.allclose(e(ts), [e(float(t)) for t in ts], rtol=1e-14)
    assert e(0.0) == pytest.approx(5.4)


def test_constant_expression_broadcasts():
    e = Expression("2", ("xi", "t"))
    assert e(np.zeros(4), 1.0).shape == (4,)


def test_multiple_variables():
    e = Expression("sqrt(1+sin(xi))/(1+t)*x^2", ("xi", "t", "x"))
    assert e(0.0, 1.0, 2.0) == pytest.approx(2.0)


@pytest.mark.parametrize("text", ["1/(1+", "sin(t", "foo(t)", "y+1", "min(t)", "2 $ t", ")"])
def test_errors(text):
    with pytest.raises(ExpressionError):
        parse(text)


def test_error_reports_column():
    with pytest.raises(ExpressionError) as info:
        parse("1+y")
    assert info.value.position == 2 and "column 3" in str(info.value)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_domain_error_falls_back_to_nan():
    assert math.isnan(parse("sqrt(t)")(-1.0))


# round trip: canonical text re-parses to the same tree

_leaf = st.one_of(st.sampled_from(["t", "pi"]),
                  st.floats(0, 1e3, allow_nan=False).map(lambda v: repr(v)),
                  st.integers(0, 50).map(str))


def _combine(children):
    return st.one_of(
        st.tuples(children, st.sampled_from("+-*/^"), children).map(lambda a: f"({a[0]}{a[1]}{a[2]})"),
        children.map(lambda a: f"-{a}"),
        children.map(lambda a: f"sin({a})"),
        st.tuples(children, children).map(lambda a: f"max({a[0]}, {a[1]})"),
    )


@settings(max_examples=200, deadline=None)
@given(st.recursive(_leaf, _combine, max_leaves=8))
def test_canonical_round_trip(text):
    e = parse(text)
    again = parse(e.canonical())
    assert again == e
    assert again.canonical() == e.canonical()
