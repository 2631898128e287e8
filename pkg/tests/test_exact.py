from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpverify.errors import ExactDivisionError, UsageError
from cpverify.exact import (
    MPoly,
    RatFun,
    Registry,
    exact_div,
    parse_mpoly,
    ratfun_equal,
    session_registry,
    solve_linear,
)

REG = session_registry(2, seeds=("nu0", "nu1"))


def v(name):
    return REG.var(name)


def rationals():
    return st.fractions(min_value=-10, max_value=10, max_denominator=7)


@st.composite
def mpolys(draw, max_terms=5, max_exp=3):
    terms = {}
    for _ in range(draw(st.integers(0, max_terms))):
        exp = tuple(draw(st.integers(0, max_exp)) for _ in REG.names)
        terms[exp] = draw(rationals())
    return MPoly(REG, terms)


def test_difference_of_squares():
    z1, t = v("z1"), v("t")
    assert (z1 + t) * (z1 - t) == z1 * z1 - t * t


@given(mpolys())
def test_additive_identity(p):
    assert p + REG.zero() == p


def test_binomial_cube():
    z1, z2 = v("z1"), v("z2")
    p = (z1 + z2) ** 3
    assert len(p.terms) == 4
    assert sorted(p.terms.values()) == [1, 1, 3, 3]


@settings(max_examples=60)
@given(mpolys(), mpolys(), mpolys())
def test_ring_axioms(a, b, c):
    assert (a + b) + c == a + (b + c)
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a * b == b * a
    assert a + b == b + a


@given(mpolys())
def test_partials_commute(p):
    assert p.partial("z1").partial("t") == p.partial("t").partial("z1")


@settings(max_examples=60)
@given(mpolys(), mpolys())
def test_product_rule(f, g):
    lhs = (f * g).partial("z1")
    rhs = f * g.partial("z1") + g * f.partial("z1")
    assert lhs == rhs


def test_partial_examples():
    z1, z2, t = v("z1"), v("z2"), v("t")
    assert (z1 * z1 * z2).partial("z1") == 2 * z1 * z2
    assert REG.const(5).partial("t") == REG.zero()
    with pytest.raises(UsageError):
        z1.partial("w")


def test_registry_mismatch_rejected():
    other = Registry(("x",))
    with pytest.raises(UsageError):
        _ = v("z1") + other.var("x")


def test_ratfun_equal_examples():
    z1, z2, t = v("z1"), v("z2"), v("t")
    a = RatFun(REG.one(), z1 - z2)
    b = RatFun(z1 + z2, z1 * z1 - z2 * z2)
    assert ratfun_equal(a, b)
    assert ratfun_equal(RatFun(t, t * t), RatFun(REG.one(), t))
    assert not ratfun_equal(a, RatFun(REG.one(), z2 - z1))


@settings(max_examples=40)
@given(mpolys(), mpolys(), mpolys())
def test_ratfun_equivalence_relation(a, b, c):
    den = v("t") + 1
    ra, rb, rc = (RatFun(p, den) for p in (a, b, c))
    scaled = RatFun(a * (v("z1") + 2), den * (v("z1") + 2))
    assert ra.equal(ra)
    assert ra.equal(scaled) and scaled.equal(ra)
    if ra.equal(rb) and rb.equal(rc):
        assert ra.equal(rc)


def test_ratfun_arith():
    z1, z2 = v("z1"), v("z2")
    w1 = RatFun(REG.one(), z1 - z2)
    w2 = RatFun(REG.one(), z2 - z1)
    assert (w1 + w2).is_zero()
    assert ratfun_equal(w1 * (z1 - z2), RatFun.const(REG, 1))
    assert ratfun_equal(1 / w1, RatFun.from_mpoly(z1 - z2))
    assert ratfun_equal(w1**2, RatFun(REG.one(), (z1 - z2) ** 2))


def test_ratfun_deriv():
    z1, z2 = v("z1"), v("z2")
    w = RatFun(REG.one(), z1 - z2)
    assert ratfun_equal(w.deriv("z1"), -(w**2))
    assert ratfun_equal(w.deriv("z2"), w**2)


def test_exact_div():
    z1, z2 = v("z1"), v("z2")
    q = exact_div(z1 * z1 - z2 * z2, z1 - z2)
    assert q == z1 + z2
    with pytest.raises(ExactDivisionError):
        exact_div(z1 * z1 + z2, z1 - z2)


def test_serialization_round_trip():
    p = Fraction(3, 2) * v("z1") ** 2 * v("t") - v("nu0")
    s = p.to_str()
    assert s == "3/2*z1^2*t - 1*nu0"
    assert parse_mpoly(REG, s) == p
    assert parse_mpoly(REG, "0") == REG.zero()
    assert parse_mpoly(REG, "-2/3*z2 + z1*z2^2") == -Fraction(2, 3) * v("z2") + v("z1") * v("z2") ** 2


@given(mpolys())
def test_round_trip_random(p):
    assert parse_mpoly(REG, p.to_str()) == p


def test_eval_and_subs():
    z1, t = v("z1"), v("t")
    p = z1 * z1 + t
    assert p.eval({"z1": Fraction(2), "z2": 0, "t": Fraction(1, 2), "nu0": 0, "nu1": 0}) == Fraction(9, 2)
    assert p.subs({"t": Fraction(-1)}) == z1 * z1 - 1
    assert p.subs({"z1": t}) == t * t + t


@settings(max_examples=40)
@given(mpolys(), rationals(), rationals())
def test_subs_matches_eval(p, a, b):
    # the rational fast path must agree with full evaluation
    partial = p.subs({"z1": a, "t": b})
    full_point = {"z1": a, "z2": Fraction(1, 3), "t": b, "nu0": Fraction(2), "nu1": Fraction(-1, 2)}
    assert partial.eval(full_point) == p.eval(full_point)
    mixed = p.subs({"z1": v("t") + 1, "t": b})
    assert mixed.eval(full_point | {"t": b}) == p.eval(full_point | {"z1": b + 1})


def test_permute_vars():
    z1, z2 = v("z1"), v("z2")
    p = z1 * z1 * z2
    assert p.permute_vars({"z1": "z2", "z2": "z1"}) == z2 * z2 * z1


def test_solve_linear():
    rows = [[1, 1], [1, -1], [2, 0]]
    rhs = [3, 1, 4]
    assert solve_linear(rows, rhs) == [Fraction(2), Fraction(1)]
    with pytest.raises(UsageError):
        solve_linear([[1, 1], [2, 2]], [1, 3])
