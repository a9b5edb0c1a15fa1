"""Expression engine: construction, differentiation, conjugation, round trips."""
import numpy as np
import pytest
from fractions import Fraction
from hypothesis import given, settings, strategies as st

from schsym.expr import (ONE, T_VAR, ZERO, SymbolTable, abs_pow, conj_expr, const,
                         diff, func_app, int_pow, jet_var, psi, psi_var, sign_of,
                         subst, t, total_derivative, var, x, x_var)
from schsym.funcbank import random_surrogate
from schsym.numeric import Binding, SamplePoint, draw_env, eval_batch, eval_expr, is_zero
from schsym.parsing import parse, to_text


@pytest.fixture
def table():
    tbl = SymbolTable()
    tbl.declare("U", 1, "complex")
    tbl.declare("W", 2, "complex")
    tbl.declare("f", 1, "real")
    tbl.declare("b", 0, "real")
    return tbl


def test_interning_gives_structural_identity(table):
    assert parse("x1 + x2", table) is parse("x1 + x2", table)
    assert parse("x1*x2 + x1*x2", table) is parse("2*x1*x2", table)
    assert (x(1) - x(1)) is ZERO
    assert int_pow(x(1), 0) is ONE


def test_sum_collects_like_terms(table):
    e = parse("t*x1 - t*x1 + x2", table)
    assert e is x(2)


def test_parse_examples_from_contract(table):
    e = parse("x1^2 + x2^2", table)
    assert to_text(e) == "x1^2 + x2^2"
    e2 = parse("U(x2) + i*b*x1", table)
    assert parse(to_text(e2), table) is e2
    e3 = parse("conj(psi)", table)
    assert e3 is var(jet_var((0, 0, 0), conj=True))


def test_diff_power():
    assert diff(parse("x1^2"), x_var(1)) is parse("2*x1")


def test_diff_rotating_arguments(table):
    # d/dt U(w1, w2) with w1 = x1 cos t + x2 sin t, w2 = -x1 sin t + x2 cos t
    w1 = parse("x1*cos(t) + x2*sin(t)", table)
    w2 = parse("x2*cos(t) - x1*sin(t)", table)
    Ww = func_app(table.get("W"), [w1, w2])
    d = diff(Ww, T_VAR)
    want = (func_app(table.get("W"), [w1, w2], (1, 0)) * w2
            + func_app(table.get("W"), [w1, w2], (0, 1)) * (-w1))
    assert is_zero(d - want, rng=np.random.default_rng(0))


def test_abs_pow_derivative_matches_finite_differences(table):
    Tsym = table.declare("T", 1, "real")
    Tt = diff(func_app(Tsym, [t()]), T_VAR)
    h = abs_pow(Tt, Fraction(1, 2))
    dh = diff(h, T_VAR)
    rng = np.random.default_rng(3)
    impl = random_surrogate(rng, 1, "real")
    binding = Binding({Tsym: impl})
    t0, step = 0.8, 1e-5
    f1 = eval_expr(h, binding, SamplePoint(t0 + step, (0, 0)))
    f2 = eval_expr(h, binding, SamplePoint(t0 - step, (0, 0)))
    d0 = eval_expr(dh, binding, SamplePoint(t0, (0, 0)))
    assert abs((f1 - f2) / (2 * step) - d0) < 1e-6 * (1 + abs(d0))


def test_abs_pow_requires_real_base():
    with pytest.raises(ValueError):
        abs_pow(parse("i*x1"), Fraction(1, 2))
    with pytest.raises(ValueError):
        sign_of(psi(2))


def test_total_derivative_raises_jets():
    n = 2
    p = psi(n)
    assert total_derivative(p, 1) is var(jet_var((0, 1, 0)))
    e = x(1) * p
    dt = total_derivative(e, 0)
    assert dt is x(1) * var(jet_var((1, 0, 0)))
    # D_a of t-only expressions vanishes
    assert total_derivative(parse("t^2"), 1) is ZERO


def test_conjugation_distributes(table):
    e = parse("i*x1 + U(x2)", table)
    c = conj_expr(e)
    assert conj_expr(c) is e
    assert conj_expr(parse("x1 + t")) is parse("x1 + t")
    # conj flips jet flags
    assert conj_expr(psi(2)) is psi(2, conj=True)


def test_subst_replaces_vars(table):
    e = parse("t^2 + x1", table)
    out = subst(e, {T_VAR: parse("t + 1", table)})
    assert out is parse("(t+1)^2 + x1", table)


# -- property tests ---------------------------------------------------------

def _expr_strategy(table, smooth=False):
    leaves = st.sampled_from([
        t(), x(1), x(2), const(Fraction(1, 2)), const(2), const(0, 1),
        func_app(table.get("f"), [t()]),
        func_app(table.get("U"), [x(2)]),
        parse("cos(t)", table), parse("sin(2*t)", table),
    ])
    if not smooth:
        leaves = st.one_of(leaves, st.sampled_from([psi(2), int_pow(x(1), -1)]))

    def combine(children):
        a, b = children
        return st.sampled_from([a + b, a * b, a - b, int_pow(a, 2), conj_expr(a)])

    return st.recursive(leaves, lambda s: st.tuples(s, s).flatmap(combine), max_leaves=6)


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_mixed_partials_commute(data):
    tbl = SymbolTable()
    tbl.declare("U", 1, "complex")
    tbl.declare("f", 1, "real")
    e = data.draw(_expr_strategy(tbl))
    pairs = [(T_VAR, x_var(1)), (x_var(1), x_var(2)), (T_VAR, psi_var(2))]
    u, v = data.draw(st.sampled_from(pairs))
    lhs = diff(diff(e, u), v)
    rhs = diff(diff(e, v), u)
    assert is_zero(lhs - rhs, trials=2, points=40, rng=np.random.default_rng(7))


@settings(max_examples=30, deadline=None)
@given(st.data())
def test_eval_diff_consistency(data):
    tbl = SymbolTable()
    tbl.declare("U", 1, "complex")
    tbl.declare("f", 1, "real")
    e = data.draw(_expr_strategy(tbl, smooth=True))
    de = diff(e, T_VAR)
    rng = np.random.default_rng(11)
    binding = Binding({s: random_surrogate(rng, s.arity, s.codomain)
                       for s in e.free_symbols if s.name in ("U", "f")})
    h = 1e-5
    pt = SamplePoint(0.9, (0.7, -0.4))
    f1 = eval_expr(e, binding, SamplePoint(pt.t + h, pt.x))
    f2 = eval_expr(e, binding, SamplePoint(pt.t - h, pt.x))
    d0 = eval_expr(de, binding, pt)
    assert abs((f1 - f2) / (2 * h) - d0) <= 1e-6 * (1 + abs(d0))


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_conjugation_matches_pointwise_conjugate(data):
    tbl = SymbolTable()
    tbl.declare("U", 1, "complex")
    tbl.declare("f", 1, "real")
    e = data.draw(_expr_strategy(tbl))
    c = conj_expr(e)
    rng = np.random.default_rng(13)
    binding = Binding({s: random_surrogate(rng, s.arity, s.codomain)
                       for s in e.free_symbols})
    env = draw_env(e.free_vars | c.free_vars, 16, rng)
    v1, _, u1 = eval_batch(c, binding, env)
    v2, _, u2 = eval_batch(e, binding, env)
    good = ~(u1 | u2)
    assert np.allclose(np.asarray(v1)[good], np.conj(np.asarray(v2)[good]))


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_print_parse_round_trip(data):
    tbl = SymbolTable()
    tbl.declare("U", 1, "complex")
    tbl.declare("f", 1, "real")
    e = data.draw(_expr_strategy(tbl))
    assert parse(to_text(e), tbl) is e
