"""Canonical fields: expansion, both brackets, span ranks."""
import numpy as np
import pytest
from fractions import Fraction

from schsym.closedform import exppoly_to_expr
from schsym.expr import ONE, T_VAR, ZERO, const, func_app, int_pow, psi, t, var, x
from schsym.fields import (D, GeneratorCoeffs, Iop, J, P, bracket_generic,
                           bracket_structural, expand, rank_of_chi_block)
from schsym.funcbank import random_trig_poly
from schsym.numeric import is_zero
from schsym.parsing import parse

RNG = np.random.default_rng(20)


def rand_gen(rng, with_eta=False):
    def fn():
        return exppoly_to_expr(random_trig_poly(rng, "real"))

    eta = None
    if with_eta:
        eta = parse("(1+i)*t*x1 + x2^2")
    return GeneratorCoeffs(2, fn(), (Fraction(int(rng.integers(-2, 3)), 3),),
                           (fn(), fn()), fn(), fn(), eta)


def test_expand_time_translation():
    f = expand(D(1))
    assert f.coef_t is ONE
    assert all(c is ZERO for c in f.coef_x)
    assert f.coef_psi is ZERO and f.coef_psi_star is ZERO


def test_expand_rotation():
    f = expand(J(1, 2))
    assert f.coef_x == (-x(2), x(1))
    assert f.coef_psi is ZERO


def test_expand_galilean_boost():
    f = expand(P(var(T_VAR), 0))
    assert f.coef_x == (var(T_VAR), ZERO)
    assert f.coef_psi is parse("1/2*i*x1*psi")
    assert f.coef_psi_star is parse("-1/2*i*x1*conj(psi)")


def test_structural_bracket_closed_forms():
    b = bracket_structural(D(1), D(var(T_VAR)))
    assert b.tau is ONE and b.sigma is ZERO and b.rho is ZERO
    b2 = bracket_structural(P(1, 0), P(var(T_VAR), 0))
    assert b2.sigma is const(Fraction(1, 2))
    assert all(c is ZERO for c in b2.chi)
    # [J, P(c1, c2)] = P(c2, -c1)
    c1 = parse("cos(t)")
    c2 = parse("sin(2*t)")
    b3 = bracket_structural(J(1, 2), P(c1, c2))
    assert b3.chi == (c2, -c1)


def test_bracket_antisymmetry_on_random_generators():
    for k in range(5):
        g = rand_gen(np.random.default_rng(100 + k))
        b = bracket_structural(g, g)
        f = expand(b)
        for comp in f.components():
            assert is_zero(comp, trials=1, points=30, rng=RNG)


def test_generic_matches_structural_with_eta0():
    # the Z-rules are bracket identities independent of the equation
    rng = np.random.default_rng(17)
    g1 = rand_gen(rng, with_eta=True)
    g2 = rand_gen(rng, with_eta=True)
    dvf = expand(bracket_structural(g1, g2)).sub(bracket_generic(expand(g1), expand(g2)))
    for comp in dvf.components():
        assert is_zero(comp, trials=2, points=40, rng=RNG)


def test_generic_bracket_simple():
    f1 = expand(D(1))
    f2 = expand(D(var(T_VAR)))
    b = bracket_generic(f1, f2)
    assert b.coef_t is ONE


def test_generic_bracket_crossed_rotations():
    from schsym.fields import VectorField

    f1 = VectorField(2, ZERO, (ZERO, x(1)), ZERO, ZERO)  # x1 d2
    f2 = VectorField(2, ZERO, (x(2), ZERO), ZERO, ZERO)  # x2 d1
    b = bracket_generic(f1, f2)
    assert b.coef_x == (x(1), -x(2))  # x1 d1 - x2 d2


def test_n3_machinery_through_classifying_condition():
    # the canonical machinery is dimension-generic even though the table is n=2
    from schsym.conditions import Potential, classifying_residual
    from schsym.expr import int_pow

    tv = var(T_VAR)
    V0 = Potential(ZERO, 3)
    g = D(int_pow(tv, 2), 3).add(Iop(parse("-3/2*t", n=3), 3))
    assert is_zero(classifying_residual(V0, g), rng=RNG)
    rot = J(1, 3, 3)
    f = expand(rot)
    assert f.coef_x == (-x(3), ZERO, x(1))
    assert classifying_residual(V0, rot) is ZERO


def test_expand_injective_on_canonical_data():
    rng = np.random.default_rng(23)
    g1 = rand_gen(rng)
    g2 = rand_gen(rng)
    dvf = expand(g1).sub(expand(g2))
    nonzero = any(not is_zero(c, trials=1, points=30, rng=RNG)
                  for c in dvf.components())
    assert nonzero  # distinct data give distinct fields
    same = expand(g1).sub(expand(g1))
    assert all(c is ZERO for c in same.components())


def test_rank_of_chi_block_examples():
    tv = var(T_VAR)
    one_rank = rank_of_chi_block([P(1, 0).add(Iop(tv, 2)),
                                  P(tv, 0).add(Iop(int_pow(tv, 2), 2))])
    assert one_rank == 1
    assert rank_of_chi_block([P(1, 0), P(0, 1)]) == 2
    assert rank_of_chi_block([]) == 0
    # a rotating tuple still has functional rank 1
    assert rank_of_chi_block([P(parse("cos(t)"), parse("sin(t)"))]) == 1


def test_generator_validation():
    with pytest.raises(ValueError):
        GeneratorCoeffs(2, x(1), (Fraction(0),), (ZERO, ZERO), ZERO, ZERO, None)
    with pytest.raises(ValueError):
        GeneratorCoeffs(2, ZERO, (Fraction(0),), (psi(2), ZERO), ZERO, ZERO, None)
