"""Transformations: action, groupoid laws, pushforwards, algebra generators."""
import numpy as np
import pytest
from fractions import Fraction

from schsym.closedform import exppoly_to_expr
from schsym.conditions import Potential, classifying_residual
from schsym.equivalence import (AdmissibleTransformation, EquivGenerator,
                                EquivTransformation, NonElementaryError,
                                UndecidableTemplate, act_on_potential, compose,
                                equiv_generator_check, invert, is_free_reducible,
                                is_real_admissible, potentials_agree, pushforward,
                                rational_rotation, standard_equiv_generators,
                                _identity_matrix)
from schsym.expr import (LOG, SymbolTable, T_VAR, ZERO, conj_expr, const, diff,
                         func_app, im_part, int_pow, t, var, x)
from schsym.fields import D, J, P
from schsym.funcbank import random_surrogate, random_trig_poly
from schsym.numeric import Binding, Workspace, is_zero
from schsym.parsing import parse

RNG = np.random.default_rng(41)


@pytest.fixture
def table():
    tbl = SymbolTable()
    tbl.declare("W", 3, "complex")
    tbl.declare("Uc", 0, "complex")
    return tbl


def small_fn(rng, amp=0.2):
    return exppoly_to_expr(random_trig_poly(rng, "real").scale(amp))


def random_transform(rng, ws):
    # amplitude 0.08 keeps T_t positive (trig slope is at most 6x amplitude)
    T = var(T_VAR) + small_fn(rng, amp=0.08)
    O = rational_rotation(Fraction(int(rng.integers(-3, 4)), 7))
    X = (small_fn(rng), small_fn(rng))
    return EquivTransformation(2, T, O, X, small_fn(rng), small_fn(rng),
                               binding=ws.binding)


def generic_potential(table):
    return Potential(func_app(table.get("W"), [t(), x(1), x(2)]), 2)


def inverse_square(table):
    return Potential(func_app(table.get("Uc"), []) * int_pow(parse("x1^2+x2^2"), -1), 2)


def test_identity_acts_trivially(table):
    V = generic_potential(table)
    Vt = act_on_potential(V, EquivTransformation.identity(2))
    assert potentials_agree(Vt, V, rng=RNG)


def test_phase_shift_adds_constant(table):
    tr = EquivTransformation.elementary_M(parse("3/7*t"), 2)
    Vt = act_on_potential(Potential(ZERO, 2), tr)
    assert is_zero(Vt.expr - const(Fraction(3, 7)), binding=Vt.binding, rng=RNG)


def test_scaling_preserves_inverse_square(table):
    V = inverse_square(table)
    tr = EquivTransformation.elementary_D(parse("4*t"), 2)
    Vt = act_on_potential(V, tr)
    assert potentials_agree(Vt, V, rng=RNG)


def test_wigner_reflection_conjugates(table):
    V = inverse_square(table)
    refl = EquivTransformation(2, -var(T_VAR), _identity_matrix(2),
                               (ZERO, ZERO), ZERO, ZERO)
    assert refl.eps == -1
    Vt = act_on_potential(V, refl)
    want = conj_expr(func_app(table.get("Uc"), [])) * int_pow(parse("x1^2+x2^2"), -1)
    assert is_zero(Vt.expr - want, binding=Vt.binding, rng=RNG)


def test_compose_and_invert_roundtrip(table):
    rng = np.random.default_rng(5)
    ws = Workspace()
    V = generic_potential(table)
    t1 = AdmissibleTransformation.create(V, random_transform(rng, ws))
    t2 = AdmissibleTransformation.create(t1.target, random_transform(rng, ws))
    comp = compose(t1, t2, validate=True, rng=rng)  # raises on mismatch
    inv = invert(t1, validate=True, rng=rng)
    roundtrip = compose(t1, inv, validate=False)
    back = act_on_potential(V, roundtrip.map)
    assert potentials_agree(back, V, rng=rng, tol=1e-7)
    # identity composes neutrally
    ident = AdmissibleTransformation.create(V, EquivTransformation.identity(2))
    again = compose(ident, t1, validate=True, rng=rng)
    assert potentials_agree(again.target, t1.target, rng=rng)


def test_sigma_shifts_compose_additively(table):
    rng = np.random.default_rng(12)
    V0 = Potential(ZERO, 2)
    s1, s2 = parse("2/5*t"), parse("1/3*t")
    t1 = AdmissibleTransformation.create(V0, EquivTransformation.elementary_M(s1, 2))
    t2 = AdmissibleTransformation.create(t1.target, EquivTransformation.elementary_M(s2, 2))
    comp = compose(t1, t2, validate=True, rng=rng)
    both = AdmissibleTransformation.create(
        V0, EquivTransformation.elementary_M(parse("(2/5 + 1/3)*t"), 2))
    assert potentials_agree(comp.target, both.target, rng=rng)
    # inversion flips the shift
    inv = invert(t1, validate=True, rng=rng)
    assert potentials_agree(inv.target, V0, rng=rng)
    minus = act_on_potential(t1.target,
                             EquivTransformation.elementary_M(-s1, 2))
    assert potentials_agree(minus, V0, rng=rng)


def test_compose_requires_matching_potentials(table):
    V = generic_potential(table)
    V0 = Potential(ZERO, 2)
    t1 = AdmissibleTransformation.create(V, EquivTransformation.identity(2))
    t2 = AdmissibleTransformation.create(V0, EquivTransformation.identity(2))
    with pytest.raises(ValueError):
        compose(t1, t2, validate=True, rng=RNG)


def test_functoriality(table):
    rng = np.random.default_rng(6)
    ws = Workspace()
    V = generic_potential(table)
    t1 = AdmissibleTransformation.create(V, random_transform(rng, ws))
    t2 = AdmissibleTransformation.create(t1.target, random_transform(rng, ws))
    comp = compose(t1, t2, validate=False)
    lhs = act_on_potential(V, comp.map)
    rhs = act_on_potential(act_on_potential(V, t1.map), t2.map)
    assert potentials_agree(lhs, rhs, rng=rng, tol=1e-7)


def test_pushforward_listed_rules():
    rng = np.random.default_rng(7)
    tau = small_fn(rng, amp=1.0)
    ups = small_fn(rng)
    img = pushforward(D(tau), EquivTransformation.elementary_I(ups, 2))
    assert img.tau is tau
    assert is_zero(img.rho - tau * diff(ups, T_VAR), rng=RNG)
    sig = small_fn(rng)
    img2 = pushforward(D(tau), EquivTransformation.elementary_M(sig, 2))
    assert is_zero(img2.sigma - tau * diff(sig, T_VAR), rng=RNG)
    O = rational_rotation(Fraction(1, 3))
    chi = small_fn(rng, amp=1.0)
    img3 = pushforward(P(chi, 0), EquivTransformation.elementary_J(O, 2))
    assert is_zero(img3.chi[0] - const(O[0][0]) * chi, rng=RNG)
    assert is_zero(img3.chi[1] - const(O[1][0]) * chi, rng=RNG)
    # rotations conjugate the kappa matrix trivially at n=2
    img4 = pushforward(J(1, 2), EquivTransformation.elementary_J(O, 2))
    assert img4.kappa == (Fraction(1),)


def test_pushforward_requires_elementary():
    tr = EquivTransformation(2, parse("4*t"), _identity_matrix(2),
                             (parse("t"), ZERO), ZERO, ZERO)
    with pytest.raises(NonElementaryError):
        pushforward(D(1), tr)


def test_pushforward_equivariance(table):
    # symmetry generators map to symmetry generators of the moved potential
    rng = np.random.default_rng(8)
    V = inverse_square(table)
    gens = [D(var(T_VAR)), J(1, 2), D(1)]
    trs = [EquivTransformation.elementary_D(parse("4*t"), 2),
           EquivTransformation.elementary_D(var(T_VAR) + small_fn(rng, amp=0.08)),
           EquivTransformation.elementary_P((small_fn(rng), small_fn(rng)), 2),
           EquivTransformation.elementary_M(small_fn(rng), 2),
           EquivTransformation.elementary_I(small_fn(rng), 2),
           EquivTransformation.elementary_J(rational_rotation(Fraction(2, 5)), 2)]
    checked = 0
    for g in gens:
        for tr in trs:
            Vt = act_on_potential(V, tr)
            gt = pushforward(g, tr)
            res = classifying_residual(Vt, gt)
            assert is_zero(res, trials=2, points=50, binding=Vt.binding, rng=rng), \
                (tr.elementary_kind(),)
            checked += 1
    assert checked >= 18


def test_equiv_generator_families(table):
    ws = Workspace()
    rng = np.random.default_rng(9)
    U3 = ws.declare("U3", 3, "complex", random_surrogate(rng, 3, "complex"))
    V = Potential(func_app(U3, [t(), x(1), x(2)]), 2, ws.binding)
    for gen in standard_equiv_generators(rng):
        assert equiv_generator_check(gen, V, rng=rng), gen.kind
        # the projection drops the dV part and matches the canonical generator
        proj = gen.projection()
        assert proj.n == 2


def test_equiv_generator_check_detects_wrong_coefficient(table):
    ws = Workspace()
    rng = np.random.default_rng(10)
    U3 = ws.declare("U3b", 3, "complex", random_surrogate(rng, 3, "complex"))
    V = Potential(func_app(U3, [t(), x(1), x(2)]), 2, ws.binding)
    gen = EquivGenerator("M", 2, sigma=parse("t^2"))
    assert equiv_generator_check(gen, V, rng=rng)
    wrong = EquivGenerator("M", 2, sigma=parse("t^2 + t"))
    wrong.family = gen.family  # flow from sigma = t^2, coefficient from t^2 + t
    assert not equiv_generator_check(wrong, V, rng=rng)


def test_real_admissibility(table):
    assert is_real_admissible(EquivTransformation.identity(2), 2, rng=RNG)
    lnexpr = func_app(LOG, [parse("2*t")])
    trR = EquivTransformation(2, int_pow(var(T_VAR), 2), _identity_matrix(2),
                              (ZERO, ZERO), ZERO, const(Fraction(-1, 2)) * lnexpr,
                              bracket=(0.05, 60.0))
    assert is_real_admissible(trR, 2, rng=RNG)
    assert not is_real_admissible(EquivTransformation.elementary_I(var(T_VAR), 2), 2, rng=RNG)


def test_real_subclass_closure(table):
    tbl = table
    UR = tbl.declare("UR", 3, "real")
    V = Potential(func_app(UR, [t(), x(1), x(2)]), 2)
    lnexpr = func_app(LOG, [parse("2*t")])
    trR = EquivTransformation(2, int_pow(var(T_VAR), 2), _identity_matrix(2),
                              (ZERO, ZERO), ZERO, const(Fraction(-1, 2)) * lnexpr,
                              bracket=(0.05, 60.0))
    Vt = act_on_potential(V, trR)
    assert is_zero(im_part(Vt.expr), binding=Vt.binding, rng=RNG)


def test_free_reducibility(table):
    rng = np.random.default_rng(11)
    assert is_free_reducible(Potential(ZERO, 2), rng)
    assert is_free_reducible(Potential(parse("(x1^2+x2^2)/4"), 2), rng)
    assert is_free_reducible(Potential(parse("t*x1 + x2 + i*t^2"), 2), rng)
    assert not is_free_reducible(Potential(parse("x2^(-2)"), 2), rng)
    assert not is_free_reducible(Potential(parse("i*x1"), 2), rng)  # imaginary linear
    assert not is_free_reducible(Potential(parse("x1^2"), 2), rng)  # non-scalar hessian
    with pytest.raises(UndecidableTemplate):
        is_free_reducible(generic_potential(table), rng)


def test_solution_summand_is_data_only(table):
    # Lam must solve the source equation; it never changes the target potential
    from schsym.conditions import eta0_residual
    from schsym.expr import EXP

    V0 = Potential(ZERO, 2)
    lam = func_app(EXP, [parse("i*x1 - i*t")])
    assert is_zero(eta0_residual(V0, lam), rng=RNG)
    tr = EquivTransformation(2, var(T_VAR), _identity_matrix(2), (ZERO, ZERO),
                             ZERO, ZERO, Lam=lam)
    Vt = act_on_potential(V0, tr)
    assert potentials_agree(Vt, V0, rng=RNG)
    adm = AdmissibleTransformation.create(V0, tr)
    with pytest.raises(ValueError):
        invert(adm)


def test_transformation_validation():
    with pytest.raises(ValueError):
        EquivTransformation(2, var(T_VAR), ((Fraction(1), Fraction(1)),
                                            (Fraction(0), Fraction(1))),
                            (ZERO, ZERO), ZERO, ZERO)
    with pytest.raises(ValueError):
        EquivTransformation(2, int_pow(var(T_VAR), 2) - var(T_VAR),
                            _identity_matrix(2), (ZERO, ZERO), ZERO, ZERO)
