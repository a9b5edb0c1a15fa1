"""Randomized evaluation: exactness, the zero test, unsafe-sample handling."""
import numpy as np
import pytest

from schsym.expr import SymbolTable, T_VAR, ZERO, diff, func_app, int_pow, t, var, x
from schsym.funcbank import ExpPoly, ExpPolyImpl
from schsym.numeric import (AntiderivImpl, Binding, EMPTY_BINDING, InverseImpl,
                            SamplePoint, UnsafeSampleError, draw_env, eval_batch,
                            eval_expr, is_zero, max_normalized_residual)
from schsym.parsing import parse


def test_eval_omega_at_origin_time():
    w1 = parse("x1*cos(t) + x2*sin(t)")
    assert eval_expr(w1, EMPTY_BINDING, SamplePoint(0.0, (3.0, 5.0))) == pytest.approx(3.0)


def test_eval_bound_derivative():
    tbl = SymbolTable()
    f = tbl.declare("f", 1, "real")
    binding = Binding({f: ExpPolyImpl(ExpPoly.cos(2.0))})
    df = diff(func_app(f, [t()]), T_VAR)
    assert eval_expr(df, binding, SamplePoint(0.0, ())) == pytest.approx(0.0)
    assert eval_expr(df, binding, SamplePoint(0.25, ())) == pytest.approx(-2 * np.sin(0.5))


def test_is_zero_trig_identity():
    assert is_zero(parse("cos(t)^2 + sin(t)^2 - 1"), rng=np.random.default_rng(0))


def test_is_zero_rejects_nonzero():
    assert not is_zero(parse("t*x1"), rng=np.random.default_rng(0))


def test_is_zero_no_t_dependence_is_structural():
    tbl = SymbolTable()
    U = tbl.declare("U", 2, "complex")
    V = func_app(U, [x(1), x(2)])
    assert x(1) * diff(V, T_VAR) is ZERO


def test_normalization_is_scale_free():
    # a large multiple of an identity is still recognized as zero
    big = parse("10000000*(cos(t)^2 + sin(t)^2 - 1)")
    assert is_zero(big, rng=np.random.default_rng(1))


def test_unsafe_samples_are_redrawn():
    # 1/x1 is singular on a measure-zero set only; sampling succeeds
    e = int_pow(x(1), -1) * x(1) - 1
    assert is_zero(e, rng=np.random.default_rng(2))


def test_unsafe_exhaustion_raises():
    # sgn of an expression that is identically zero can never be sampled safely
    e = __import__("schsym.expr", fromlist=["sign_of"]).sign_of(x(1) - x(1) + t() - t() + x(2) * 0 + parse("cos(t)^2 + sin(t)^2 - 1"))
    with pytest.raises(UnsafeSampleError):
        is_zero(e, trials=1, rng=np.random.default_rng(3))


def test_witness_records_worst_point():
    worst, witness = max_normalized_residual(parse("t*x1"), trials=1, points=50,
                                             rng=np.random.default_rng(4))
    assert worst > 1e-3
    assert "t" in witness["point"] and "x1" in witness["point"]


def test_conjugated_jets_sample_consistently():
    p = parse("psi*conj(psi)")
    env = draw_env(p.free_vars, 32, np.random.default_rng(5))
    vals, _, _ = eval_batch(p, EMPTY_BINDING, env)
    assert np.all(np.abs(np.imag(vals)) < 1e-14)
    assert np.all(np.real(vals) >= 0)


def test_inverse_impl_roundtrip_and_derivatives():
    tbl = SymbolTable()
    T = parse("t + 3/10*sin(t)", tbl)
    impl = InverseImpl(T, EMPTY_BINDING)
    tinv_sym = tbl.declare("Ti", 1, "real")
    binding = Binding({tinv_sym: impl})
    app = func_app(tinv_sym, [t()])
    y0 = 1.3
    s0 = eval_expr(app, binding, SamplePoint(y0, ())).real
    assert abs(s0 + 0.3 * np.sin(s0) - y0) < 1e-12
    d1 = eval_expr(diff(app, T_VAR), binding, SamplePoint(y0, ())).real
    assert d1 == pytest.approx(1.0 / (1.0 + 0.3 * np.cos(s0)), rel=1e-10)


def test_antideriv_impl_matches_closed_form():
    impl = AntiderivImpl(parse("cos(t)"), EMPTY_BINDING, base_point=1.0)
    z = np.array([0.4, 1.0, 1.6, 2.5], dtype=complex)
    got = impl.deriv((0,), (z,))
    want = np.sin(np.real(z)) - np.sin(1.0)
    assert np.max(np.abs(got - want)) < 1e-12
    # first derivative falls back to the integrand
    got1 = impl.deriv((1,), (z,))
    assert np.allclose(got1, np.cos(np.real(z)))
