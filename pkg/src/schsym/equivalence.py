"""Admissible transformations, their action on potentials, and pushforwards.

A transformation is the tuple (T, O, X, Sigma, Upsilon, Lambda): a time
reparameterization with T_t != 0, a constant orthogonal matrix, a
time-dependent shift, phase and amplitude adjustments, and an optional
solution summand (used only in groupoid fixtures; it does not act on the
potential).  The action on potentials composes the closed-form target
potential with the inverse variable map; inverse time maps are fresh
function symbols evaluated by root finding with derivatives from series
inversion.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .conditions import Potential
from .expr import (
    Expr,
    T_VAR,
    ZERO,
    abs_pow,
    as_expr,
    conj_expr,
    const,
    diff,
    func_app,
    im_part,
    int_pow,
    subst,
    sum_,
    t as t_expr,
    var,
    x,
    x_var,
)
from .fields import GeneratorCoeffs, _pairs
from .numeric import (
    Binding,
    InverseImpl,
    T_RANGE,
    Workspace,
    draw_env,
    eval_batch,
    is_zero,
)

HALF = const(Fraction(1, 2))
I_U = const(0, 1)

_TINV_COUNTER = itertools.count(1)


class NonElementaryError(ValueError):
    """pushforward requires a single-parameter elementary transformation."""


class UndecidableTemplate(ValueError):
    """Free-equation reducibility cannot be decided for this template."""


def _identity_matrix(n: int):
    return tuple(tuple(Fraction(1) if i == j else Fraction(0) for j in range(n))
                 for i in range(n))


def rational_rotation(m: Fraction, n: int = 2, det: int = 1):
    """Exactly orthogonal 2x2 matrix from a rational circle point.

    (cos, sin) = ((1-m^2)/(1+m^2), 2m/(1+m^2)); det=-1 flips the second row.
    """
    m = Fraction(m)
    c = (1 - m * m) / (1 + m * m)
    s = 2 * m / (1 + m * m)
    if det == 1:
        return ((c, -s), (s, c))
    return ((c, -s), (-s, -c))


@dataclass
class EquivTransformation:
    """One admissible-map candidate (T, O, X, Sigma, Upsilon, Lambda)."""

    n: int
    T: Expr
    O: tuple[tuple[Fraction, ...], ...]
    X: tuple[Expr, ...]
    Sigma: Expr
    Upsilon: Expr
    Lam: Optional[Expr] = None
    binding: Binding = field(default_factory=Binding)
    bracket: tuple[float, float] = (-60.0, 60.0)
    eps: int = 0
    _tinv_sym: object = None

    def __post_init__(self):
        if len(self.X) != self.n or len(self.O) != self.n:
            raise ValueError("dimension mismatch in transformation data")
        from .expr import depends_only_on_t

        for name, e in (("T", self.T), ("Sigma", self.Sigma),
                        ("Upsilon", self.Upsilon),
                        *((f"X{i+1}", c) for i, c in enumerate(self.X))):
            if not depends_only_on_t(e) or not e.is_real:
                raise ValueError(f"{name} must be a real-valued function of t")
        if self.Lam is not None and self.Lam.jet_vars:
            raise ValueError("Lam must be a function of (t, x)")
        Om = np.array([[float(v) for v in row] for row in self.O])
        if np.max(np.abs(Om @ Om.T - np.eye(self.n))) > 1e-12:
            raise ValueError("O is not orthogonal")
        if self.eps == 0:
            self.eps = self._infer_eps()

    def _infer_eps(self) -> int:
        tt = diff(self.T, T_VAR)
        env = {T_VAR: np.linspace(*T_RANGE, 33).astype(complex)}
        vals, _, _ = eval_batch(tt, self.binding, env)
        r = np.real(vals)
        if np.min(np.abs(r)) < 1e-9:
            raise ValueError("T_t vanishes on the sample domain")
        if (r > 0).all():
            return 1
        if (r < 0).all():
            return -1
        raise ValueError("T_t changes sign on the sample domain")

    # -- constructors

    @staticmethod
    def identity(n: int = 2) -> "EquivTransformation":
        return EquivTransformation(n, t_expr(), _identity_matrix(n),
                                   (ZERO,) * n, ZERO, ZERO)

    @staticmethod
    def elementary_D(T: Expr, n: int = 2, ws: Optional[Workspace] = None,
                     bracket=(-60.0, 60.0)) -> "EquivTransformation":
        b = ws.binding if ws is not None else Binding()
        return EquivTransformation(n, T, _identity_matrix(n), (ZERO,) * n,
                                   ZERO, ZERO, binding=b, bracket=bracket)

    @staticmethod
    def elementary_J(O, n: int = 2) -> "EquivTransformation":
        return EquivTransformation(n, t_expr(), tuple(tuple(row) for row in O),
                                   (ZERO,) * n, ZERO, ZERO)

    @staticmethod
    def elementary_P(X: Sequence[Expr], n: int = 2,
                     ws: Optional[Workspace] = None) -> "EquivTransformation":
        # the elementary shift carries the canonical phase Sigma = X . X_t / 4,
        # which is what makes the closed-form pushforward rules exact
        b = ws.binding if ws is not None else Binding()
        Xe = tuple(as_expr(c) for c in X)
        return EquivTransformation(n, t_expr(), _identity_matrix(n), Xe,
                                   _canonical_shift_sigma(Xe), ZERO, binding=b)

    @staticmethod
    def elementary_M(Sigma: Expr, n: int = 2,
                     ws: Optional[Workspace] = None) -> "EquivTransformation":
        b = ws.binding if ws is not None else Binding()
        return EquivTransformation(n, t_expr(), _identity_matrix(n), (ZERO,) * n,
                                   as_expr(Sigma), ZERO, binding=b)

    @staticmethod
    def elementary_I(Upsilon: Expr, n: int = 2,
                     ws: Optional[Workspace] = None) -> "EquivTransformation":
        b = ws.binding if ws is not None else Binding()
        return EquivTransformation(n, t_expr(), _identity_matrix(n), (ZERO,) * n,
                                   ZERO, as_expr(Upsilon), binding=b)

    # -- derived data

    def is_trivial_T(self) -> bool:
        return self.T is t_expr()

    def tinv_app(self) -> Expr:
        """FuncApp of the inverse time map applied to t."""
        if self._tinv_sym is None:
            from .expr import FunctionSymbol

            name = f"Tinv{next(_TINV_COUNTER)}"
            sym = FunctionSymbol(name, 1, "real")
            self.binding.bind(sym, InverseImpl(self.T, self.binding, self.bracket))
            self._tinv_sym = sym
        return func_app(self._tinv_sym, [t_expr()])

    def elementary_kind(self) -> Optional[str]:
        nontrivial = []
        if not self.is_trivial_T():
            nontrivial.append("D")
        if self.O != _identity_matrix(self.n):
            nontrivial.append("J")
        if any(c is not ZERO for c in self.X):
            nontrivial.append("P")
        if self.Sigma is not _canonical_shift_sigma(self.X):
            nontrivial.append("M")
        if self.Upsilon is not ZERO:
            nontrivial.append("I")
        if len(nontrivial) > 1:
            return None
        return nontrivial[0] if nontrivial else "id"


def _canonical_shift_sigma(X: Sequence[Expr]) -> Expr:
    return const(Fraction(1, 4)) * sum_(c * diff(c, T_VAR) for c in X)


def _o_apply(O, vec: Sequence[Expr]) -> tuple[Expr, ...]:
    n = len(vec)
    return tuple(sum_(const(O[a][b]) * vec[b] for b in range(n) if O[a][b] != 0)
                 for a in range(n))


def _o_transpose(O):
    n = len(O)
    return tuple(tuple(O[b][a] for b in range(n)) for a in range(n))


def _dot(u: Sequence[Expr], v: Sequence[Expr]) -> Expr:
    return sum_(a * b for a, b in zip(u, v))


def act_on_potential(V: Potential, tr: EquivTransformation) -> Potential:
    """Target potential, expressed in the target variables.

    The closed-form target value at the source point is composed with the
    inverse variable map; the source potential is conjugated when T_t < 0.
    """
    n = V.n
    if n != tr.n:
        raise ValueError("dimension mismatch")
    Tt = diff(tr.T, T_VAR)
    Ttt = diff(Tt, T_VAR)
    Tttt = diff(Ttt, T_VAR)
    eps = tr.eps
    abs_tt = abs_pow(Tt, 1)
    inv_tt = int_pow(Tt, -1)

    Vhat = V.expr if eps > 0 else conj_expr(V.expr)
    x2 = sum_(x(a) * x(a) for a in range(1, n + 1))

    out = Vhat * int_pow(abs_tt, -1)
    out = out + const(Fraction(eps, 16)) * (2 * Tttt * Tt - 3 * Ttt * Ttt) \
        * int_pow(Tt, -3) * x2
    shift = ZERO
    for b in range(1, n + 1):
        rate = diff(diff(tr.X[b - 1], T_VAR) * inv_tt, T_VAR)
        row = sum_(const(tr.O[b - 1][a - 1]) * x(a)
                   for a in range(1, n + 1) if tr.O[b - 1][a - 1] != 0)
        shift = shift + rate * row
    out = out + const(Fraction(eps, 2)) * abs_pow(Tt, Fraction(-1, 2)) * shift
    out = out + (diff(tr.Sigma, T_VAR) - I_U * diff(tr.Upsilon, T_VAR)) * inv_tt
    xdots = sum_(diff(c, T_VAR) * diff(c, T_VAR) for c in tr.X)
    out = out - (xdots + const(0, n) * Ttt) * const(Fraction(1, 4)) * int_pow(Tt, -2)

    # source coordinates in terms of target ones: x_b = (O^T (xt - X))_b / s
    s_inv = abs_pow(Tt, Fraction(-1, 2))
    xmap = {}
    for b in range(1, n + 1):
        acc = ZERO
        for a in range(1, n + 1):
            if tr.O[a - 1][b - 1] != 0:
                acc = acc + const(tr.O[a - 1][b - 1]) * (x(a) - tr.X[a - 1])
        xmap[x_var(b)] = acc * s_inv
    out = subst(out, xmap)
    out = subst(out, {T_VAR: tr.tinv_app()})
    return Potential(out, n, V.binding.merged(tr.binding))


@dataclass
class AdmissibleTransformation:
    """Source potential, transformation, target potential."""

    source: Potential
    map: EquivTransformation
    target: Potential

    @staticmethod
    def create(source: Potential, tr: EquivTransformation) -> "AdmissibleTransformation":
        return AdmissibleTransformation(source, tr, act_on_potential(source, tr))


def potentials_agree(V1: Potential, V2: Potential, rng=None, tol: float = 1e-8,
                     points: int = 60) -> bool:
    d = V1.expr - V2.expr
    return is_zero(d, trials=2, points=points, tol=tol,
                   binding=V1.binding.merged(V2.binding), rng=rng)


def compose(t1: AdmissibleTransformation, t2: AdmissibleTransformation,
            validate: bool = True, rng=None, tol: float = 1e-8) -> AdmissibleTransformation:
    """Parameter-level composition (apply t1, then t2)."""
    tr1, tr2 = t1.map, t2.map
    n = tr1.n
    if tr1.Lam is not None or tr2.Lam is not None:
        raise ValueError("composition with solution summands is not supported")
    if validate and not potentials_agree(t1.target, t2.source, rng=rng, tol=max(tol, 1e-7)):
        raise ValueError("transformations are not composable: target != source")

    def after1(e: Expr) -> Expr:
        return subst(e, {T_VAR: tr1.T})

    T2t = diff(tr2.T, T_VAR)
    T = after1(tr2.T)
    O = tuple(tuple(sum(tr2.O[a][c] * tr1.O[c][b] for c in range(n))
                    for b in range(n)) for a in range(n))
    s2_c = after1(abs_pow(T2t, Fraction(1, 2)))
    o2x1 = _o_apply(tr2.O, tr1.X)
    X = tuple(s2_c * o2x1[a] + after1(tr2.X[a]) for a in range(n))
    eps2 = tr2.eps

    phase2_quad = after1(const(Fraction(1, 8)) * diff(T2t, T_VAR) * int_pow(abs_pow(T2t, 1), -1))
    rate2 = tuple(after1(diff(c, T_VAR) * abs_pow(T2t, Fraction(-1, 2)))
                  for c in tr2.X)
    Sigma = after1(tr2.Sigma) + const(eps2) * tr1.Sigma \
        + phase2_quad * _dot(tr1.X, tr1.X) \
        + const(Fraction(eps2, 2)) * _dot(rate2, o2x1)
    Upsilon = after1(tr2.Upsilon) + tr1.Upsilon

    out = EquivTransformation(n, T, O, X, Sigma, Upsilon,
                              binding=tr1.binding.merged(tr2.binding),
                              bracket=tr1.bracket)
    composed = AdmissibleTransformation(t1.source, out, t2.target)
    if validate:
        direct = act_on_potential(t1.source, out)
        if not potentials_agree(direct, t2.target, rng=rng, tol=max(tol, 1e-7)):
            raise ValueError("parameter-level composition disagrees with "
                             "potential-level composition")
    return composed


def invert(t: AdmissibleTransformation, validate: bool = True, rng=None,
           tol: float = 1e-8) -> AdmissibleTransformation:
    """Inverse admissible transformation with swapped source and target."""
    tr = t.map
    n = tr.n
    if tr.Lam is not None:
        raise ValueError("inversion with solution summands is not supported")
    tinv = tr.tinv_app()
    Tt = diff(tr.T, T_VAR)
    abs_tt = abs_pow(Tt, 1)
    eps = tr.eps

    def comp(e: Expr) -> Expr:
        return subst(e, {T_VAR: tinv})

    Oi = _o_transpose(tr.O)
    s_inv_src = abs_pow(Tt, Fraction(-1, 2))
    otx = _o_apply(Oi, tr.X)
    Xi = tuple(comp(const(-1) * otx[a] * s_inv_src) for a in range(n))
    xdotx = _dot(tuple(diff(c, T_VAR) for c in tr.X), tr.X)
    inner = tr.Sigma \
        + const(Fraction(1, 8)) * diff(Tt, T_VAR) * int_pow(abs_tt, -1) \
        * _dot(tr.X, tr.X) * int_pow(abs_tt, -1) \
        - const(Fraction(eps, 2)) * xdotx * int_pow(abs_tt, -1)
    Sigma_i = const(-eps) * comp(inner)
    Upsilon_i = const(-1) * comp(tr.Upsilon)

    out = EquivTransformation(n, tinv, Oi, Xi, Sigma_i, Upsilon_i,
                              binding=tr.binding, bracket=tr.bracket, eps=eps)
    result = AdmissibleTransformation(t.target, out, t.source)
    if validate:
        back = act_on_potential(t.target, out)
        if not potentials_agree(back, t.source, rng=rng, tol=max(tol, 1e-7)):
            raise ValueError("inverse transformation fails the round trip")
    return result


# ---------------------------------------------------------------------------
# pushforwards of canonical generators by elementary transformations
# ---------------------------------------------------------------------------

def pushforward(g: GeneratorCoeffs, tr: EquivTransformation) -> GeneratorCoeffs:
    """Closed-form image of a canonical generator under one elementary map."""
    if g.eta0 is not None:
        raise ValueError("pushforward is defined for the essential part (eta0 = 0)")
    kind = tr.elementary_kind()
    if kind is None:
        raise NonElementaryError("transformation mixes several elementary kinds")
    n = g.n
    if kind == "id":
        return g
    if kind == "D":
        tinv = tr.tinv_app()
        Tt = diff(tr.T, T_VAR)

        def comp(e: Expr) -> Expr:
            return subst(e, {T_VAR: tinv})

        tau = comp(Tt * g.tau)
        chi = tuple(comp(abs_pow(Tt, Fraction(1, 2)) * c) for c in g.chi)
        return GeneratorCoeffs(n, tau, g.kappa, chi, comp(g.sigma), comp(g.rho), None)
    if kind == "J":
        O = tr.O
        chi = _o_apply(O, g.chi)
        K = g.kappa_matrix()
        OK = [[sum(O[a][c] * K[c][b] for c in range(n)) for b in range(n)]
              for a in range(n)]
        OKOt = [[sum(OK[a][c] * O[b][c] for c in range(n)) for b in range(n)]
                for a in range(n)]
        kappa = tuple(OKOt[b - 1][a - 1] for a, b in _pairs(n))
        return GeneratorCoeffs(n, g.tau, kappa, chi, g.sigma, g.rho, None)
    if kind == "P":
        X = tr.X
        Xt = tuple(diff(c, T_VAR) for c in X)
        Xtt = tuple(diff(c, T_VAR) for c in Xt)
        tau_t = diff(g.tau, T_VAR)
        tau_tt = diff(tau_t, T_VAR)
        chi = list(g.chi)
        sigma = g.sigma
        # D(tau) part
        for a in range(n):
            chi[a] = chi[a] + g.tau * Xt[a] - HALF * tau_t * X[a]
        sigma = sigma + const(Fraction(1, 8)) * tau_tt * _dot(X, X) \
            - const(Fraction(1, 4)) * tau_t * _dot(X, Xt) \
            - const(Fraction(1, 4)) * g.tau * (_dot(X, Xtt) - _dot(Xt, Xt))
        # J part: the shift tuple picks up -K X (hat-X of the listed rule)
        K = g.kappa_matrix()
        for a in range(n):
            chi[a] = chi[a] - sum_(const(K[a][b]) * X[b] for b in range(n))
        for (a, b), kab in zip(_pairs(n), g.kappa):
            if kab != 0:
                sigma = sigma - const(kab) * HALF * (X[a - 1] * Xt[b - 1] - X[b - 1] * Xt[a - 1])
        # P part
        sigma = sigma + HALF * (_dot(g.chi, Xt) - _dot(tuple(diff(c, T_VAR) for c in g.chi), X))
        return GeneratorCoeffs(n, g.tau, g.kappa, tuple(chi), sigma, g.rho, None)
    if kind == "M":
        return GeneratorCoeffs(n, g.tau, g.kappa, g.chi,
                               g.sigma + g.tau * diff(tr.Sigma, T_VAR), g.rho, None)
    if kind == "I":
        return GeneratorCoeffs(n, g.tau, g.kappa, g.chi, g.sigma,
                               g.rho + g.tau * diff(tr.Upsilon, T_VAR), None)
    raise NonElementaryError(kind)


# ---------------------------------------------------------------------------
# the equivalence-algebra generators and their infinitesimal check
# ---------------------------------------------------------------------------

@dataclass
class EquivGenerator:
    """One family of equivalence-algebra generators with its dV coefficient."""

    kind: str  # 'D' | 'J' | 'P' | 'M' | 'I'
    n: int
    tau: Expr = ZERO
    chi: tuple[Expr, ...] = ()
    sigma: Expr = ZERO
    rho: Expr = ZERO

    def theta(self, V: Potential) -> Expr:
        """The dV coefficient evaluated on a potential V."""
        n = self.n
        if self.kind == "D":
            tau_t = diff(self.tau, T_VAR)
            tau_tt = diff(tau_t, T_VAR)
            tau_ttt = diff(tau_tt, T_VAR)
            x2 = sum_(x(a) * x(a) for a in range(1, n + 1))
            return const(-1) * tau_t * V.expr + const(Fraction(1, 8)) * tau_ttt * x2 \
                - const(0, Fraction(n, 4)) * tau_tt
        if self.kind == "J":
            return ZERO
        if self.kind == "P":
            return HALF * sum_(diff(diff(self.chi[a - 1], T_VAR), T_VAR) * x(a)
                               for a in range(1, n + 1))
        if self.kind == "M":
            return diff(self.sigma, T_VAR)
        if self.kind == "I":
            return const(0, -1) * diff(self.rho, T_VAR)
        raise ValueError(self.kind)

    def projection(self) -> GeneratorCoeffs:
        """Pushforward to the variable space: the matching canonical generator."""
        from .fields import D, J, M as Mgen, Iop, P

        if self.kind == "D":
            return D(self.tau, self.n)
        if self.kind == "J":
            return J(1, 2, self.n)
        if self.kind == "P":
            return P(*self.chi, n=self.n)
        if self.kind == "M":
            return Mgen(self.sigma, self.n)
        return Iop(self.rho, self.n)

    def family(self, delta: float, ws: Workspace) -> EquivTransformation:
        """The one-parameter transformation family at parameter value delta."""
        n = self.n
        d = const(Fraction(delta))
        if self.kind == "D":
            return EquivTransformation.elementary_D(t_expr() + d * self.tau, n, ws)
        if self.kind == "J":
            O = _rotation_float(delta)
            return EquivTransformation.elementary_J(O, n)
        if self.kind == "P":
            return EquivTransformation.elementary_P(tuple(d * c for c in self.chi), n, ws)
        if self.kind == "M":
            return EquivTransformation.elementary_M(d * self.sigma, n, ws)
        return EquivTransformation.elementary_I(d * self.rho, n, ws)


def _rotation_float(angle: float):
    c = Fraction(float(np.cos(angle)))
    s = Fraction(float(np.sin(angle)))
    # not exactly orthogonal; renormalize within 1e-12 by construction
    r = (c * c + s * s)
    return ((c, -s), (s, c)) if abs(float(r) - 1.0) < 1e-12 else _normalize_rot(c, s)


def _normalize_rot(c: Fraction, s: Fraction):
    norm = float(c * c + s * s) ** 0.5
    cf = Fraction(float(c) / norm)
    sf = Fraction(float(s) / norm)
    return ((cf, -sf), (sf, cf))


def pullback_along(Vt: Potential, tr: EquivTransformation) -> Expr:
    """Transformed potential seen along the flow: Vt composed with the
    forward variable map (t, x) -> (T, |T_t|^(1/2) O x + X)."""
    n = tr.n
    s = abs_pow(diff(tr.T, T_VAR), Fraction(1, 2))
    fwd = {}
    for a in range(1, n + 1):
        acc = ZERO
        for b in range(1, n + 1):
            if tr.O[a - 1][b - 1] != 0:
                acc = acc + const(tr.O[a - 1][b - 1]) * x(b)
        fwd[x_var(a)] = s * acc + tr.X[a - 1]
    out = subst(Vt.expr, fwd)
    return subst(out, {T_VAR: tr.T})


def equiv_generator_check(gen: EquivGenerator, V: Potential,
                          rng: Optional[np.random.Generator] = None,
                          delta: float = 1e-5, tol: float = 1e-4,
                          points: int = 24) -> bool:
    """Finite-difference dV coefficient versus the closed form.

    Central difference, along the one-parameter family at delta = 0, of the
    transformed potential evaluated at the flowed point (so the variable
    transport does not enter), compared with the closed-form dV coefficient
    at random sample points with relative tolerance tol.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    ws = Workspace()
    ws.binding = ws.binding.merged(V.binding)
    trp = gen.family(+delta, ws)
    trm = gen.family(-delta, ws)
    plus = act_on_potential(V, trp)
    minus = act_on_potential(V, trm)
    ep = pullback_along(plus, trp)
    em = pullback_along(minus, trm)
    theta = gen.theta(V)
    vars_needed = ep.free_vars | em.free_vars | theta.free_vars
    env = draw_env(vars_needed, points, rng)
    vp, _, up = eval_batch(ep, plus.binding, env)
    vm, _, um = eval_batch(em, minus.binding, env)
    th, _, ut = eval_batch(theta, V.binding, env)
    good = ~(up | um | ut)
    if not good.any():
        raise RuntimeError("no safe sample points for the generator check")
    fd = (vp - vm) / (2.0 * delta)
    err = np.abs(fd - th)[good]
    ref = 1.0 + np.abs(th)[good]
    return bool(np.max(err / ref) < tol)


def standard_equiv_generators(rng: Optional[np.random.Generator] = None,
                              n: int = 2) -> list[EquivGenerator]:
    """One random representative per family of the equivalence algebra."""
    from .closedform import exppoly_to_expr
    from .funcbank import random_trig_poly

    if rng is None:
        rng = np.random.default_rng(0)

    def fn():
        return exppoly_to_expr(random_trig_poly(rng, "real"))

    return [
        EquivGenerator("D", n, tau=fn()),
        EquivGenerator("J", n),
        EquivGenerator("P", n, chi=tuple(fn() for _ in range(n))),
        EquivGenerator("M", n, sigma=fn()),
        EquivGenerator("I", n, rho=fn()),
    ]


# ---------------------------------------------------------------------------
# real-potential subclass and free-equation reducibility
# ---------------------------------------------------------------------------

def is_real_admissible(tr: EquivTransformation, n: int,
                       rng: Optional[np.random.Generator] = None,
                       tol: float = 1e-8) -> bool:
    """True iff Upsilon_t + n T_tt / (4 T_t) vanishes on the sample domain."""
    Tt = diff(tr.T, T_VAR)
    expr = diff(tr.Upsilon, T_VAR) * Tt + const(Fraction(n, 4)) * diff(Tt, T_VAR)
    return is_zero(expr, trials=3, points=60, binding=tr.binding, rng=rng, tol=tol)


def is_free_reducible(V: Potential, rng: Optional[np.random.Generator] = None,
                      tol: float = 1e-8) -> bool:
    """Whether V has the quadratic-in-x shape mappable to the free equation.

    Raises UndecidableTemplate when V contains function symbols applied to
    space variables (the x-profile is then not polynomial-detectable).
    """
    if rng is None:
        rng = np.random.default_rng(0)
    n = V.n
    for sub in _funcapps(V.expr):
        for arg in sub.args:
            if any(v.kind == "x" for v in arg.free_vars):
                raise UndecidableTemplate(
                    f"potential applies {sub.sym.name} to space variables")

    def zero(e: Expr) -> bool:
        return is_zero(e, trials=3, points=60, binding=V.binding, rng=rng, tol=tol)

    for a in range(1, n + 1):
        for b in range(a, n + 1):
            for c in range(b, n + 1):
                third = diff(diff(diff(V.expr, x_var(a)), x_var(b)), x_var(c))
                if not zero(third):
                    return False
    for a in range(1, n + 1):
        for b in range(a + 1, n + 1):
            if not zero(diff(diff(V.expr, x_var(a)), x_var(b))):
                return False
    h11 = diff(diff(V.expr, x_var(1)), x_var(1))
    for a in range(2, n + 1):
        if not zero(h11 - diff(diff(V.expr, x_var(a)), x_var(a))):
            return False
    for a in range(1, n + 1):
        if not zero(im_part(diff(V.expr, x_var(a)))):
            return False
    return True


def _funcapps(e: Expr):
    from .expr import FuncApp

    seen = set()
    stack = [e]
    while stack:
        u = stack.pop()
        if id(u) in seen:
            continue
        seen.add(id(u))
        if isinstance(u, FuncApp):
            yield u
        stack.extend(u.children())
