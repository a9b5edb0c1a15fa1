"""Determining equations, classifying condition and invariant integers.

The classifying condition couples a potential V(t, x) with the canonical
coefficients (tau, kappa, chi, sigma, rho) of a would-be symmetry; its
residual vanishing (as a randomized identity) decides membership.  The
second-prolongation residual built from total derivatives provides the
independent oracle for the same decision.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .expr import (
    Expr,
    T_VAR,
    ZERO,
    conj_expr,
    const,
    diff,
    jet_var,
    psi,
    subst,
    sum_,
    total_derivative,
    var,
    x,
    x_var,
)
from .fields import (
    GeneratorCoeffs,
    VectorField,
    absx2,
    bracket_structural,
    coefficient_rows,
    rank_of_chi_block,
    _rank,
)
from .numeric import Binding, EMPTY_BINDING, is_zero

HALF = const(Fraction(1, 2))
I_U = const(0, 1)


@dataclass
class Potential:
    """Potential V(t, x): an expression without jet variables."""

    expr: Expr
    n: int = 2
    binding: Binding = field(default_factory=Binding)

    def __post_init__(self):
        if self.expr.jet_vars:
            raise ValueError("a potential must not contain jet variables")
        for v in self.expr.free_vars:
            if v.kind == "x" and v.a > self.n:
                raise ValueError("potential uses a space variable beyond dimension n")


def classifying_residual(V: Potential, g: GeneratorCoeffs) -> Expr:
    """LHS - RHS of the single classifying condition; zero iff g is admissible.

    tau V_t + (tau_t x_a / 2 + rotation + chi_a) V_a + tau_t V
      = tau_ttt |x|^2 / 8 + chi_a'' x_a / 2 + sigma_t - i rho_t - i (n/4) tau_tt
    (g.eta0 is ignored; it is constrained by the separate linear equation.)
    """
    if V.n != g.n:
        raise ValueError("dimension mismatch between potential and generator")
    n = g.n
    tau_t = diff(g.tau, T_VAR)
    tau_tt = diff(tau_t, T_VAR)
    tau_ttt = diff(tau_tt, T_VAR)
    xi_rot = g.rotation_xi()
    res = g.tau * diff(V.expr, T_VAR) + tau_t * V.expr
    for a in range(1, n + 1):
        xi_a = HALF * tau_t * x(a) + xi_rot[a - 1] + g.chi[a - 1]
        res = res + xi_a * diff(V.expr, x_var(a))
    res = res - const(Fraction(1, 8)) * tau_ttt * absx2(n)
    for a in range(1, n + 1):
        res = res - HALF * diff(diff(g.chi[a - 1], T_VAR), T_VAR) * x(a)
    res = res - diff(g.sigma, T_VAR) + I_U * diff(g.rho, T_VAR)
    res = res + const(0, Fraction(n, 4)) * tau_tt
    return res


def eta0_residual(V: Potential, eta0: Expr) -> Expr:
    """i eta0_t + eta0_aa + V eta0: zero iff eta0 solves the equation."""
    res = I_U * diff(eta0, T_VAR)
    for a in range(1, V.n + 1):
        res = res + diff(diff(eta0, x_var(a)), x_var(a))
    return res + V.expr * eta0


def prolonged_residual(V: Potential, f: VectorField) -> Expr:
    """Second-prolongation residual on the solution manifold.

    Builds eta^t and eta^{aa} by total derivatives, assembles
    i eta^t + eta^{aa} + (tau V_t + xi^a V_a) psi + V eta, and substitutes
    psi_t (and its conjugate) from the equation.  The result is an
    expression in the remaining jet variables; its vanishing as a
    randomized identity decides invariance.
    """
    if V.n != f.n:
        raise ValueError("dimension mismatch between potential and field")
    n = f.n
    zeros = (0,) * (n + 1)

    def jet(*orders):
        alpha = list(zeros)
        for d in orders:
            alpha[d] += 1
        return var(jet_var(alpha))

    psi0 = jet()
    psi_t = jet(0)
    W = f.coef_psi - f.coef_t * psi_t
    for a in range(1, n + 1):
        W = W - f.coef_x[a - 1] * jet(a)

    eta_t = total_derivative(W, 0) + f.coef_t * jet(0, 0)
    for a in range(1, n + 1):
        eta_t = eta_t + f.coef_x[a - 1] * jet(0, a)

    eta_lap = ZERO
    for a in range(1, n + 1):
        block = total_derivative(total_derivative(W, a), a) + f.coef_t * jet(0, a, a)
        for c in range(1, n + 1):
            block = block + f.coef_x[c - 1] * jet(a, a, c)
        eta_lap = eta_lap + block

    drift = f.coef_t * diff(V.expr, T_VAR)
    for a in range(1, n + 1):
        drift = drift + f.coef_x[a - 1] * diff(V.expr, x_var(a))

    res = I_U * eta_t + eta_lap + drift * psi0 + V.expr * f.coef_psi

    lap = sum_(jet(a, a) for a in range(1, n + 1))
    lap_c = conj_expr(lap)
    repl = {
        jet_var([1] + [0] * n): I_U * lap + I_U * V.expr * psi0,
        jet_var([1] + [0] * n, conj=True):
            const(0, -1) * lap_c + const(0, -1) * conj_expr(V.expr) * psi(n, conj=True),
    }
    return subst(res, repl)


# ---------------------------------------------------------------------------
# invariant integers
# ---------------------------------------------------------------------------

class InvariantTuple(NamedTuple):
    k0: int
    k1: int
    k2: int
    k3: int
    r0: int

    @property
    def dim(self) -> int:
        return self.k0 + self.k1 + self.k2 + self.k3

    def constraint_violations(self, n: int = 2) -> list[str]:
        """Structural constraints every admissible tuple must satisfy."""
        bad = []
        if self.k0 != 2:
            bad.append(f"k0={self.k0} but the kernel is two-dimensional")
        if (self.k2, self.r0) == (1, 1):
            bad.append("(k2, r0) = (1, 1) is impossible")
        if (self.k2, self.r0) != (0, 0) and self.k3 == 2:
            bad.append("k3=2 is impossible when (k2, r0) != (0, 0)")
        top = n * (n + 3) // 2 + 5
        if self.dim > top:
            bad.append(f"dim={self.dim} exceeds the bound {top}")
        if self.k0 + self.k1 > 2 * n + 2:
            bad.append(f"(P,M,I)-block dimension {self.k0 + self.k1} exceeds {2 * n + 2}")
        return bad


class SpanError(ValueError):
    """The generator list does not span an admissible algebra."""


def _row_in_span(rows: np.ndarray, b: np.ndarray, tol: float) -> bool:
    if rows.shape[0] == 0:
        return float(np.linalg.norm(b)) <= tol
    sol, *_ = np.linalg.lstsq(rows.T, b, rcond=None)
    resid = rows.T @ sol - b
    return float(np.linalg.norm(resid)) <= tol * (1.0 + float(np.linalg.norm(b)))


def invariants(gs: Sequence[GeneratorCoeffs], binding: Optional[Binding] = None,
               rng: Optional[np.random.Generator] = None, tol: float = 1e-8,
               check_closure: bool = True) -> InvariantTuple:
    """Invariant integers (k0, k1, k2, k3, r0) of the span of gs.

    Requires the span to be closed under the bracket and to contain the
    phase-rotation and scaling generators; raises SpanError otherwise.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    binding = binding or EMPTY_BINDING
    if not gs:
        raise SpanError("empty generator list")
    n = gs[0].n
    if any(g.eta0 is not None for g in gs):
        raise SpanError("invariants are defined for the essential part (eta0 = 0)")
    tvals = rng.uniform(0.32, 1.68, size=13)
    rows, slices = coefficient_rows(gs, binding, tvals)
    dim = _rank(rows, tol)

    from .fields import M as Mgen, Iop

    for probe, name in ((Mgen(1, n), "M"), (Iop(1, n), "I")):
        prow, _ = coefficient_rows([probe], binding, tvals)
        if not _row_in_span(rows, prow[0], max(tol, 1e-7)):
            raise SpanError(f"{name} is missing from the span")

    if check_closure:
        for i in range(len(gs)):
            for j in range(i + 1, len(gs)):
                br = bracket_structural(gs[i], gs[j])
                brow, _ = coefficient_rows([br], binding, tvals)
                if not _row_in_span(rows, brow[0], max(tol, 1e-7)):
                    raise SpanError(f"span is not closed under the bracket "
                                    f"(generators {i} and {j})")

    rank_tau = _rank(rows[:, slices["tau"]], tol)
    rank_tau_kappa = _rank(np.hstack([rows[:, slices["tau"]], rows[:, slices["kappa"]]]), tol)
    rank_tkc = _rank(np.hstack([rows[:, slices["tau"]], rows[:, slices["kappa"]],
                                rows[:, slices["chi"]]]), tol)
    k0 = dim - rank_tkc
    k1 = (dim - rank_tau_kappa) - k0
    k2 = (dim - rank_tau) - k1 - k0
    k3 = rank_tau
    r0 = rank_of_chi_block(gs, binding, rng, tol)
    return InvariantTuple(k0, k1, k2, k3, r0)


def span_contains(gs: Sequence[GeneratorCoeffs], g: GeneratorCoeffs,
                  binding: Optional[Binding] = None,
                  rng: Optional[np.random.Generator] = None, tol: float = 1e-7) -> bool:
    if rng is None:
        rng = np.random.default_rng(0)
    binding = binding or EMPTY_BINDING
    tvals = rng.uniform(0.32, 1.68, size=13)
    rows, _ = coefficient_rows(list(gs), binding, tvals)
    grow, _ = coefficient_rows([g], binding, tvals)
    return _row_in_span(rows, grow[0], tol)


# ---------------------------------------------------------------------------
# kernel check and lemma fixtures
# ---------------------------------------------------------------------------

def kernel_check(rng: Optional[np.random.Generator] = None, n: int = 2,
                 potentials: int = 4, tol: float = 1e-8) -> bool:
    """True iff M and I annihilate the classifying residual for random
    potentials while no other single elementary generator does."""
    from .expr import FunctionSymbol, func_app, t as t_expr
    from .fields import D, J, M as Mgen, Iop, P

    if rng is None:
        rng = np.random.default_rng(0)
    sym = FunctionSymbol("V_probe", n + 1, "complex")
    Vexpr = func_app(sym, (t_expr(),) + tuple(x(a) for a in range(1, n + 1)))
    V = Potential(Vexpr, n)

    for good in (Mgen(1, n), Iop(1, n)):
        res = classifying_residual(V, good)
        if not is_zero(res, trials=3, points=60, rng=rng, tol=tol):
            return False

    others = [D(1, n), D(var(T_VAR), n), P(*([1] + [0] * (n - 1)), n=n)]
    if n >= 2:
        others.append(J(1, 2, n))
    for bad in others:
        res = classifying_residual(V, bad)
        ok_somewhere = False
        for _ in range(potentials):
            if not is_zero(res, trials=1, points=40, rng=rng, tol=tol):
                ok_somewhere = True
                break
        if not ok_somewhere:
            return False
    return True


def lemma_fixtures(rng: Optional[np.random.Generator] = None, tol: float = 1e-8) -> dict:
    """Two structural facts about generalized-shift generators at n=2.

    1. If P(1,0) + rho1 I is a symmetry of V = U(t, x2) - i rho1' x1, then
       P(t,0) + rho2 I with rho2' = t rho1' is one as well.
    2. A shift generator with independent chi components is carried by a
       time reparameterization and a shift to the normal form
       P(h cos t, h sin t) + rho I (sigma part numerically zero).
    """
    from . import equivalence as eq
    from .closedform import exppoly_to_expr
    from .expr import func_app, int_pow, t as t_expr
    from .fields import Iop, P
    from .funcbank import (ExpPoly, ExpPolyImpl, random_positive_trig_poly,
                           random_trig_poly)
    from .numeric import AntiderivImpl, Workspace

    if rng is None:
        rng = np.random.default_rng(0)
    report: dict = {}

    # -- lemma on the induced P(t,0) symmetry
    ws = Workspace()
    r1_poly = random_trig_poly(rng, "real")
    r1 = ws.declare("rho1", 1, "real", ExpPolyImpl(r1_poly))
    integrand = ExpPoly.identity() * r1_poly.derivative()  # t * rho1'
    r2 = ws.declare("rho2", 1, "real", ExpPolyImpl(integrand.antiderivative()))
    Usym = ws.declare("U_l8", 2, "complex")
    r1_app = func_app(r1, [t_expr()])
    Vexpr = func_app(Usym, [t_expr(), x(2)]) - I_U * diff(r1_app, T_VAR) * x(1)
    V = Potential(Vexpr, 2, ws.binding)
    g1 = P(1, 0).add(Iop(r1_app, 2))
    g2 = P(var(T_VAR), 0).add(Iop(func_app(r2, [t_expr()]), 2))
    ok1 = is_zero(classifying_residual(V, g1), binding=ws.binding, rng=rng, tol=tol)
    ok2 = is_zero(classifying_residual(V, g2), binding=ws.binding, rng=rng, tol=tol)
    report["shift_pair"] = {"base_symmetry": ok1, "induced_symmetry": ok2,
                            "passed": ok1 and ok2}

    # -- lemma on reduction to P(h cos t, h sin t) + rho I
    ws2 = Workspace()
    h_poly = random_positive_trig_poly(rng)
    theta_poly = ExpPoly.identity() + random_trig_poly(rng, "real").scale(0.15)
    h_expr = exppoly_to_expr(h_poly)
    theta_expr = exppoly_to_expr(theta_poly)
    cosT = func_app(ws2.table.get("cos"), [theta_expr])
    sinT = func_app(ws2.table.get("sin"), [theta_expr])
    sigma_expr = exppoly_to_expr(random_trig_poly(rng, "real"))
    rho_expr = exppoly_to_expr(random_trig_poly(rng, "real"))
    g = P(h_expr * cosT, h_expr * sinT)
    g = GeneratorCoeffs(2, g.tau, g.kappa, g.chi, sigma_expr, rho_expr, None)

    trD = eq.EquivTransformation.elementary_D(theta_expr, 2, ws2)
    g_mid = eq.pushforward(g, trD)
    # kill the remaining sigma part with a shift X = lambda(t) * chi
    tinv_app = trD.tinv_app()
    sig_til = g_mid.sigma
    h2_til = subst(abs_pow_expr(diff(theta_expr, T_VAR)) * h_expr * h_expr,
                   {T_VAR: tinv_app})
    lam_integrand = const(-2) * sig_til * int_pow(h2_til, -1)
    lam = ws2.declare(ws2.fresh_name("lam"), 1, "real",
                      AntiderivImpl(lam_integrand, ws2.binding))
    lam_app = func_app(lam, [t_expr()])
    Xshift = (lam_app * g_mid.chi[0], lam_app * g_mid.chi[1])
    trP = eq.EquivTransformation.elementary_P(Xshift, 2, ws2)
    g_out = eq.pushforward(g_mid, trP)

    cos_t = func_app(ws2.table.get("cos"), [t_expr()])
    sin_t = func_app(ws2.table.get("sin"), [t_expr()])
    form = g_out.chi[0] * sin_t - g_out.chi[1] * cos_t
    ok_form = is_zero(form, binding=ws2.binding, rng=rng, tol=tol)
    ok_sigma = is_zero(g_out.sigma, binding=ws2.binding, rng=rng, tol=max(tol, 1e-8))
    ok_tau = g_out.tau is ZERO and all(k == 0 for k in g_out.kappa)
    report["polar_reduction"] = {"target_form": ok_form, "sigma_killed": ok_sigma,
                                 "no_tau_kappa": ok_tau,
                                 "passed": ok_form and ok_sigma and ok_tau}
    report["passed"] = report["shift_pair"]["passed"] and report["polar_reduction"]["passed"]
    return report


def abs_pow_expr(e: Expr) -> Expr:
    from .expr import abs_pow

    return abs_pow(e, Fraction(1))
