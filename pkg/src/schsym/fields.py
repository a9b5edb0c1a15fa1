"""Canonical symmetry vector fields and their Lie-algebra structure.

A generator is stored in the canonical coefficient form
(tau, kappa, chi, sigma, rho, eta0): time component tau(t), rotation
coefficients kappa_ab (a<b, multiplying J_ab = x_a d_b - x_b d_a),
generalized-shift tuple chi(t), phase part sigma(t), scaling part rho(t)
and an optional inhomogeneous part eta0(t, x).

Brackets come in two flavors: the closed-form structural bracket on
canonical data, and the generic commutator of first-order operators on
(t, x, psi, psi*), used as an independent oracle for the former.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .expr import (
    Expr,
    T_VAR,
    ZERO,
    as_expr,
    conj_expr,
    const,
    depends_only_on_t,
    diff,
    has_complex_symbols,
    jet_var,
    psi,
    sum_,
    var,
    x,
    x_var,
)
from .numeric import Binding, EMPTY_BINDING, draw_env, eval_batch

HALF = const(Fraction(1, 2))
I8 = const(0, Fraction(1, 8))  # i/8
I2 = const(0, Fraction(1, 2))  # i/2
IU = const(0, 1)


def _pairs(n: int) -> list[tuple[int, int]]:
    return [(a, b) for a in range(1, n + 1) for b in range(a + 1, n + 1)]


@dataclass(frozen=True)
class GeneratorCoeffs:
    """Canonical Lie-symmetry vector field data at space dimension n."""

    n: int
    tau: Expr
    kappa: tuple[Fraction, ...]  # strict upper triangle, (1,2),(1,3),...,(n-1,n)
    chi: tuple[Expr, ...]
    sigma: Expr
    rho: Expr
    eta0: Optional[Expr] = None

    def __post_init__(self):
        if len(self.chi) != self.n:
            raise ValueError("chi must have n components")
        if len(self.kappa) != len(_pairs(self.n)):
            raise ValueError("kappa must list the strict upper triangle")
        for name, e in (("tau", self.tau), ("sigma", self.sigma), ("rho", self.rho),
                        *((f"chi{i+1}", c) for i, c in enumerate(self.chi))):
            if not depends_only_on_t(e):
                raise ValueError(f"{name} must depend on t only")
            if has_complex_symbols(e):
                raise ValueError(f"{name} must not contain complex-codomain symbols")
            if not e.is_real:
                raise ValueError(f"{name} must be real-valued")
        if self.eta0 is not None and self.eta0.jet_vars:
            raise ValueError("eta0 must not contain jet variables")

    # -- linear structure

    def add(self, other: "GeneratorCoeffs") -> "GeneratorCoeffs":
        if other.n != self.n:
            raise ValueError("dimension mismatch")
        e1 = self.eta0 if self.eta0 is not None else ZERO
        e2 = other.eta0 if other.eta0 is not None else ZERO
        eta = e1 + e2
        return GeneratorCoeffs(
            self.n, self.tau + other.tau,
            tuple(a + b for a, b in zip(self.kappa, other.kappa)),
            tuple(a + b for a, b in zip(self.chi, other.chi)),
            self.sigma + other.sigma, self.rho + other.rho,
            None if eta is ZERO else eta)

    def scale(self, c) -> "GeneratorCoeffs":
        ce = as_expr(c)
        cf = Fraction(c) if not isinstance(c, Fraction) else c
        return GeneratorCoeffs(
            self.n, ce * self.tau, tuple(cf * k for k in self.kappa),
            tuple(ce * ch for ch in self.chi), ce * self.sigma, ce * self.rho,
            None if self.eta0 is None else ce * self.eta0)

    def kappa_matrix(self) -> list[list[Fraction]]:
        """K with rotation part xi_a = K_ab x_b; K_ba = kappa_ab for a<b."""
        K = [[Fraction(0)] * self.n for _ in range(self.n)]
        for (a, b), k in zip(_pairs(self.n), self.kappa):
            K[b - 1][a - 1] = k
            K[a - 1][b - 1] = -k
        return K

    def rotation_xi(self) -> tuple[Expr, ...]:
        K = self.kappa_matrix()
        return tuple(
            sum_(const(K[a][b]) * x(b + 1) for b in range(self.n) if K[a][b] != 0)
            for a in range(self.n))

    def eta0_or_zero(self) -> Expr:
        return self.eta0 if self.eta0 is not None else ZERO


def zero_gen(n: int) -> GeneratorCoeffs:
    return GeneratorCoeffs(n, ZERO, tuple(Fraction(0) for _ in _pairs(n)),
                           (ZERO,) * n, ZERO, ZERO, None)


def D(tau, n: int = 2) -> GeneratorCoeffs:
    g = zero_gen(n)
    return GeneratorCoeffs(n, as_expr(tau), g.kappa, g.chi, ZERO, ZERO, None)


def J(a: int, b: int, n: int = 2) -> GeneratorCoeffs:
    kap = [Fraction(0)] * len(_pairs(n))
    kap[_pairs(n).index((a, b))] = Fraction(1)
    g = zero_gen(n)
    return GeneratorCoeffs(n, ZERO, tuple(kap), g.chi, ZERO, ZERO, None)


def P(*chi, n: Optional[int] = None) -> GeneratorCoeffs:
    chis = tuple(as_expr(c) for c in chi)
    n = n if n is not None else len(chis)
    g = zero_gen(n)
    return GeneratorCoeffs(n, ZERO, g.kappa, chis, ZERO, ZERO, None)


def M(sigma=1, n: int = 2) -> GeneratorCoeffs:
    g = zero_gen(n)
    return GeneratorCoeffs(n, ZERO, g.kappa, g.chi, as_expr(sigma), ZERO, None)


def Iop(rho=1, n: int = 2) -> GeneratorCoeffs:
    g = zero_gen(n)
    return GeneratorCoeffs(n, ZERO, g.kappa, g.chi, ZERO, as_expr(rho), None)


def Z(eta0: Expr, n: int = 2) -> GeneratorCoeffs:
    g = zero_gen(n)
    return GeneratorCoeffs(n, ZERO, g.kappa, g.chi, ZERO, ZERO, eta0)


@dataclass(frozen=True)
class VectorField:
    """General first-order operator on (t, x, psi, psi*)."""

    n: int
    coef_t: Expr
    coef_x: tuple[Expr, ...]
    coef_psi: Expr
    coef_psi_star: Expr

    def apply_to(self, h: Expr) -> Expr:
        out = self.coef_t * diff(h, T_VAR)
        for a in range(1, self.n + 1):
            out = out + self.coef_x[a - 1] * diff(h, x_var(a))
        out = out + self.coef_psi * diff(h, jet_var((0,) * (self.n + 1), False))
        out = out + self.coef_psi_star * diff(h, jet_var((0,) * (self.n + 1), True))
        return out

    def sub(self, other: "VectorField") -> "VectorField":
        return VectorField(
            self.n, self.coef_t - other.coef_t,
            tuple(a - b for a, b in zip(self.coef_x, other.coef_x)),
            self.coef_psi - other.coef_psi,
            self.coef_psi_star - other.coef_psi_star)

    def components(self) -> tuple[Expr, ...]:
        return (self.coef_t, *self.coef_x, self.coef_psi, self.coef_psi_star)


def absx2(n: int) -> Expr:
    return sum_(x(a) * x(a) for a in range(1, n + 1))


def expand(g: GeneratorCoeffs) -> VectorField:
    """Canonical data to the explicit first-order operator."""
    n = g.n
    tau_t = diff(g.tau, T_VAR)
    tau_tt = diff(tau_t, T_VAR)
    xi_rot = g.rotation_xi()
    coef_x = tuple(HALF * tau_t * x(a) + xi_rot[a - 1] + g.chi[a - 1]
                   for a in range(1, n + 1))
    q = I8 * tau_tt * absx2(n)
    for a in range(1, n + 1):
        q = q + I2 * diff(g.chi[a - 1], T_VAR) * x(a)
    q = q + g.rho + IU * g.sigma
    coef_psi = q * psi(n) + g.eta0_or_zero()
    coef_psi_star = conj_expr(q) * psi(n, conj=True) + conj_expr(g.eta0_or_zero())
    return VectorField(n, g.tau, coef_x, coef_psi, coef_psi_star)


def bracket_generic(f1: VectorField, f2: VectorField) -> VectorField:
    """Commutator of first-order operators: coefficients f1(f2_i) - f2(f1_i)."""
    if f1.n != f2.n:
        raise ValueError("dimension mismatch")
    return VectorField(
        f1.n,
        f1.apply_to(f2.coef_t) - f2.apply_to(f1.coef_t),
        tuple(f1.apply_to(c2) - f2.apply_to(c1)
              for c1, c2 in zip(f1.coef_x, f2.coef_x)),
        f1.apply_to(f2.coef_psi) - f2.apply_to(f1.coef_psi),
        f1.apply_to(f2.coef_psi_star) - f2.apply_to(f1.coef_psi_star))


def _z_action(g: GeneratorCoeffs, zeta: Expr) -> Expr:
    """The listed [., Z(zeta)] rules, applied for a single generator g."""
    n = g.n
    tau_t = diff(g.tau, T_VAR)
    out = g.tau * diff(zeta, T_VAR)
    for a in range(1, n + 1):
        out = out + HALF * tau_t * x(a) * diff(zeta, x_var(a))
    out = out - I8 * diff(tau_t, T_VAR) * absx2(n) * zeta
    xi_rot = g.rotation_xi()
    for a in range(1, n + 1):
        out = out + xi_rot[a - 1] * diff(zeta, x_var(a))
        out = out + g.chi[a - 1] * diff(zeta, x_var(a))
        out = out - I2 * diff(g.chi[a - 1], T_VAR) * x(a) * zeta
    out = out - IU * g.sigma * zeta - g.rho * zeta
    return out


def bracket_structural(g1: GeneratorCoeffs, g2: GeneratorCoeffs) -> GeneratorCoeffs:
    """Closed-form bracket from the commutation table of the canonical fields."""
    if g1.n != g2.n:
        raise ValueError("dimension mismatch")
    n = g1.n
    t1, t2 = g1.tau, g2.tau
    t1t, t2t = diff(t1, T_VAR), diff(t2, T_VAR)
    tau = t1 * t2t - t2 * t1t

    K1 = g1.kappa_matrix()
    K2 = g2.kappa_matrix()
    Kr = [[sum(K2[a][c] * K1[c][b] - K1[a][c] * K2[c][b] for c in range(n))
           for b in range(n)] for a in range(n)]
    kappa = tuple(Kr[b - 1][a - 1] for a, b in _pairs(n))

    chi = []
    for a in range(n):
        c = t1 * diff(g2.chi[a], T_VAR) - HALF * t1t * g2.chi[a]
        c = c - (t2 * diff(g1.chi[a], T_VAR) - HALF * t2t * g1.chi[a])
        c = c - sum_(const(K1[a][b]) * g2.chi[b] for b in range(n))
        c = c + sum_(const(K2[a][b]) * g1.chi[b] for b in range(n))
        chi.append(c)

    sigma = t1 * diff(g2.sigma, T_VAR) - t2 * diff(g1.sigma, T_VAR)
    pp = ZERO
    for a in range(n):
        pp = pp + g1.chi[a] * diff(g2.chi[a], T_VAR) - g2.chi[a] * diff(g1.chi[a], T_VAR)
    sigma = sigma + HALF * pp

    rho = t1 * diff(g2.rho, T_VAR) - t2 * diff(g1.rho, T_VAR)

    eta = _z_action(g1, g2.eta0_or_zero()) - _z_action(g2, g1.eta0_or_zero())
    return GeneratorCoeffs(n, tau, kappa, tuple(chi), sigma, rho,
                           None if eta is ZERO else eta)


# ---------------------------------------------------------------------------
# numeric span analysis
# ---------------------------------------------------------------------------

def coefficient_rows(gs: Sequence[GeneratorCoeffs], binding: Binding,
                     tvals: np.ndarray):
    """Sampled coefficient matrix of the canonical data.

    Returns (rows, slices): each row is the concatenation of tau samples,
    kappa entries, chi samples (componentwise), sigma and rho samples.
    """
    m = len(tvals)
    env = {T_VAR: np.asarray(tvals, dtype=complex)}
    n = gs[0].n
    npair = len(_pairs(n))
    width = m + npair + n * m + m + m
    rows = np.zeros((len(gs), width))

    def sample(e: Expr) -> np.ndarray:
        vals, _, _ = eval_batch(e, binding, env)
        return np.real(np.broadcast_to(vals, (m,)))

    for i, g in enumerate(gs):
        if g.n != n:
            raise ValueError("dimension mismatch in generator list")
        col = 0
        rows[i, col:col + m] = sample(g.tau)
        col += m
        rows[i, col:col + npair] = [float(k) for k in g.kappa]
        col += npair
        for a in range(n):
            rows[i, col:col + m] = sample(g.chi[a])
            col += m
        rows[i, col:col + m] = sample(g.sigma)
        col += m
        rows[i, col:col + m] = sample(g.rho)
    slices = {
        "tau": slice(0, m),
        "kappa": slice(m, m + npair),
        "chi": slice(m + npair, m + npair + n * m),
        "sigma": slice(m + npair + n * m, m + npair + n * m + m),
        "rho": slice(m + npair + n * m + m, width),
    }
    return rows, slices


def _rank(mat: np.ndarray, tol: float) -> int:
    if mat.size == 0:
        return 0
    s = np.linalg.svd(mat, compute_uv=False)
    if len(s) == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > tol * max(1.0, s[0])))


def nullspace_combos(mat: np.ndarray, tol: float) -> np.ndarray:
    """Rows c with c @ mat ~ 0, one per nullspace dimension."""
    if mat.shape[0] == 0:
        return np.zeros((0, 0))
    u, s, _ = np.linalg.svd(mat, full_matrices=True)
    smax = s[0] if len(s) and s[0] > 0 else 1.0
    r = int(np.sum(s > tol * max(1.0, smax)))
    return u[:, r:].T


def rank_of_chi_block(gs: Sequence[GeneratorCoeffs], binding: Optional[Binding] = None,
                      rng: Optional[np.random.Generator] = None,
                      tol: float = 1e-8) -> int:
    """Functional rank of the chi tuples of the pure-(P, M, I) part of the span.

    The rank is over the field of functions of t: the largest r such that at
    some sampled time the chi tuples of the tau- and kappa-free combinations
    span an r-dimensional subspace of R^n.
    """
    if not gs:
        return 0
    if rng is None:
        rng = np.random.default_rng(0)
    binding = binding or EMPTY_BINDING
    n = gs[0].n
    m = max(4, n + 2)
    tvals = rng.uniform(0.3, 1.7, size=2 * m + 1)
    rows, slices = coefficient_rows(gs, binding, tvals)
    head = np.hstack([rows[:, slices["tau"]], rows[:, slices["kappa"]]])
    combos = nullspace_combos(head, tol)
    if combos.shape[0] == 0:
        return 0
    chi = combos @ rows[:, slices["chi"]]  # (k, n*m) with chi_a blocks of length m
    k = chi.shape[0]
    mlen = len(tvals)
    best = 0
    for j in range(mlen):
        pointwise = np.stack([chi[:, a * mlen + j] for a in range(n)], axis=1)
        best = max(best, _rank(pointwise, tol))
    return best
