"""Numeric implementations behind function symbols.

Every implementation can produce the exact value of an arbitrary mixed
partial derivative of itself at given argument arrays, which is what the
randomized identity checks need.  Random surrogates are trigonometric
polynomials (univariate: exponential-trigonometric class; multivariate:
products of cosines), whose derivatives of all orders are closed-form.
"""
from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

_HALF_PI = math.pi / 2.0


class FunctionImpl:
    """Base protocol: deriv(didx, args) -> complex ndarray broadcast over args."""

    def deriv(self, didx: tuple[int, ...], args: tuple[np.ndarray, ...]) -> np.ndarray:
        raise NotImplementedError

    def unsafe_mask(self, args: tuple[np.ndarray, ...]) -> Optional[np.ndarray]:
        return None


class ConstImpl(FunctionImpl):
    """Arity-0 symbol bound to a fixed numeric value."""

    def __init__(self, value):
        self.value = complex(value)

    def deriv(self, didx, args):
        return np.asarray(self.value)


class ExpPoly:
    """Complex exponential polynomials sum_lam p_lam(z) e^(lam z).

    Closed under +, *, d/dz and antiderivative (for lam != 0 terms and
    polynomial terms), which covers trigonometric polynomials, plain
    polynomials, exponentials and their products.
    """

    def __init__(self, terms: Optional[dict[complex, tuple[complex, ...]]] = None):
        self.terms: dict[complex, tuple[complex, ...]] = {}
        if terms:
            for lam, coeffs in terms.items():
                self._add_term(complex(lam), tuple(complex(c) for c in coeffs))

    def _add_term(self, lam: complex, coeffs: tuple[complex, ...]):
        while coeffs and coeffs[-1] == 0:
            coeffs = coeffs[:-1]
        if not coeffs:
            return
        old = self.terms.get(lam)
        if old is None:
            self.terms[lam] = coeffs
        else:
            m = max(len(old), len(coeffs))
            merged = tuple(
                (old[i] if i < len(old) else 0) + (coeffs[i] if i < len(coeffs) else 0)
                for i in range(m)
            )
            while merged and merged[-1] == 0:
                merged = merged[:-1]
            if merged:
                self.terms[lam] = merged
            else:
                del self.terms[lam]

    @staticmethod
    def constant(c) -> "ExpPoly":
        return ExpPoly({0.0 + 0.0j: (complex(c),)})

    @staticmethod
    def identity() -> "ExpPoly":
        return ExpPoly({0.0 + 0.0j: (0.0, 1.0)})

    @staticmethod
    def exp(lam) -> "ExpPoly":
        return ExpPoly({complex(lam): (1.0,)})

    @staticmethod
    def cos(a, b=0.0) -> "ExpPoly":
        # cos(a z + b) = (e^(i b) e^(i a z) + e^(-i b) e^(-i a z)) / 2
        eb = complex(math.cos(b), math.sin(b))
        return ExpPoly({1j * a: (eb / 2,), -1j * a: (eb.conjugate() / 2,)})

    @staticmethod
    def sin(a, b=0.0) -> "ExpPoly":
        eb = complex(math.cos(b), math.sin(b))
        return ExpPoly({1j * a: (eb / 2j,), -1j * a: (-eb.conjugate() / 2j,)})

    def __add__(self, other: "ExpPoly") -> "ExpPoly":
        out = ExpPoly(self.terms)
        for lam, coeffs in other.terms.items():
            out._add_term(lam, coeffs)
        return out

    def scale(self, c) -> "ExpPoly":
        c = complex(c)
        return ExpPoly({lam: tuple(ci * c for ci in coeffs) for lam, coeffs in self.terms.items()})

    def __sub__(self, other: "ExpPoly") -> "ExpPoly":
        return self + other.scale(-1)

    def __mul__(self, other: "ExpPoly") -> "ExpPoly":
        out = ExpPoly()
        for l1, p1 in self.terms.items():
            for l2, p2 in other.terms.items():
                conv = [0j] * (len(p1) + len(p2) - 1)
                for i, a in enumerate(p1):
                    for j, b in enumerate(p2):
                        conv[i + j] += a * b
                out._add_term(l1 + l2, tuple(conv))
        return out

    def derivative(self) -> "ExpPoly":
        out = ExpPoly()
        for lam, p in self.terms.items():
            dp = tuple((i + 1) * p[i + 1] for i in range(len(p) - 1))
            out._add_term(lam, tuple(lam * c for c in p))
            if dp:
                out._add_term(lam, dp)
        return out

    def antiderivative(self) -> "ExpPoly":
        """An antiderivative (constant of integration 0 for each term)."""
        out = ExpPoly()
        for lam, p in self.terms.items():
            if lam == 0:
                out._add_term(0.0 + 0.0j, (0j,) + tuple(c / (i + 1) for i, c in enumerate(p)))
                continue
            # solve q' + lam q = p for polynomial q, highest degree first
            q = [0j] * len(p)
            for i in range(len(p) - 1, -1, -1):
                upper = (i + 1) * q[i + 1] if i + 1 < len(q) else 0j
                q[i] = (p[i] - upper) / lam
            out._add_term(lam, tuple(q))
        return out

    def conjugate(self) -> "ExpPoly":
        out = ExpPoly()
        for lam, p in self.terms.items():
            out._add_term(lam.conjugate(), tuple(c.conjugate() for c in p))
        return out

    def is_real(self, tol=1e-12) -> bool:
        d = self - self.conjugate()
        return all(abs(c) < tol for p in d.terms.values() for c in p)

    def __call__(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        for lam, p in self.terms.items():
            pv = np.zeros_like(z)
            for c in reversed(p):
                pv = pv * z + c
            out = out + pv * np.exp(lam * z)
        return out


class ExpPolyImpl(FunctionImpl):
    """Arity-1 symbol backed by an ExpPoly; derivatives are exact."""

    def __init__(self, f: ExpPoly):
        self._derivs = [f]

    @property
    def func(self) -> ExpPoly:
        return self._derivs[0]

    def _d(self, k: int) -> ExpPoly:
        while len(self._derivs) <= k:
            self._derivs.append(self._derivs[-1].derivative())
        return self._derivs[k]

    def deriv(self, didx, args):
        return self._d(didx[0])(args[0])


class TrigPolyND(FunctionImpl):
    """Multivariate trigonometric polynomial: c0 + sum_k c_k prod_j cos(a_kj z_j + b_kj).

    Sines are encoded as phase-shifted cosines; the k-th derivative of
    cos(a z + b) is a^k cos(a z + b + k pi/2).
    """

    def __init__(self, c0: complex, terms: Sequence[tuple[complex, tuple[tuple[float, float], ...]]]):
        self.c0 = complex(c0)
        self.trig_terms = [(complex(c), tuple(fs)) for c, fs in terms]

    def deriv(self, didx, args):
        shape = np.broadcast(*args).shape if args else ()
        total = np.zeros(shape, dtype=complex)
        order = sum(didx)
        if order == 0:
            total = total + self.c0
        for c, factors in self.trig_terms:
            val = np.full(shape, c, dtype=complex)
            for j, (a, b) in enumerate(factors):
                k = didx[j]
                zj = np.asarray(args[j], dtype=complex)
                val = val * (a ** k) * np.cos(a * zj + b + k * _HALF_PI)
            total = total + val
        return total


def random_trig_poly(rng, codomain: str = "real", degree: int = 3) -> ExpPoly:
    """Random univariate trig polynomial with frequencies 1..degree, coeffs in [-1,1]."""
    def coeff():
        if codomain == "complex":
            return complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
        return complex(rng.uniform(-1, 1))

    f = ExpPoly.constant(coeff())
    for k in range(1, degree + 1):
        f = f + ExpPoly.cos(float(k)).scale(coeff()) + ExpPoly.sin(float(k)).scale(coeff())
    return f


def random_positive_trig_poly(rng, low=1.5, high=2.5, ripple=0.3, degree: int = 3) -> ExpPoly:
    """Random real trig polynomial bounded away from zero (>= low - degree*ripple > 0)."""
    f = ExpPoly.constant(rng.uniform(low, high))
    for k in range(1, degree + 1):
        f = f + ExpPoly.cos(float(k)).scale(rng.uniform(-1, 1) * ripple / degree)
        f = f + ExpPoly.sin(float(k)).scale(rng.uniform(-1, 1) * ripple / degree)
    return f


def random_surrogate(rng, arity: int, codomain: str) -> FunctionImpl:
    if arity == 0:
        if codomain == "complex":
            return ConstImpl(complex(rng.uniform(-1, 1), rng.uniform(-1, 1)))
        return ConstImpl(rng.uniform(-1, 1))
    if arity == 1:
        return ExpPolyImpl(random_trig_poly(rng, codomain))
    terms = []
    for _ in range(3):
        if codomain == "complex":
            c = complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
        else:
            c = complex(rng.uniform(-1, 1))
        factors = tuple(
            (float(rng.integers(1, 4)), rng.uniform(0, 2 * math.pi)) for _ in range(arity)
        )
        terms.append((c, factors))
    if codomain == "complex":
        c0 = complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
    else:
        c0 = complex(rng.uniform(-1, 1))
    return TrigPolyND(c0, terms)


# ---------------------------------------------------------------------------
# builtins
# ---------------------------------------------------------------------------

class _CosImpl(FunctionImpl):
    def deriv(self, didx, args):
        k = didx[0]
        return np.cos(np.asarray(args[0], dtype=complex) + k * _HALF_PI)


class _SinImpl(FunctionImpl):
    def deriv(self, didx, args):
        k = didx[0]
        return np.sin(np.asarray(args[0], dtype=complex) + k * _HALF_PI)


class _ExpImpl(FunctionImpl):
    def deriv(self, didx, args):
        return np.exp(np.asarray(args[0], dtype=complex))


class _LogImpl(FunctionImpl):
    """Natural log on positive reals; points with base <= eps are unsafe."""

    EPS = 1e-9

    def deriv(self, didx, args):
        z = np.real(args[0])
        safe = np.where(z > self.EPS, z, 1.0)
        k = didx[0]
        if k == 0:
            return np.log(safe).astype(complex)
        sign = -1.0 if (k - 1) % 2 else 1.0
        return (sign * math.factorial(k - 1) * safe ** (-float(k))).astype(complex)

    def unsafe_mask(self, args):
        z = np.asarray(args[0])
        return (np.real(z) <= self.EPS) | (np.abs(np.imag(z)) > 1e-9)


class _AtanImpl(FunctionImpl):
    """arctan with exact higher derivatives P_k(z)/(1+z^2)^k."""

    def __init__(self):
        # P_1 = 1;  P_{k+1} = P_k' (1+z^2) - 2 k z P_k
        self._polys = [np.array([1.0])]

    def _poly(self, k: int) -> np.ndarray:
        while len(self._polys) < k:
            p = self._polys[-1]
            kk = len(self._polys)
            dp = np.polyder(p) if len(p) > 1 else np.array([0.0])
            term1 = np.polyadd(np.polymul(dp, np.array([1.0, 0.0, 1.0])), np.array([0.0]))
            term2 = np.polymul(np.array([2.0 * kk, 0.0]), p)
            self._polys.append(np.polysub(term1, term2))
        return self._polys[k - 1]

    def deriv(self, didx, args):
        z = np.real(args[0])
        k = didx[0]
        if k == 0:
            return np.arctan(z).astype(complex)
        p = self._poly(k)
        return (np.polyval(p, z) / (1.0 + z * z) ** k).astype(complex)

    def unsafe_mask(self, args):
        return np.abs(np.imag(np.asarray(args[0]))) > 1e-9


BUILTIN_IMPLS = {
    "cos": _CosImpl(),
    "sin": _SinImpl(),
    "exp": _ExpImpl(),
    "log": _LogImpl(),
    "atan": _AtanImpl(),
    "pi": ConstImpl(math.pi),
}
