"""Immutable expression DAG for symbolic work on (1+n)-dimensional wave operators.

Nodes are hash-consed: structurally equal expressions are the *same* object,
so `a is b` is structural equality.  Constants are exact rationals (complex
rationals), floating point enters only at evaluation time.  The node set is
deliberately small: sums, products, integer powers, |.|^q powers and sgn of
real-valued subexpressions, complex conjugation, and applications of abstract
function symbols carrying a formal derivative multi-index over their argument
slots.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence, Union

Rat = Fraction
Number = Union[int, float, Fraction]


# ---------------------------------------------------------------------------
# function symbols
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FunctionSymbol:
    """Abstract function symbol; arity 0 means an unknown constant parameter."""

    name: str
    arity: int
    codomain: str  # 'real' | 'complex'

    def __post_init__(self):
        if self.arity < 0:
            raise ValueError("arity must be non-negative")
        if self.codomain not in ("real", "complex"):
            raise ValueError("codomain must be 'real' or 'complex'")


# Symbols every workspace knows about.  Their numeric implementations live in
# funcbank; here they are just names.
COS = FunctionSymbol("cos", 1, "real")
SIN = FunctionSymbol("sin", 1, "real")
EXP = FunctionSymbol("exp", 1, "real")
LOG = FunctionSymbol("log", 1, "real")
ATAN = FunctionSymbol("atan", 1, "real")
PI = FunctionSymbol("pi", 0, "real")

BUILTIN_SYMBOLS = (COS, SIN, EXP, LOG, ATAN, PI)


class SymbolTable:
    """Function-symbol namespace; names are unique within a workspace."""

    def __init__(self):
        self._syms: dict[str, FunctionSymbol] = {s.name: s for s in BUILTIN_SYMBOLS}

    def declare(self, name: str, arity: int, codomain: str) -> FunctionSymbol:
        sym = FunctionSymbol(name, arity, codomain)
        old = self._syms.get(name)
        if old is not None:
            if old != sym:
                raise ValueError(f"symbol {name!r} already declared with a different signature")
            return old
        self._syms[name] = sym
        return sym

    def get(self, name: str) -> Optional[FunctionSymbol]:
        return self._syms.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self._syms

    def symbols(self) -> list[FunctionSymbol]:
        return list(self._syms.values())


# ---------------------------------------------------------------------------
# variables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VarId:
    """Time, space, or jet variable.

    kind 't': time; kind 'x': space variable with 1-based index `a`;
    kind 'jet': derivative of psi with multi-index `alpha` over (t, x1..xn)
    (the all-zero multi-index is psi itself) and a conjugation flag.
    """

    kind: str
    a: int = 0
    alpha: tuple[int, ...] = ()
    conj: bool = False

    def __post_init__(self):
        if self.kind == "x" and self.a < 1:
            raise ValueError("space index must be >= 1")
        if self.kind == "jet" and any(k < 0 for k in self.alpha):
            raise ValueError("jet multi-index entries must be non-negative")

    @property
    def is_jet(self) -> bool:
        return self.kind == "jet"


T_VAR = VarId("t")


def x_var(a: int) -> VarId:
    return VarId("x", a=a)


def jet_var(alpha: Sequence[int], conj: bool = False) -> VarId:
    return VarId("jet", alpha=tuple(alpha), conj=conj)


def psi_var(n: int, conj: bool = False) -> VarId:
    return jet_var((0,) * (n + 1), conj)


def raise_jet(v: VarId, direction: int) -> VarId:
    """Raise the multi-index in coordinate direction 0=t, 1..n=x_a."""
    alpha = list(v.alpha)
    alpha[direction] += 1
    return jet_var(alpha, v.conj)


# ---------------------------------------------------------------------------
# nodes
# ---------------------------------------------------------------------------

_INTERN: dict = {}


def _intern(key, build):
    node = _INTERN.get(key)
    if node is None:
        node = build()
        _INTERN[key] = node
    return node


class Expr:
    __slots__ = ("is_real", "_jets", "_vars", "_syms", "__weakref__")

    def __str__(self):
        from . import parsing

        return parsing.to_text(self)

    __repr__ = __str__

    # operator sugar; scalars are coerced to exact-rational constants
    def __add__(self, other):
        return sum_((self, as_expr(other)))

    def __radd__(self, other):
        return sum_((as_expr(other), self))

    def __sub__(self, other):
        return sum_((self, -as_expr(other)))

    def __rsub__(self, other):
        return sum_((as_expr(other), -self))

    def __neg__(self):
        return prod((MINUS_ONE, self))

    def __mul__(self, other):
        return prod((self, as_expr(other)))

    def __rmul__(self, other):
        return prod((as_expr(other), self))

    def __truediv__(self, other):
        return prod((self, int_pow(as_expr(other), -1)))

    def __rtruediv__(self, other):
        return prod((as_expr(other), int_pow(self, -1)))

    @property
    def jet_vars(self) -> frozenset:
        got = self._jets
        if got is None:
            got = frozenset(v for v in self.free_vars if v.is_jet)
            self._jets = got
        return got

    @property
    def free_vars(self) -> frozenset:
        got = self._vars
        if got is None:
            got = self._compute_vars()
            self._vars = got
        return got

    @property
    def free_symbols(self) -> frozenset:
        got = self._syms
        if got is None:
            got = self._compute_syms()
            self._syms = got
        return got

    def _compute_vars(self) -> frozenset:
        out: set = set()
        for c in self.children():
            out |= c.free_vars
        return frozenset(out)

    def _compute_syms(self) -> frozenset:
        out: set = set()
        for c in self.children():
            out |= c.free_symbols
        return frozenset(out)

    def children(self) -> tuple["Expr", ...]:
        return ()

    def _init_caches(self, is_real: bool):
        # object.__setattr__ not needed; slots are plain attributes
        self.is_real = is_real
        self._jets = None
        self._vars = None
        self._syms = None


class Const(Expr):
    __slots__ = ("re", "im")

    def __init__(self, re: Fraction, im: Fraction):
        self.re = re
        self.im = im
        self._init_caches(im == 0)

    def _compute_vars(self):
        return frozenset()

    def value(self) -> complex:
        return complex(self.re, self.im)


class Var(Expr):
    __slots__ = ("vid",)

    def __init__(self, vid: VarId):
        self.vid = vid
        self._init_caches(not vid.is_jet)

    def _compute_vars(self):
        return frozenset((self.vid,))


class FuncApp(Expr):
    __slots__ = ("sym", "args", "didx")

    def __init__(self, sym: FunctionSymbol, args: tuple[Expr, ...], didx: tuple[int, ...]):
        self.sym = sym
        self.args = args
        self.didx = didx
        self._init_caches(sym.codomain == "real" and all(a.is_real for a in args))

    def children(self):
        return self.args

    def _compute_syms(self):
        out = {self.sym}
        for a in self.args:
            out |= a.free_symbols
        return frozenset(out)


class Sum(Expr):
    __slots__ = ("terms",)

    def __init__(self, terms: tuple[Expr, ...]):
        self.terms = terms
        self._init_caches(all(t.is_real for t in terms))

    def children(self):
        return self.terms


class Product(Expr):
    __slots__ = ("factors",)

    def __init__(self, factors: tuple[Expr, ...]):
        self.factors = factors
        self._init_caches(all(f.is_real for f in factors))

    def children(self):
        return self.factors


class IntPow(Expr):
    __slots__ = ("base", "k")

    def __init__(self, base: Expr, k: int):
        self.base = base
        self.k = k
        self._init_caches(base.is_real)

    def children(self):
        return (self.base,)


class AbsPow(Expr):
    """|base|^q for a real-valued base and rational exponent q."""

    __slots__ = ("base", "q")

    def __init__(self, base: Expr, q: Fraction):
        self.base = base
        self.q = q
        self._init_caches(True)

    def children(self):
        return (self.base,)


class Sign(Expr):
    __slots__ = ("base",)

    def __init__(self, base: Expr):
        self.base = base
        self._init_caches(True)

    def children(self):
        return (self.base,)


class Conj(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg: Expr):
        self.arg = arg
        self._init_caches(False)

    def children(self):
        return (self.arg,)


# ---------------------------------------------------------------------------
# constructors (normalizing, interning)
# ---------------------------------------------------------------------------

def const(re: Number = 0, im: Number = 0) -> Const:
    re = Fraction(re)
    im = Fraction(im)
    return _intern(("c", re, im), lambda: Const(re, im))


ZERO = const(0)
ONE = const(1)
MINUS_ONE = const(-1)
I_UNIT = const(0, 1)
HALF = const(Fraction(1, 2))


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction)):
        return const(x)
    if isinstance(x, float):
        return const(Fraction(x))
    if isinstance(x, complex):
        return const(Fraction(x.real), Fraction(x.imag))
    raise TypeError(f"cannot coerce {type(x).__name__} to Expr")


def var(vid: VarId) -> Var:
    return _intern(("v", vid), lambda: Var(vid))


def t() -> Var:
    return var(T_VAR)


def x(a: int) -> Var:
    return var(x_var(a))


def psi(n: int, conj: bool = False) -> Var:
    return var(psi_var(n, conj))


def func_app(sym: FunctionSymbol, args: Iterable[Expr], didx: Optional[Sequence[int]] = None) -> Expr:
    args = tuple(as_expr(a) for a in args)
    if len(args) != sym.arity:
        raise ValueError(f"{sym.name} expects {sym.arity} argument(s), got {len(args)}")
    if didx is None:
        didx = (0,) * sym.arity
    didx = tuple(didx)
    if len(didx) != sym.arity or any(k < 0 for k in didx):
        raise ValueError("bad derivative multi-index")
    key = ("f", sym, tuple(id(a) for a in args), didx)
    return _intern(key, lambda: FuncApp(sym, args, didx))


# -- complex rational helpers for coefficient folding

def _cadd(a, b):
    return (a[0] + b[0], a[1] + b[1])


def _cmul(a, b):
    return (a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0])


def _cpow(a, k: int):
    if k < 0:
        d = a[0] * a[0] + a[1] * a[1]
        if d == 0:
            raise ZeroDivisionError("inverse of exact zero constant")
        a = (a[0] / d, -a[1] / d)
        k = -k
    out = (Fraction(1), Fraction(0))
    for _ in range(k):
        out = _cmul(out, a)
    return out


def _split_coeff(term: Expr):
    """Split a term into (complex rational coefficient, monomial part)."""
    if isinstance(term, Const):
        return (term.re, term.im), ONE
    if isinstance(term, Product) and isinstance(term.factors[0], Const):
        c = term.factors[0]
        rest = term.factors[1:]
        mono = rest[0] if len(rest) == 1 else _intern(("p", tuple(id(f) for f in rest)), lambda: Product(rest))
        return (c.re, c.im), mono
    return (Fraction(1), Fraction(0)), term


def sum_(terms: Iterable[Expr]) -> Expr:
    acc: dict[Expr, tuple] = {}
    cacc = (Fraction(0), Fraction(0))
    stack = list(terms)
    stack.reverse()
    while stack:
        tm = stack.pop()
        if isinstance(tm, Sum):
            stack.extend(reversed(tm.terms))
            continue
        if (isinstance(tm, Product) and len(tm.factors) == 2
                and isinstance(tm.factors[0], Const)
                and isinstance(tm.factors[1], Sum)):
            c = tm.factors[0]
            stack.extend(prod((c, u)) for u in reversed(tm.factors[1].terms))
            continue
        coeff, mono = _split_coeff(tm)
        if mono is ONE:
            cacc = _cadd(cacc, coeff)
        else:
            prev = acc.get(mono)
            acc[mono] = _cadd(prev, coeff) if prev is not None else coeff
    out: list[Expr] = []
    if cacc != (0, 0):
        out.append(const(*cacc))
    for mono, coeff in acc.items():
        if coeff == (0, 0):
            continue
        if coeff == (1, 0):
            out.append(mono)
        else:
            out.append(prod((const(*coeff), mono)))
    if not out:
        return ZERO
    if len(out) == 1:
        return out[0]
    key = ("s", tuple(id(u) for u in out))
    tup = tuple(out)
    return _intern(key, lambda: Sum(tup))


def prod(factors: Iterable[Expr]) -> Expr:
    cacc = (Fraction(1), Fraction(0))
    ipow: dict[Expr, int] = {}
    apow: dict[Expr, Fraction] = {}
    spar: dict[Expr, int] = {}
    order: list[tuple[str, Expr]] = []

    def add_ipow(b: Expr, k: int):
        if b not in ipow:
            order.append(("i", b))
            ipow[b] = 0
        ipow[b] += k

    stack = list(factors)
    stack.reverse()
    while stack:
        f = stack.pop()
        if isinstance(f, Product):
            stack.extend(reversed(f.factors))
            continue
        if isinstance(f, Const):
            if f.re == 0 and f.im == 0:
                return ZERO
            cacc = _cmul(cacc, (f.re, f.im))
        elif isinstance(f, IntPow):
            add_ipow(f.base, f.k)
        elif isinstance(f, AbsPow):
            if f.base not in apow:
                order.append(("a", f.base))
                apow[f.base] = Fraction(0)
            apow[f.base] += f.q
        elif isinstance(f, Sign):
            if f.base not in spar:
                order.append(("g", f.base))
                spar[f.base] = 0
            spar[f.base] += 1
        else:
            add_ipow(f, 1)

    out: list[Expr] = []
    for tag, b in order:
        if tag == "i":
            piece = int_pow(b, ipow[b])
        elif tag == "a":
            piece = abs_pow(b, apow[b])
        else:
            piece = sign_of(b) if spar[b] % 2 else ONE
        if isinstance(piece, Const):
            cacc = _cmul(cacc, (piece.re, piece.im))
            if cacc == (0, 0):
                return ZERO
        elif piece is not ONE:
            out.append(piece)
    if not out:
        return const(*cacc)
    if cacc != (1, 0):
        out.insert(0, const(*cacc))
    if len(out) == 1:
        return out[0]
    key = ("p", tuple(id(u) for u in out))
    tup = tuple(out)
    return _intern(key, lambda: Product(tup))


def int_pow(base: Expr, k: int) -> Expr:
    k = int(k)
    if k == 0:
        return ONE
    if k == 1:
        return base
    if isinstance(base, Const):
        return const(*_cpow((base.re, base.im), k))
    if isinstance(base, IntPow):
        return int_pow(base.base, base.k * k)
    if isinstance(base, AbsPow):
        return abs_pow(base.base, base.q * k)
    if isinstance(base, Sign):
        return sign_of(base.base) if k % 2 else ONE
    key = ("ip", id(base), k)
    return _intern(key, lambda: IntPow(base, k))


def abs_pow(base: Expr, q: Number) -> Expr:
    q = Fraction(q)
    if not base.is_real:
        raise ValueError("|.|^q requires a real-valued base")
    if q == 0:
        return ONE
    if isinstance(base, AbsPow):
        return abs_pow(base.base, base.q * q)
    if isinstance(base, IntPow):
        return abs_pow(base.base, base.k * q)
    if isinstance(base, Sign):
        return ONE
    if isinstance(base, Const):
        v = abs(base.re)
        if q.denominator == 1:
            if v == 0 and q < 0:
                raise ZeroDivisionError("|0|^q with negative q")
            return const(v ** q.numerator if q >= 0 else Fraction(1) / v ** (-q.numerator))
        if v == 0:
            if q < 0:
                raise ZeroDivisionError("|0|^q with negative q")
            return ZERO
        if v == 1:
            return ONE
    if q.denominator == 1 and q.numerator % 2 == 0:
        return int_pow(base, q.numerator)
    key = ("ap", id(base), q)
    return _intern(key, lambda: AbsPow(base, q))


def sign_of(base: Expr) -> Expr:
    if not base.is_real:
        raise ValueError("sgn requires a real-valued base")
    if isinstance(base, Const):
        if base.re == 0:
            raise ValueError("sgn of exact zero")
        return ONE if base.re > 0 else MINUS_ONE
    if isinstance(base, Sign):
        return base
    if isinstance(base, AbsPow):
        return ONE
    if isinstance(base, IntPow):
        return sign_of(base.base) if base.k % 2 else ONE
    key = ("sg", id(base))
    return _intern(key, lambda: Sign(base))


def conj_expr(e: Expr) -> Expr:
    """Complex conjugate, distributed structurally.

    Conjugation flips the flag of jet variables and wraps irreducibly complex
    function applications in a Conj node; Conj(Conj(e)) collapses to e.
    """
    if e.is_real:
        return e
    if isinstance(e, Const):
        return const(e.re, -e.im)
    if isinstance(e, Var):
        v = e.vid
        return var(jet_var(v.alpha, not v.conj))
    if isinstance(e, Sum):
        return sum_(conj_expr(tm) for tm in e.terms)
    if isinstance(e, Product):
        return prod(conj_expr(f) for f in e.factors)
    if isinstance(e, IntPow):
        return int_pow(conj_expr(e.base), e.k)
    if isinstance(e, Conj):
        return e.arg
    key = ("cj", id(e))
    return _intern(key, lambda: Conj(e))


def re_part(e: Expr) -> Expr:
    return HALF * (e + conj_expr(e))


def im_part(e: Expr) -> Expr:
    return const(0, Fraction(-1, 2)) * (e - conj_expr(e))


# ---------------------------------------------------------------------------
# differentiation / substitution
# ---------------------------------------------------------------------------

_DIFF_CACHE: dict = {}


def _flip_if_jet(v: VarId) -> VarId:
    if v.is_jet:
        return jet_var(v.alpha, not v.conj)
    return v


def diff(e: Expr, v: VarId) -> Expr:
    """Partial derivative of e with respect to the variable v.

    All VarIds are treated as independent; derivatives of function
    applications raise the slot multi-index via the chain rule.
    """
    key = (id(e), v)
    got = _DIFF_CACHE.get(key)
    if got is not None:
        return got
    out = _diff(e, v)
    _DIFF_CACHE[key] = out
    return out


def _diff(e: Expr, v: VarId) -> Expr:
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.vid == v else ZERO
    if v not in e.free_vars:
        return ZERO
    if isinstance(e, Sum):
        return sum_(diff(tm, v) for tm in e.terms)
    if isinstance(e, Product):
        fs = e.factors
        terms = []
        for i, f in enumerate(fs):
            d = diff(f, v)
            if d is ZERO:
                continue
            terms.append(prod(fs[:i] + (d,) + fs[i + 1:]))
        return sum_(terms)
    if isinstance(e, IntPow):
        return prod((const(e.k), int_pow(e.base, e.k - 1), diff(e.base, v)))
    if isinstance(e, AbsPow):
        return prod((const(e.q), abs_pow(e.base, e.q - 1), sign_of(e.base), diff(e.base, v)))
    if isinstance(e, Sign):
        return ZERO
    if isinstance(e, Conj):
        return conj_expr(diff(e.arg, _flip_if_jet(v)))
    if isinstance(e, FuncApp):
        terms = []
        for s in range(e.sym.arity):
            d = diff(e.args[s], v)
            if d is ZERO:
                continue
            didx = list(e.didx)
            didx[s] += 1
            terms.append(prod((func_app(e.sym, e.args, didx), d)))
        return sum_(terms)
    raise TypeError(f"cannot differentiate {type(e).__name__}")


def diff_n(e: Expr, v: VarId, k: int) -> Expr:
    for _ in range(k):
        e = diff(e, v)
    return e


def total_derivative(e: Expr, direction: int) -> Expr:
    """Total derivative D_t (direction 0) or D_a (direction a in 1..n).

    Differentiates explicit t/x dependence and raises jet multi-indices.
    """
    base = T_VAR if direction == 0 else x_var(direction)
    out = diff(e, base)
    for j in sorted(e.jet_vars, key=lambda v: (v.alpha, v.conj)):
        d = diff(e, j)
        if d is ZERO:
            continue
        out = out + d * var(raise_jet(j, direction))
    return out


def subst(e: Expr, mapping: Mapping[VarId, Expr]) -> Expr:
    """Replace variables by expressions (no capture issues: vars are global)."""
    memo: dict[int, Expr] = {}

    def go(u: Expr) -> Expr:
        got = memo.get(id(u))
        if got is not None:
            return got
        if isinstance(u, Var):
            out = mapping.get(u.vid, u)
        elif not (u.free_vars & mapping.keys()):
            out = u
        elif isinstance(u, Sum):
            out = sum_(go(tm) for tm in u.terms)
        elif isinstance(u, Product):
            out = prod(go(f) for f in u.factors)
        elif isinstance(u, IntPow):
            out = int_pow(go(u.base), u.k)
        elif isinstance(u, AbsPow):
            out = abs_pow(go(u.base), u.q)
        elif isinstance(u, Sign):
            out = sign_of(go(u.base))
        elif isinstance(u, Conj):
            out = conj_expr(go(u.arg))
        elif isinstance(u, FuncApp):
            out = func_app(u.sym, tuple(go(a) for a in u.args), u.didx)
        else:
            out = u
        memo[id(u)] = out
        return out

    return go(e)


def subst_t(e: Expr, replacement: Expr) -> Expr:
    return subst(e, {T_VAR: replacement})


def depends_only_on_t(e: Expr) -> bool:
    return all(v == T_VAR for v in e.free_vars)


def has_complex_symbols(e: Expr) -> bool:
    return any(s.codomain == "complex" for s in e.free_symbols)
