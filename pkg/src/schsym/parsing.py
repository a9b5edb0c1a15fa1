"""Expression grammar: parser and printer.

    expr     := ['-'] term (('+'|'-') term)*
    term     := factor (('*'|'/') factor)*
    factor   := atom ['^' exponent]
    exponent := ['-'] (INT ['/' INT] | FLOAT) | '(' exponent ')'
    atom     := NUMBER | 'i' | 'pi' | '|' expr '|' | '(' expr ')'
              | 'conj' '(' expr ')' | 'sgn' '(' expr ')'
              | 'D' '(' expr (',' VAR)+ ')'
              | IDENT '[' INT {',' INT} ']' '(' args ')'
              | IDENT '(' args ')' | IDENT

Reserved identifiers: t, x1..xn, psi plus jet suffixes (psi_t, psi_1,
psi_11, conj(psi_..) for conjugates), i, pi, conj, sgn, D.  A fractional
power on a real base denotes |base|^q; `D(e, v, ...)` differentiates at
parse time; `f[k1,..,km](args)` is the formal slot-derivative of f.

print -> parse is the identity on the expression DAG.
"""
from __future__ import annotations

import json
from fractions import Fraction
from typing import Optional

from .expr import (
    AbsPow,
    Conj,
    Const,
    Expr,
    FuncApp,
    IntPow,
    Product,
    Sign,
    Sum,
    SymbolTable,
    T_VAR,
    Var,
    VarId,
    abs_pow,
    conj_expr,
    const,
    diff,
    func_app,
    int_pow,
    jet_var,
    sign_of,
    var,
    x_var,
)


class ParseError(ValueError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


class UnknownSymbolError(ParseError):
    pass


_RESERVED = {"i", "pi", "conj", "sgn", "D", "t"}


def _is_ident_start(c: str) -> bool:
    return c.isalpha() or c == "_"


def _is_ident_char(c: str) -> bool:
    return c.isalnum() or c == "_"


class _Parser:
    def __init__(self, text: str, table: SymbolTable, n: int):
        self.text = text
        self.pos = 0
        self.table = table
        self.n = n

    # -- lexing helpers

    def _skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self._skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self, expected: str):
        self._skip_ws()
        if not self.text.startswith(expected, self.pos):
            raise ParseError(f"expected {expected!r}", self.pos)
        self.pos += len(expected)

    def try_take(self, expected: str) -> bool:
        self._skip_ws()
        if self.text.startswith(expected, self.pos):
            self.pos += len(expected)
            return True
        return False

    def _number(self) -> Fraction:
        self._skip_ws()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
        if self.pos < len(self.text) and self.text[self.pos] == ".":
            self.pos += 1
            while self.pos < len(self.text) and self.text[self.pos].isdigit():
                self.pos += 1
        if self.pos == start or self.text[start] == ".":
            raise ParseError("expected a number", start)
        return Fraction(self.text[start:self.pos])

    def _ident(self) -> tuple[str, int]:
        self._skip_ws()
        start = self.pos
        if self.pos >= len(self.text) or not _is_ident_start(self.text[self.pos]):
            raise ParseError("expected an identifier", self.pos)
        while self.pos < len(self.text) and _is_ident_char(self.text[self.pos]):
            self.pos += 1
        return self.text[start:self.pos], start

    # -- grammar

    def parse(self) -> Expr:
        e = self.expr()
        self._skip_ws()
        if self.pos != len(self.text):
            raise ParseError("unexpected trailing input", self.pos)
        return e

    def expr(self) -> Expr:
        neg = self.try_take("-")
        e = self.term()
        if neg:
            e = -e
        while True:
            if self.try_take("+"):
                e = e + self.term()
            elif self.try_take("-"):
                e = e - self.term()
            else:
                return e

    def term(self) -> Expr:
        e = self.factor()
        while True:
            if self.try_take("*"):
                e = e * self.factor()
            elif self.try_take("/"):
                e = e / self.factor()
            else:
                return e

    def factor(self) -> Expr:
        e = self.atom()
        if self.try_take("^"):
            pos = self.pos
            q = self.exponent()
            if q.denominator == 1:
                return int_pow(e, q.numerator)
            try:
                return abs_pow(e, q)
            except ValueError as err:
                raise ParseError(str(err), pos) from None
        return e

    def exponent(self) -> Fraction:
        if self.try_take("("):
            q = self.exponent()
            self.take(")")
            return q
        neg = self.try_take("-")
        q = self._number()
        if self.try_take("/"):
            q = q / self._number()
        return -q if neg else q

    def atom(self) -> Expr:
        self._skip_ws()
        if self.pos >= len(self.text):
            raise ParseError("unexpected end of input", self.pos)
        c = self.text[self.pos]
        if c.isdigit() or c == ".":
            return const(self._number())
        if c == "(":
            self.take("(")
            e = self.expr()
            self.take(")")
            return e
        if c == "|":
            self.take("|")
            e = self.expr()
            self.take("|")
            pos = self.pos
            try:
                return abs_pow(e, Fraction(1))
            except ValueError as err:
                raise ParseError(str(err), pos) from None
        name, start = self._ident()
        if name == "i":
            return const(0, 1)
        if name == "conj":
            self.take("(")
            e = self.expr()
            self.take(")")
            return conj_expr(e)
        if name == "sgn":
            self.take("(")
            e = self.expr()
            self.take(")")
            try:
                return sign_of(e)
            except ValueError as err:
                raise ParseError(str(err), start) from None
        if name == "D":
            self.take("(")
            e = self.expr()
            vs = []
            while self.try_take(","):
                vs.append(self._varid())
            self.take(")")
            if not vs:
                raise ParseError("D(...) needs at least one variable", start)
            for v in vs:
                e = diff(e, v)
            return e
        if name == "t":
            return var(T_VAR)
        v = self._try_varid_name(name, start)
        if v is not None:
            return var(v)
        sym = self.table.get(name)
        if sym is None:
            raise UnknownSymbolError(f"unknown symbol {name!r}", start)
        didx: Optional[list[int]] = None
        if self.try_take("["):
            didx = [int(self._number())]
            while self.try_take(","):
                didx.append(int(self._number()))
            self.take("]")
        if self.try_take("("):
            args = []
            if not self.try_take(")"):
                args.append(self.expr())
                while self.try_take(","):
                    args.append(self.expr())
                self.take(")")
            try:
                return func_app(sym, args, didx)
            except ValueError as err:
                raise ParseError(str(err), start) from None
        if sym.arity != 0:
            raise ParseError(f"symbol {name!r} expects arguments", start)
        return func_app(sym, ())

    def _varid(self) -> VarId:
        name, start = self._ident()
        if name == "t":
            return T_VAR
        v = self._try_varid_name(name, start)
        if v is None:
            raise ParseError(f"expected a variable, got {name!r}", start)
        return v

    def _try_varid_name(self, name: str, start: int) -> Optional[VarId]:
        if name.startswith("x") and name[1:].isdigit():
            a = int(name[1:])
            if not 1 <= a <= self.n:
                raise ParseError(f"space index out of range: {name}", start)
            return x_var(a)
        if name == "psi":
            return jet_var((0,) * (self.n + 1))
        if name.startswith("psi_"):
            suffix = name[4:]
            alpha = [0] * (self.n + 1)
            for ch in suffix:
                if ch == "t":
                    alpha[0] += 1
                elif ch.isdigit() and 1 <= int(ch) <= self.n:
                    alpha[int(ch)] += 1
                else:
                    raise ParseError(f"bad jet suffix in {name!r}", start)
            if not suffix:
                raise ParseError(f"bad jet suffix in {name!r}", start)
            return jet_var(alpha)
        return None


def parse(text: str, table: Optional[SymbolTable] = None, n: int = 2) -> Expr:
    """Parse an expression; unknown function symbols raise UnknownSymbolError."""
    return _Parser(text, table or SymbolTable(), n).parse()


def load_declarations(decls, table: SymbolTable) -> list:
    """Declare symbols from a JSON-style list of {name, arity, codomain}."""
    if isinstance(decls, str):
        decls = json.loads(decls)
    out = []
    for d in decls:
        out.append(table.declare(d["name"], int(d["arity"]), d["codomain"]))
    return out


# ---------------------------------------------------------------------------
# printing
# ---------------------------------------------------------------------------

_PREC_SUM = 1
_PREC_TERM = 2
_PREC_POW = 3
_PREC_ATOM = 4


def var_name(v: VarId) -> str:
    if v.kind == "t":
        return "t"
    if v.kind == "x":
        return f"x{v.a}"
    suffix = "t" * v.alpha[0] + "".join(str(a) * v.alpha[a] for a in range(1, len(v.alpha)))
    name = "psi" if not suffix else f"psi_{suffix}"
    return f"conj({name})" if v.conj else name


def _frac(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _const_text(e: Const) -> tuple[str, int]:
    if e.im == 0:
        s = _frac(e.re)
        prec = _PREC_ATOM if e.re >= 0 and e.re.denominator == 1 else (
            _PREC_SUM if e.re < 0 else _PREC_TERM)
        return s, prec
    if e.re == 0:
        if e.im == 1:
            return "i", _PREC_ATOM
        if e.im == -1:
            return "-i", _PREC_SUM
        return f"{_frac(e.im)}*i", _PREC_SUM if e.im < 0 else _PREC_TERM
    im = f"{_frac(e.im)}*i" if e.im != 1 else "i"
    return f"({_frac(e.re)} + {im})" if e.im > 0 else f"({_frac(e.re)} - {_frac(-e.im)}*i)", _PREC_ATOM


def _wrap(s: str, prec: int, context: int) -> str:
    return f"({s})" if prec < context else s


def _text(e: Expr) -> tuple[str, int]:
    if isinstance(e, Const):
        return _const_text(e)
    if isinstance(e, Var):
        return var_name(e.vid), _PREC_ATOM
    if isinstance(e, Sum):
        parts = []
        for i, tm in enumerate(e.terms):
            s, p = _text(tm)
            if i == 0:
                parts.append(s)
            elif s.startswith("-"):
                parts.append(f" - {s[1:]}")
            else:
                parts.append(f" + {s if p > _PREC_SUM else '(' + s + ')'}")
        return "".join(parts), _PREC_SUM
    if isinstance(e, Product):
        head = e.factors[0]
        if isinstance(head, Const) and head.im == 0 and head.re < 0:
            # pull the sign out so sums can print "a - b"
            pos = const(-head.re)
            rest = e.factors[1:] if pos.re == 1 else (pos,) + e.factors[1:]
            body = "*".join(_wrap(*_text(f), _PREC_TERM) for f in rest)
            return f"-{body}", _PREC_SUM
        return "*".join(_wrap(*_text(f), _PREC_TERM) for f in e.factors), _PREC_TERM
    if isinstance(e, IntPow):
        b, p = _text(e.base)
        exp = str(e.k) if e.k >= 0 else f"(-{-e.k})"
        return f"{_wrap(b, p, _PREC_ATOM)}^{exp}", _PREC_POW
    if isinstance(e, AbsPow):
        b, _ = _text(e.base)
        if e.q == 1:
            return f"|{b}|", _PREC_ATOM
        q = e.q
        if q.denominator == 1 and q >= 0:
            exp = str(q.numerator)
        else:
            exp = f"({_frac(q)})"
        return f"|{b}|^{exp}", _PREC_POW
    if isinstance(e, Sign):
        b, _ = _text(e.base)
        return f"sgn({b})", _PREC_ATOM
    if isinstance(e, Conj):
        a, _ = _text(e.arg)
        return f"conj({a})", _PREC_ATOM
    if isinstance(e, FuncApp):
        name = e.sym.name
        if any(e.didx):
            name += "[" + ",".join(str(k) for k in e.didx) + "]"
        if e.sym.arity == 0:
            return name, _PREC_ATOM
        args = ", ".join(_text(a)[0] for a in e.args)
        return f"{name}({args})", _PREC_ATOM
    raise TypeError(f"cannot print {type(e).__name__}")


def to_text(e: Expr) -> str:
    """Render an expression in the grammar; reparsing gives the same DAG."""
    return _text(e)[0]
