"""The n=2 classification table and its randomized verifier.

Each case ships as template strings plus declarations that say how the
parameters are drawn.  Verification instantiates the case several times
with fresh random parameters/surrogates and checks (i) zero classifying
residual for every listed generator, (ii) bracket closure of the span,
(iii) the expected invariant tuple, (iv) the structural constraints every
tuple must satisfy.

The quadratic cases are instantiated in reverse: fundamental solutions of
the shift equation are drawn in closed form and the potential coefficients
are defined from them, which exercises exactly the listed algebra-potential
relations without numerical ODE solving.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Callable, Optional

import numpy as np

from .closedform import expr_to_exppoly, exppoly_to_expr
from .conditions import InvariantTuple, Potential, SpanError, classifying_residual, invariants
from .expr import COS, SIN, T_VAR, abs_pow, const, diff, func_app, int_pow
from .fields import GeneratorCoeffs
from .funcbank import (ConstImpl, ExpPoly, ExpPolyImpl, random_positive_trig_poly,
                       random_surrogate)
from .numeric import ExprImpl, Workspace, eval_batch, max_normalized_residual
from .parsing import parse


@dataclass
class CaseEntry:
    """One row of the classification table."""

    id: int
    label: str
    potential: str
    generators: list[dict]
    declarations: list[dict]
    expected: InvariantTuple
    side_conditions: list[dict] = field(default_factory=list)
    builder: Optional[str] = None
    n: int = 2

    def __post_init__(self):
        if len(self.generators) != self.expected.dim:
            raise ValueError(f"case {self.id}: generator count != expected dimension")


def load_table() -> dict[int, CaseEntry]:
    raw = json.loads(resources.files("schsym.data").joinpath("cases_n2.json").read_text())
    out = {}
    for c in raw["cases"]:
        entry = CaseEntry(
            id=c["id"], label=c["label"], potential=c["potential"],
            generators=c["generators"], declarations=c.get("declarations", []),
            expected=InvariantTuple(*c["expected_invariants"]),
            side_conditions=c.get("side_conditions", []),
            builder=c.get("builder"), n=raw.get("n", 2))
        out[entry.id] = entry
    return out


_TABLE: Optional[dict[int, CaseEntry]] = None


def table() -> dict[int, CaseEntry]:
    global _TABLE
    if _TABLE is None:
        _TABLE = load_table()
    return _TABLE


class UnknownCaseError(KeyError):
    pass


# ---------------------------------------------------------------------------
# instantiation
# ---------------------------------------------------------------------------

@dataclass
class CaseInstance:
    V: Potential
    generators: list[GeneratorCoeffs]
    workspace: Workspace
    notes: dict


def _draw_value(kind: str, rng) -> complex:
    if kind == "real":
        return float(rng.uniform(-1, 1))
    if kind == "positive":
        return float(rng.uniform(0.3, 1.3))
    if kind == "real_nonzero":
        return float(rng.uniform(0.3, 1.3)) * (1 if rng.random() < 0.5 else -1)
    if kind == "complex_nonzero":
        ang = rng.uniform(0, 2 * np.pi)
        rad = rng.uniform(0.3, 1.3)
        return complex(rad * np.cos(ang), rad * np.sin(ang))
    raise ValueError(f"unknown draw kind {kind!r}")


def instantiate(case: CaseEntry, rng: np.random.Generator) -> CaseInstance:
    """Bind all declared symbols for one random draw of the case."""
    ws = Workspace()
    deferred = []
    for d in case.declarations:
        sym = ws.table.declare(d["name"], int(d["arity"]), d["codomain"])
        kind = d.get("draw", "surrogate")
        if kind == "surrogate":
            ws.binding.bind(sym, random_surrogate(rng, sym.arity, sym.codomain))
        elif kind == "positive_fn":
            ws.binding.bind(sym, ExpPolyImpl(random_positive_trig_poly(rng)))
        elif kind in ("real", "positive", "real_nonzero", "complex_nonzero"):
            ws.binding.bind(sym, ConstImpl(_draw_value(kind, rng)))
        elif kind == "antiderivative":
            deferred.append((sym, d["integrand"]))
        elif kind == "builder":
            pass
        else:
            raise ValueError(f"unknown draw kind {kind!r}")
    for sym, integrand_text in deferred:
        integrand = parse(integrand_text, ws.table, case.n)
        poly = expr_to_exppoly(integrand, ws.binding.impl_map())
        ws.binding.bind(sym, ExpPolyImpl(poly.antiderivative()))
    notes: dict = {}
    if case.builder:
        _BUILDERS[case.builder](ws, rng, notes)

    V = Potential(parse(case.potential, ws.table, case.n), case.n, ws.binding)
    gens = [_parse_generator(spec, ws, case.n) for spec in case.generators]
    return CaseInstance(V, gens, ws, notes)


def _parse_generator(spec: dict, ws: Workspace, n: int) -> GeneratorCoeffs:
    tau = parse(spec.get("tau", "0"), ws.table, n)
    sigma = parse(spec.get("sigma", "0"), ws.table, n)
    rho = parse(spec.get("rho", "0"), ws.table, n)
    chi = tuple(parse(s, ws.table, n) for s in spec.get("chi", ["0"] * n))
    kappa_text = spec.get("kappa", "0")
    kexpr = parse(kappa_text, ws.table, n)
    vals, _, _ = eval_batch(kexpr, ws.binding, {}, count=1)
    kv = complex(vals.reshape(-1)[0])
    if abs(kv.imag) > 1e-12:
        raise ValueError("kappa must be real")
    kappa = (Fraction(kv.real),)
    return GeneratorCoeffs(n, tau, kappa, chi, sigma, rho, None)


# -- builders for the quadratic cases -----------------------------------------

def _liouville_pair(rng, ws: Workspace):
    """A scalar pair u1, u2 with u'' = d u, constant unit Wronskian.

    u1 = G^(-1/2) cos F, u2 = G^(-1/2) sin F with F' = G > 0, and
    d = 3/4 (G'/G)^2 - 1/2 G''/G - G^2, all in closed form.
    """
    G = random_positive_trig_poly(rng, low=0.9, high=1.6, ripple=0.25)
    F = G.antiderivative()
    G_expr = exppoly_to_expr(G)
    F_expr = exppoly_to_expr(F)
    amp = abs_pow(G_expr, Fraction(-1, 2))
    u1 = amp * func_app(COS, [F_expr])
    u2 = amp * func_app(SIN, [F_expr])
    Gp = diff(G_expr, T_VAR)
    Gpp = diff(Gp, T_VAR)
    d = const(Fraction(3, 4)) * Gp * Gp * int_pow(G_expr, -2) \
        - const(Fraction(1, 2)) * Gpp * int_pow(G_expr, -1) - G_expr * G_expr
    return u1, u2, d, G_expr, F_expr


def build_case16(ws: Workspace, rng, notes: dict) -> None:
    from .equivalence import rational_rotation

    m = Fraction(int(rng.integers(-6, 7)), 13)
    Q = rational_rotation(m)
    u1, u2, d1, G1, F1 = _liouville_pair(rng, ws)
    v1, v2, d2, G2, F2 = _liouville_pair(rng, ws)
    c1 = float(rng.uniform(0.3, 1.0)) * (1 if rng.random() < 0.5 else -1)
    c2 = float(rng.uniform(0.3, 1.0)) * (1 if rng.random() < 0.5 else -1)

    q00, q01 = Q[0]
    q10, q11 = Q[1]
    h11 = const(q00 * q00) * d1 + const(q01 * q01) * d2
    h12 = const(q00 * q10) * d1 + const(q01 * q11) * d2
    h22 = const(q10 * q10) * d1 + const(q11 * q11) * d2
    g1_32 = abs_pow(G1, Fraction(3, 2))
    g2_32 = abs_pow(G2, Fraction(3, 2))
    h01 = const(Fraction(c1)) * const(q00) * g1_32 + const(Fraction(c2)) * const(q01) * g2_32
    h02 = const(Fraction(c1)) * const(q10) * g1_32 + const(Fraction(c2)) * const(q11) * g2_32

    cexprs = {
        "c11": const(q00) * u1, "c12": const(q10) * u1,
        "c21": const(q00) * u2, "c22": const(q10) * u2,
        "c31": const(q01) * v1, "c32": const(q11) * v1,
        "c41": const(q01) * v2, "c42": const(q11) * v2,
        "h11": h11, "h12": h12, "h22": h22, "h01": h01, "h02": h02,
        "r1": const(Fraction(-c1)) * func_app(SIN, [F1]),
        "r2": const(Fraction(c1)) * func_app(COS, [F1]),
        "r3": const(Fraction(-c2)) * func_app(SIN, [F2]),
        "r4": const(Fraction(c2)) * func_app(COS, [F2]),
    }
    for name, e in cexprs.items():
        ws.binding.bind(ws.table.get(name), ExprImpl(e, ws.binding))
    notes["rotation"] = [float(Q[0][0]), float(Q[1][0])]


def build_case17(ws: Workspace, rng, notes: dict) -> None:
    while True:
        al = float(rng.uniform(-2.0, 2.0))
        be = float(rng.uniform(-2.0, 2.0))
        if min(abs(al), abs(be), abs(al - be)) > 0.15:
            break
    n1 = float(rng.uniform(-1, 1))
    n2 = float(rng.uniform(-1, 1))
    ws.binding.bind(ws.table.get("al"), ConstImpl(al))
    ws.binding.bind(ws.table.get("be"), ConstImpl(be))
    ws.binding.bind(ws.table.get("n1"), ConstImpl(n1))
    ws.binding.bind(ws.table.get("n2"), ConstImpl(n2))

    def scalar_pair(lam: float) -> tuple[ExpPoly, ExpPoly]:
        if lam < 0:
            w = float(np.sqrt(-lam))
            return ExpPoly.cos(w), ExpPoly.sin(w)
        w = float(np.sqrt(lam))
        return ExpPoly.exp(w), ExpPoly.exp(-w)

    u1, u2 = scalar_pair(al)
    v1, v2 = scalar_pair(be)
    names = [("c11", u1, n1), ("c21", u2, n1), ("c32", v1, n2), ("c42", v2, n2)]
    for i, (name, u, nu) in enumerate(names, start=1):
        ws.binding.bind(ws.table.get(name), ExpPolyImpl(u))
        rho = u.scale(-nu).antiderivative()
        ws.binding.bind(ws.table.get(f"r{i}"), ExpPolyImpl(rho))
    notes["al"], notes["be"] = al, be


def build_case18(ws: Workspace, rng, notes: dict) -> None:
    while True:
        al = float(rng.uniform(-2.0, 2.0))
        be = float(rng.uniform(-2.0, 2.0))
        if min(abs(al - be), abs(1 + al), abs(1 + be)) < 0.15:
            continue
        s = al + be
        roots = np.roots([1.0, 0.0, 2.0 - s, 0.0, (1 + al) * (1 + be)])
        sep = min(abs(a - b) for i, a in enumerate(roots) for b in roots[i + 1:])
        if sep > 0.1 and np.min(np.abs(roots)) > 0.1:
            break
    n1 = float(rng.uniform(-1, 1))
    n2 = float(rng.uniform(-1, 1))
    for name, v in (("al", al), ("be", be), ("n1", n1), ("n2", n2)):
        ws.binding.bind(ws.table.get(name), ConstImpl(v))

    # rotating-frame solutions theta with theta1'' - 2 theta2' = (1+al) theta1,
    # theta2'' + 2 theta1' = (1+be) theta2; eigen-solutions w e^(lam t)
    thetas: list[tuple[ExpPoly, ExpPoly]] = []
    used = set()
    for lam in roots:
        lam = complex(lam)
        key = (round(lam.real, 9), round(abs(lam.imag), 9))
        w = (2.0 * lam, lam * lam - 1.0 - al)
        if abs(lam.imag) < 1e-10:
            th1 = ExpPoly({complex(lam.real): (w[0].real,)})
            th2 = ExpPoly({complex(lam.real): (w[1].real,)})
            thetas.append((th1, th2))
        else:
            if key in used:
                continue
            used.add(key)
            # real and imaginary parts of w e^(lam t)
            for part in (0, 1):
                comps = []
                for wc in w:
                    c = wc / 2 if part == 0 else wc / 2j
                    comps.append(ExpPoly({lam: (c,), lam.conjugate(): (c.conjugate(),)}))
                thetas.append(tuple(comps))
    thetas = thetas[:4]
    cos1 = ExpPoly.cos(1.0)
    sin1 = ExpPoly.sin(1.0)
    for p, (th1, th2) in enumerate(thetas, start=1):
        chi1 = th1 * cos1 - th2 * sin1
        chi2 = th1 * sin1 + th2 * cos1
        ws.binding.bind(ws.table.get(f"c{p}1"), ExpPolyImpl(chi1))
        ws.binding.bind(ws.table.get(f"c{p}2"), ExpPolyImpl(chi2))
        rho = (th1.scale(-n1) + th2.scale(-n2)).antiderivative()
        ws.binding.bind(ws.table.get(f"r{p}"), ExpPolyImpl(rho))
    notes["roots"] = [complex(r) for r in roots]


_BUILDERS: dict[str, Callable] = {
    "case16": build_case16,
    "case17": build_case17,
    "case18": build_case18,
}


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

def _check_side_conditions(case: CaseEntry, inst: CaseInstance, rng) -> list[dict]:
    out = []
    for cond in case.side_conditions:
        if cond["kind"] == "prose":
            out.append({"kind": "prose", "text": cond["text"], "checked": False})
            continue
        if cond["kind"] == "nonzero_slot_deriv":
            sym = inst.workspace.table.get(cond["symbol"])
            impl = inst.workspace.binding.lookup(sym)
            didx = tuple(1 if i == cond["slot"] else 0 for i in range(sym.arity))
            args = tuple(np.linspace(-1.2, 1.2, 9).astype(complex)
                         for _ in range(sym.arity))
            vals = impl.deriv(didx, args)
            ok = bool(np.max(np.abs(vals)) > 1e-6)
            out.append({"kind": cond["kind"], "symbol": cond["symbol"],
                        "checked": True, "passed": ok})
            continue
        out.append({"kind": cond["kind"], "checked": False})
    return out


def verify_case(case_id: int, draws: int = 5, rng: Optional[np.random.Generator] = None,
                points: int = 100, zero_trials: int = 1, tol: float = 1e-8) -> dict:
    """Verify one classification case over several random instantiations.

    Per draw: every listed generator must have numerically zero classifying
    residual, the span must be bracket-closed, the invariant tuple must match
    the expected one, and the tuple must satisfy the structural constraints.
    """
    tab = table()
    if case_id not in tab:
        raise UnknownCaseError(f"unknown case id {case_id}")
    case = tab[case_id]
    if rng is None:
        rng = np.random.default_rng(0)

    report = {
        "case": case.id,
        "label": case.label,
        "potential": case.potential,
        "expected_invariants": list(case.expected),
        "draws": draws,
        "residuals": {"passed": True, "failures": []},
        "closure": {"passed": True, "failures": []},
        "invariants": {"passed": True, "failures": []},
        "constraints": {"passed": True, "violations": []},
        "side_conditions": [],
    }
    for draw in range(draws):
        inst = instantiate(case, rng)
        for gi, g in enumerate(inst.generators):
            res = classifying_residual(inst.V, g)
            worst, witness = max_normalized_residual(
                res, binding=inst.workspace.binding, trials=zero_trials,
                points=points, rng=rng)
            if worst >= tol:
                report["residuals"]["passed"] = False
                report["residuals"]["failures"].append(
                    {"draw": draw, "generator": gi, "max_residual": worst,
                     "witness": json_witness(witness)})
        try:
            tup = invariants(inst.generators, inst.workspace.binding, rng, tol)
        except SpanError as err:
            report["closure"]["passed"] = False
            report["closure"]["failures"].append({"draw": draw, "error": str(err)})
            continue
        if tuple(tup) != tuple(case.expected):
            report["invariants"]["passed"] = False
            report["invariants"]["failures"].append(
                {"draw": draw, "got": list(tup), "expected": list(case.expected)})
        bad = tup.constraint_violations(case.n)
        if bad:
            report["constraints"]["passed"] = False
            report["constraints"]["violations"].append({"draw": draw, "violations": bad})
        if draw == 0:
            report["side_conditions"] = _check_side_conditions(case, inst, rng)
    side_ok = all(c.get("passed", True) for c in report["side_conditions"])
    report["passed"] = (report["residuals"]["passed"] and report["closure"]["passed"]
                        and report["invariants"]["passed"]
                        and report["constraints"]["passed"] and side_ok)
    return report


def json_witness(witness) -> dict:
    if witness is None:
        return {}
    out = {"normalized": witness["normalized"],
           "value": [witness["value"].real, witness["value"].imag],
           "point": {}}
    for k, v in witness["point"].items():
        v = complex(v)
        out["point"][k] = v.real if v.imag == 0 else [v.real, v.imag]
    return out


def verify_table(draws: int = 5, seed: int = 0, points: int = 100,
                 zero_trials: int = 1, tol: float = 1e-8,
                 case_ids: Optional[list[int]] = None) -> dict:
    """Run verify_case over the whole table with per-case seed substreams."""
    ids = sorted(table()) if case_ids is None else sorted(case_ids)
    reports = []
    for cid in ids:
        rng = np.random.default_rng([seed, 1000 + cid])
        reports.append(verify_case(cid, draws=draws, rng=rng, points=points,
                                   zero_trials=zero_trials, tol=tol))
    return {
        "seed": seed,
        "draws": draws,
        "points": points,
        "tol": tol,
        "cases": reports,
        "passed": all(r["passed"] for r in reports),
    }
