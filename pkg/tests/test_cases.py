"""Case table integrity and per-case verification."""
import numpy as np
import pytest

from schsym.cases import UnknownCaseError, instantiate, table, verify_case, verify_table
from schsym.conditions import classifying_residual
from schsym.expr import T_VAR, diff, func_app, t, var
from schsym.numeric import is_zero


def test_table_loads_all_twenty():
    tab = table()
    assert sorted(tab) == list(range(20))
    for case in tab.values():
        assert len(case.generators) == case.expected.dim
        assert case.expected.constraint_violations(case.n) == []


def test_expected_tuples_cover_all_observed_patterns():
    tab = table()
    dims = {cid: tab[cid].expected.dim for cid in tab}
    assert dims[19] == 10
    assert dims[0] == 2
    assert max(tab[cid].expected.k0 + tab[cid].expected.k1 for cid in tab) == 6


@pytest.mark.parametrize("cid", [0, 3, 7, 9, 13, 16, 18])
def test_single_cases_verify(cid):
    rep = verify_case(cid, draws=2, rng=np.random.default_rng([9, cid]), points=60)
    assert rep["passed"], rep


def test_unknown_case():
    with pytest.raises(UnknownCaseError):
        verify_case(99)


def test_reverse_instantiation_satisfies_ode_relations():
    # case 16: each chi tuple solves chi'' = h chi and rho' = -h0 . chi
    case = table()[16]
    rng = np.random.default_rng(55)
    inst = instantiate(case, rng)
    ws = inst.workspace
    h = {name: func_app(ws.table.get(name), [t()])
         for name in ("h11", "h12", "h22", "h01", "h02")}
    for p in range(1, 5):
        c1 = func_app(ws.table.get(f"c{p}1"), [t()])
        c2 = func_app(ws.table.get(f"c{p}2"), [t()])
        r = func_app(ws.table.get(f"r{p}"), [t()])
        ode1 = diff(diff(c1, T_VAR), T_VAR) - h["h11"] * c1 - h["h12"] * c2
        ode2 = diff(diff(c2, T_VAR), T_VAR) - h["h12"] * c1 - h["h22"] * c2
        rho_rel = diff(r, T_VAR) + h["h01"] * c1 + h["h02"] * c2
        for e in (ode1, ode2, rho_rel):
            assert is_zero(e, trials=2, points=40, binding=ws.binding,
                           rng=np.random.default_rng(66))


def test_case10_generator_sign_is_forced():
    # rho1 = +2 beta t |t|^(-3/2) is forced; the flipped sign must be rejected
    case = table()[10]
    rng = np.random.default_rng(77)
    inst = instantiate(case, rng)
    good = inst.generators[2]
    res = classifying_residual(inst.V, good)
    assert is_zero(res, binding=inst.workspace.binding, rng=np.random.default_rng(1))
    flipped = good.scale(1)
    flipped = type(good)(good.n, good.tau, good.kappa, good.chi,
                         good.sigma, -1 * good.rho, None)
    res_bad = classifying_residual(inst.V, flipped)
    assert not is_zero(res_bad, binding=inst.workspace.binding,
                       rng=np.random.default_rng(1))


def test_verify_table_smoke():
    rep = verify_table(draws=1, seed=4, points=50, case_ids=[0, 5, 12, 19])
    assert rep["passed"]
    assert [r["case"] for r in rep["cases"]] == [0, 5, 12, 19]


def test_verify_table_deterministic():
    r1 = verify_table(draws=1, seed=6, points=40, case_ids=[2, 14])
    r2 = verify_table(draws=1, seed=6, points=40, case_ids=[2, 14])
    assert r1 == r2


def test_strict_tolerance_reports_witness():
    rep = verify_case(2, draws=1, rng=np.random.default_rng(3), points=40, tol=1e-30)
    assert not rep["passed"]
    assert rep["residuals"]["failures"]
    wit = rep["residuals"]["failures"][0]["witness"]
    assert "point" in wit and wit["point"]
