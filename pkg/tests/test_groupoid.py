"""Finite groupoid kit: axioms, Frobenius products, fixture truth table."""
import json

import pytest

from schsym.groupoid import (FIXTURE_BUILDERS, FIXTURE_TRUTH_TABLE,
                             FiniteGroupoid, GroupoidError, GroupoidModel,
                             ModelNotUniform, frobenius_product, is_disjointedly,
                             is_semi_normalized, is_uniform, kernel_labels,
                             load_fixture, model_from_json, model_to_json,
                             run_all_checks, verify_extension, verify_factorization)


def s3_model():
    return FIXTURE_BUILDERS["disjoint_semi"]()


def test_axioms_validated_on_construction():
    G = s3_model().G
    # drop one composition entry -> missing-composition error
    bad_mult = dict(G.mult)
    bad_mult.pop(next(iter(bad_mult)))
    with pytest.raises(GroupoidError):
        FiniteGroupoid(G.objects, G.arrows, bad_mult)
    # corrupt one entry -> endpoint or associativity error
    key = next(iter(G.mult))
    wrong = dict(G.mult)
    a = G.arrows[wrong[key]]
    other = next(i for i, b in enumerate(G.arrows)
                 if (b.src, b.tgt) == (a.src, a.tgt) and i != wrong[key])
    wrong[key] = other
    with pytest.raises(GroupoidError):
        FiniteGroupoid(G.objects, G.arrows, wrong)


def test_frobenius_product_against_double_loop():
    m = s3_model()
    G = m.G
    A, B = sorted(m.n_f()), sorted(m.H)
    brute = set()
    for i in A:
        for j in B:
            if G.arrows[i].tgt == G.arrows[j].src:
                brute.add(G.mult[(i, j)])
    assert frobenius_product(G, A, B) == frozenset(brute)


def test_frobenius_units_are_neutral():
    m = s3_model()
    G = m.G
    units = [G.unit[obj] for obj in G.objects]
    arrows = sorted(G.all_arrows())
    assert frobenius_product(G, units, arrows) == frozenset(arrows)
    assert frobenius_product(G, arrows, units) == frozenset(arrows)


def test_fixture_truth_table():
    for name, builder in FIXTURE_BUILDERS.items():
        got = run_all_checks(builder())
        assert got == FIXTURE_TRUTH_TABLE[name], name


def test_shipped_files_match_builders():
    for name in FIXTURE_BUILDERS:
        model = load_fixture(name)
        assert run_all_checks(model) == FIXTURE_TRUTH_TABLE[name], name


def test_uniformity_counterexample():
    # a deliberately twisted family: full vertex group at one object only
    m = s3_model()
    G = m.G
    even = ("e", "r", "rr")
    N = {"a": frozenset(i for i in G.vertex_group("a") if G.arrows[i].label in even),
         "b": frozenset({G.unit["b"]})}
    twisted = GroupoidModel(G, m.H, N)
    assert not is_uniform(twisted)
    with pytest.raises(ModelNotUniform):
        is_semi_normalized(twisted)


def test_full_vertex_family_uniform_iff_normal():
    # N = full vertex groups is uniform since conjugation preserves them
    m = s3_model()
    G = m.G
    N = {obj: G.vertex_group(obj) for obj in G.objects}
    full = GroupoidModel(G, m.H, N)
    assert is_uniform(full)
    assert is_semi_normalized(full)


def test_factorization_details():
    rep = verify_factorization(s3_model())
    assert rep["applicable"] and rep["passed"] and rep["disjoint"]
    for entry in rep["objects"].values():
        assert entry["unique_decomposition"]
    ndm = FIXTURE_BUILDERS["non_disjoint_semi"]()
    rep2 = verify_factorization(ndm)
    assert rep2["applicable"] and rep2["passed"] and not rep2["disjoint"]
    nsm = FIXTURE_BUILDERS["non_semi"]()
    rep3 = verify_factorization(nsm)
    assert not rep3["applicable"] and not rep3["passed"]


def test_semidirect_vertex_group():
    # one object with full S3 vertex group: G = (C2 acting on C3), split exactly
    from schsym.groupoid import _S3, _perm_group

    compose = _perm_group(_S3)
    action = {lab: {"pt": "pt"} for lab in _S3}
    arrow_set = [("pt", lab) for lab in _S3]
    G = FiniteGroupoid.from_label_action(["pt"], list(_S3), compose, action, arrow_set)
    H = frozenset(i for i, a in enumerate(G.arrows) if a.label in ("e", "s"))
    N = {"pt": frozenset(i for i, a in enumerate(G.arrows)
                         if a.label in ("e", "r", "rr"))}
    m = GroupoidModel(G, H, N)
    assert is_uniform(m) and is_semi_normalized(m) and is_disjointedly(m)
    rep = verify_factorization(m)
    assert rep["passed"] and rep["objects"]["pt"]["unique_decomposition"]


def test_normal_subgroupoid_property():
    # conjugation carries N_src onto N_tgt along every arrow (semi-normalized)
    m = s3_model()
    G = m.G
    for i, a in enumerate(G.arrows):
        conj = {G.mult[(G.mult[(G.inv[i], nn)], i)] for nn in m.N[a.src]}
        assert conj == set(m.N[a.tgt])


def test_connectivity_matches_action_groupoid():
    m = s3_model()
    G = m.G
    full = G.connected_components(G.all_arrows())
    act = G.connected_components(m.H)
    assert sorted(map(sorted, full)) == sorted(map(sorted, act))


def test_kernel_and_extension():
    m = s3_model()
    assert kernel_labels(m.G) == {"e", "r", "rr"}
    assert verify_extension(m)  # uses the shipped Hbar
    assert verify_extension(m, m.H)  # Hbar = H is allowed
    with pytest.raises(GroupoidError):
        verify_extension(m, frozenset())  # not wide


def test_json_round_trip_and_malformed():
    m = s3_model()
    data = model_to_json(m)
    m2 = model_from_json(json.dumps(data))
    assert run_all_checks(m2) == run_all_checks(m)
    with pytest.raises(GroupoidError):
        model_from_json({"objects": ["a"]})


def test_model_caps():
    objects = [f"o{i}" for i in range(9)]
    with pytest.raises(GroupoidError):
        FiniteGroupoid(objects, [], {})
