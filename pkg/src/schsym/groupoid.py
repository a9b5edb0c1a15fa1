"""Finite groupoid models for the abstract factorization theory.

Arrows are (source, label, target) triples with an explicit partial
multiplication table; labels play the role of the underlying point
transformations, so intersections like N_theta with the projected subgroup
are label-set intersections.  Everything is finite and every check is an
exhaustive enumeration, which is a complete decision procedure at this
scale (models are capped at 8 objects / 200 arrows).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional

MAX_OBJECTS = 8
MAX_ARROWS = 200


class GroupoidError(ValueError):
    pass


class ModelNotUniform(GroupoidError):
    pass


class ModelNotSemiNormalized(GroupoidError):
    pass


@dataclass(frozen=True)
class Arrow:
    src: str
    label: str
    tgt: str


class FiniteGroupoid:
    """Explicit objects/arrows/partial multiplication with verified axioms."""

    def __init__(self, objects: list[str], arrows: list[Arrow],
                 mult: dict[tuple[int, int], int]):
        if len(objects) > MAX_OBJECTS or len(arrows) > MAX_ARROWS:
            raise GroupoidError("model exceeds the exhaustive-checking cap")
        self.objects = list(objects)
        self.arrows = list(arrows)
        self.mult = dict(mult)
        self.unit: dict[str, int] = {}
        self.inv: dict[int, int] = {}
        self._arrow_index = {a: i for i, a in enumerate(arrows)}
        if len(self._arrow_index) != len(arrows):
            raise GroupoidError("duplicate arrows")
        self._validate()

    # -- construction helpers

    @staticmethod
    def from_label_action(objects: list[str], labels: list[str],
                          compose: dict[tuple[str, str], str],
                          action: dict[str, dict[str, str]],
                          arrow_set: Iterable[tuple[str, str]]) -> "FiniteGroupoid":
        """Build a groupoid from a label group acting on objects.

        compose[(l1, l2)] is the label of 'first l1 then l2'; action[l] maps
        each object to its image; arrow_set lists (src, label) pairs.
        """
        arrows = [Arrow(src, lab, action[lab][src]) for src, lab in arrow_set]
        index = {(a.src, a.label): i for i, a in enumerate(arrows)}
        mult = {}
        for i, a in enumerate(arrows):
            for j, b in enumerate(arrows):
                if a.tgt != b.src:
                    continue
                lab = compose[(a.label, b.label)]
                k = index.get((a.src, lab))
                if k is None:
                    raise GroupoidError(
                        f"arrow set not closed: {a} * {b} needs label {lab} at {a.src}")
                mult[(i, j)] = k
        return FiniteGroupoid(objects, arrows, mult)

    # -- validation (exhaustive)

    def _validate(self):
        n = len(self.arrows)
        for (i, j), k in self.mult.items():
            a, b, c = self.arrows[i], self.arrows[j], self.arrows[k]
            if a.tgt != b.src:
                raise GroupoidError("multiplication defined for non-composable pair")
            if c.src != a.src or c.tgt != b.tgt:
                raise GroupoidError("composition endpoints are wrong")
        for i in range(n):
            for j in range(n):
                if self.arrows[i].tgt == self.arrows[j].src and (i, j) not in self.mult:
                    raise GroupoidError("missing composition for a composable pair")
        # associativity
        for (i, j), ij in self.mult.items():
            for k in range(n):
                if self.arrows[j].tgt != self.arrows[k].src:
                    continue
                left = self.mult[(ij, k)]
                right = self.mult[(i, self.mult[(j, k)])]
                if left != right:
                    raise GroupoidError("associativity fails")
        # units
        for obj in self.objects:
            candidates = [i for i, a in enumerate(self.arrows)
                          if a.src == obj and a.tgt == obj
                          and all(self.mult[(i, j)] == j for j, b in enumerate(self.arrows)
                                  if b.src == obj)
                          and all(self.mult[(j, i)] == j for j, b in enumerate(self.arrows)
                                  if b.tgt == obj)]
            if len(candidates) != 1:
                raise GroupoidError(f"object {obj} has {len(candidates)} units")
            self.unit[obj] = candidates[0]
        unit_labels = {self.arrows[i].label for i in self.unit.values()}
        if len(unit_labels) != 1:
            raise GroupoidError("unit arrows must share a single identity label")
        self.unit_label = next(iter(unit_labels))
        # inverses
        for i, a in enumerate(self.arrows):
            invs = [j for j, b in enumerate(self.arrows)
                    if b.src == a.tgt and b.tgt == a.src
                    and self.mult[(i, j)] == self.unit[a.src]
                    and self.mult[(j, i)] == self.unit[a.tgt]]
            if len(invs) != 1:
                raise GroupoidError(f"arrow {a} has {len(invs)} inverses")
            self.inv[i] = invs[0]

    # -- basic queries

    def all_arrows(self) -> frozenset[int]:
        return frozenset(range(len(self.arrows)))

    def vertex_group(self, obj: str) -> frozenset[int]:
        return frozenset(i for i, a in enumerate(self.arrows)
                         if a.src == obj and a.tgt == obj)

    def labels(self, arrow_ids: Iterable[int]) -> frozenset[str]:
        return frozenset(self.arrows[i].label for i in arrow_ids)

    def compose(self, i: int, j: int) -> Optional[int]:
        return self.mult.get((i, j))

    def is_subgroupoid(self, ids: frozenset[int], wide: bool = True) -> bool:
        if wide and any(self.unit[obj] not in ids for obj in self.objects):
            return False
        for i in ids:
            if self.inv[i] not in ids:
                return False
            for j in ids:
                k = self.mult.get((i, j))
                if k is not None and k not in ids:
                    return False
        return True

    def is_subgroup_at(self, obj: str, ids: frozenset[int]) -> bool:
        if not ids <= self.vertex_group(obj):
            return False
        if self.unit[obj] not in ids:
            return False
        for i in ids:
            if self.inv[i] not in ids:
                return False
            for j in ids:
                if self.mult[(i, j)] not in ids:
                    return False
        return True

    def connected_components(self, arrow_ids: frozenset[int]) -> list[set[str]]:
        parent = {o: o for o in self.objects}

        def find(o):
            while parent[o] != o:
                parent[o] = parent[parent[o]]
                o = parent[o]
            return o

        for i in arrow_ids:
            a, b = find(self.arrows[i].src), find(self.arrows[i].tgt)
            if a != b:
                parent[a] = b
        comps: dict[str, set[str]] = {}
        for o in self.objects:
            comps.setdefault(find(o), set()).add(o)
        return list(comps.values())


def frobenius_product(G: FiniteGroupoid, A: Iterable[int], B: Iterable[int]) -> frozenset[int]:
    """All defined compositions a * b with matching endpoints."""
    out = set()
    for i in A:
        for j in B:
            k = G.mult.get((i, j))
            if k is not None:
                out.add(k)
    return frozenset(out)


@dataclass
class GroupoidModel:
    """A groupoid with a distinguished action subgroupoid and symmetry family."""

    G: FiniteGroupoid
    H: frozenset[int]
    N: dict[str, frozenset[int]]
    Hbar: Optional[frozenset[int]] = None

    def __post_init__(self):
        if not self.G.is_subgroupoid(self.H, wide=True):
            raise GroupoidError("H is not a wide subgroupoid")
        for obj in self.G.objects:
            ids = self.N.get(obj, frozenset())
            if not self.G.is_subgroup_at(obj, ids):
                raise GroupoidError(f"N[{obj}] is not a subgroup of the vertex group")
        if self.Hbar is not None and not self.G.is_subgroupoid(self.Hbar, wide=True):
            raise GroupoidError("Hbar is not a wide subgroupoid")

    def n_f(self) -> frozenset[int]:
        out = set()
        for ids in self.N.values():
            out |= ids
        return frozenset(out)


def is_uniform(m: GroupoidModel, H: Optional[frozenset[int]] = None) -> bool:
    """N_{s(T)} * T == T * N_{t(T)} for every arrow T of the action subgroupoid."""
    G = m.G
    H = m.H if H is None else H
    for i in H:
        a = G.arrows[i]
        left = {G.mult[(j, i)] for j in m.N[a.src]}
        right = {G.mult[(i, j)] for j in m.N[a.tgt]}
        if left != right:
            return False
    return True


def is_semi_normalized(m: GroupoidModel, H: Optional[frozenset[int]] = None) -> bool:
    """N^f * G^H covers the whole groupoid (requires a uniform family)."""
    H = m.H if H is None else H
    if not is_uniform(m, H):
        raise ModelNotUniform("the symmetry family is not uniform for this action")
    return frobenius_product(m.G, m.n_f(), H) == m.G.all_arrows()


def is_disjointedly(m: GroupoidModel, H: Optional[frozenset[int]] = None) -> bool:
    """N_theta intersects the projected subgroup only in the identity."""
    H = m.H if H is None else H
    if not is_uniform(m, H):
        raise ModelNotUniform("the symmetry family is not uniform for this action")
    h_labels = m.G.labels(H)
    for obj in m.G.objects:
        shared = m.G.labels(m.N[obj]) & h_labels
        if shared != {m.G.unit_label}:
            return False
    return True


def kernel_labels(G: FiniteGroupoid) -> frozenset[str]:
    """Labels of transformations fixing every object (the kernel group)."""
    out = None
    for obj in G.objects:
        labs = G.labels(G.vertex_group(obj))
        out = labs if out is None else (out & labs)
    return out or frozenset()


def verify_factorization(m: GroupoidModel) -> dict:
    """Vertex-group factorization G_theta = G^ess_theta . N_theta.

    Also reports normality of N_theta, and (when the model is disjoint) the
    trivial-intersection and unique-decomposition strengthenings.
    """
    G = m.G
    try:
        semi = is_semi_normalized(m)
    except ModelNotUniform:
        return {"applicable": False, "reason": "family is not uniform",
                "passed": False}
    if not semi:
        return {"applicable": False, "reason": "model is not semi-normalized",
                "passed": False}
    h_labels = G.labels(m.H)
    report = {"applicable": True, "objects": {}, "passed": True}
    try:
        disjoint = is_disjointedly(m)
    except ModelNotUniform:
        disjoint = False
    for obj in G.objects:
        vertex = G.vertex_group(obj)
        n_ids = m.N[obj]
        ess = frozenset(i for i in vertex if G.arrows[i].label in h_labels)
        entry = {}
        entry["ess_is_subgroup"] = G.is_subgroup_at(obj, ess)
        normal = all(
            G.mult[(G.mult[(G.inv[g], nn)], g)] in n_ids
            for g in vertex for nn in n_ids)
        entry["n_normal"] = normal
        prod = frobenius_product(G, ess, n_ids)
        entry["product_covers"] = prod == vertex
        if disjoint:
            entry["trivial_intersection"] = (ess & n_ids) == {G.unit[obj]}
            counts = {}
            for a in ess:
                for b in n_ids:
                    counts[G.mult[(a, b)]] = counts.get(G.mult[(a, b)], 0) + 1
            entry["unique_decomposition"] = (set(counts) == set(vertex)
                                             and all(v == 1 for v in counts.values()))
        report["objects"][obj] = entry
        if not (entry["ess_is_subgroup"] and entry["n_normal"] and entry["product_covers"]):
            report["passed"] = False
        if disjoint and not (entry["trivial_intersection"] and entry["unique_decomposition"]):
            report["passed"] = False
    report["disjoint"] = disjoint
    return report


def verify_extension(m: GroupoidModel, Hbar: Optional[frozenset[int]] = None) -> bool:
    """Semi-normalization persists for a larger subgroup and for the
    kernel-enlarged symmetry family."""
    G = m.G
    Hbar = m.Hbar if Hbar is None else Hbar
    if Hbar is None:
        Hbar = m.H
    if not G.is_subgroupoid(Hbar, wide=True):
        raise GroupoidError("Hbar is not a wide subgroupoid")
    if not (m.H <= Hbar):
        raise GroupoidError("Hbar does not contain H")
    try:
        if not is_semi_normalized(m, Hbar):
            return False
    except ModelNotUniform:
        return False
    klabels = kernel_labels(G)
    nbar = {}
    for obj in G.objects:
        kernel_ids = frozenset(i for i in G.vertex_group(obj)
                               if G.arrows[i].label in klabels)
        prod = frobenius_product(G, m.N[obj], kernel_ids)
        if not G.is_subgroup_at(obj, prod):
            return False
        nbar[obj] = prod
    mbar = GroupoidModel(G, m.H, nbar)
    try:
        return is_semi_normalized(mbar, Hbar)
    except ModelNotUniform:
        return False


def run_all_checks(m: GroupoidModel) -> dict:
    """The documented truth table entries for one model."""
    out = {}
    out["uniform"] = is_uniform(m)
    try:
        out["semi_normalized"] = is_semi_normalized(m)
    except ModelNotUniform:
        out["semi_normalized"] = False
    try:
        out["disjoint"] = is_disjointedly(m)
    except ModelNotUniform:
        out["disjoint"] = False
    fact = verify_factorization(m)
    out["factorization"] = bool(fact.get("applicable") and fact["passed"])
    out["splitting"] = bool(
        fact.get("applicable") and fact["passed"] and fact.get("disjoint")
        and all(e.get("unique_decomposition", False)
                for e in fact["objects"].values()))
    try:
        out["extension"] = verify_extension(m)
    except GroupoidError:
        out["extension"] = False
    return out


# ---------------------------------------------------------------------------
# JSON interface
# ---------------------------------------------------------------------------

def model_to_json(m: GroupoidModel) -> dict:
    G = m.G
    return {
        "objects": list(G.objects),
        "arrows": [{"src": a.src, "label": a.label, "tgt": a.tgt} for a in G.arrows],
        "mult": sorted([i, j, k] for (i, j), k in G.mult.items()),
        "H": sorted(m.H),
        "N": {obj: sorted(G.arrows[i].label for i in ids) for obj, ids in m.N.items()},
        "Hbar": sorted(m.Hbar) if m.Hbar is not None else None,
    }


def model_from_json(data) -> GroupoidModel:
    if isinstance(data, str):
        data = json.loads(data)
    try:
        arrows = [Arrow(d["src"], d["label"], d["tgt"]) for d in data["arrows"]]
        mult = {(i, j): k for i, j, k in data["mult"]}
        G = FiniteGroupoid(data["objects"], arrows, mult)
        H = frozenset(data["H"])
        N = {}
        for obj, labels in data["N"].items():
            wanted = set(labels)
            N[obj] = frozenset(i for i in G.vertex_group(obj)
                               if G.arrows[i].label in wanted)
        hbar = data.get("Hbar")
        return GroupoidModel(G, H, N, None if hbar is None else frozenset(hbar))
    except KeyError as err:
        raise GroupoidError(f"malformed groupoid model file: missing {err}") from None


# ---------------------------------------------------------------------------
# shipped fixtures
# ---------------------------------------------------------------------------

def _perm_group(perms: dict[str, tuple[int, ...]]):
    """Composition table for named permutations (apply first, then second)."""
    compose = {}
    byperm = {p: name for name, p in perms.items()}
    for n1, p1 in perms.items():
        for n2, p2 in perms.items():
            comp = tuple(p2[p1[i]] for i in range(len(p1)))
            compose[(n1, n2)] = byperm[comp]
    return compose


_S3 = {
    "e": (0, 1, 2), "r": (1, 2, 0), "rr": (2, 0, 1),
    "s": (1, 0, 2), "sr": (2, 1, 0), "srr": (0, 2, 1),
}
_EVEN = ("e", "r", "rr")
_ODD = ("s", "sr", "srr")


def _fixture_normalized() -> GroupoidModel:
    objects = ["a", "b"]
    compose = {("e", "e"): "e", ("e", "g"): "g", ("g", "e"): "g", ("g", "g"): "e"}
    action = {"e": {"a": "a", "b": "b"}, "g": {"a": "b", "b": "a"}}
    arrow_set = [("a", "e"), ("b", "e"), ("a", "g"), ("b", "g")]
    G = FiniteGroupoid.from_label_action(objects, ["e", "g"], compose, action, arrow_set)
    H = G.all_arrows()
    N = {obj: frozenset({G.unit[obj]}) for obj in objects}
    return GroupoidModel(G, H, N, Hbar=H)


def _s3_groupoid() -> FiniteGroupoid:
    objects = ["a", "b"]
    compose = _perm_group(_S3)
    action = {}
    for lab in _S3:
        if lab in _EVEN:
            action[lab] = {"a": "a", "b": "b"}
        else:
            action[lab] = {"a": "b", "b": "a"}
    arrow_set = [(obj, lab) for obj in objects for lab in _S3]
    return FiniteGroupoid.from_label_action(objects, list(_S3), compose, action, arrow_set)


def _fixture_disjoint() -> GroupoidModel:
    G = _s3_groupoid()
    H = frozenset(i for i, a in enumerate(G.arrows) if a.label in ("e", "s"))
    N = {obj: frozenset(i for i in G.vertex_group(obj)
                        if G.arrows[i].label in _EVEN) for obj in G.objects}
    return GroupoidModel(G, H, N, Hbar=G.all_arrows())


def _fixture_non_disjoint() -> GroupoidModel:
    G = _s3_groupoid()
    H = G.all_arrows()
    N = {obj: frozenset(i for i in G.vertex_group(obj)
                        if G.arrows[i].label in _EVEN) for obj in G.objects}
    return GroupoidModel(G, H, N, Hbar=H)


def _fixture_non_semi() -> GroupoidModel:
    objects = ["a", "b"]
    compose = {("e", "e"): "e", ("e", "g"): "g", ("g", "e"): "g", ("g", "g"): "e"}
    action = {"e": {"a": "a", "b": "b"}, "g": {"a": "b", "b": "a"}}
    arrow_set = [("a", "e"), ("b", "e"), ("a", "g"), ("b", "g")]
    G = FiniteGroupoid.from_label_action(objects, ["e", "g"], compose, action, arrow_set)
    H = frozenset(G.unit[obj] for obj in objects)
    N = {obj: frozenset({G.unit[obj]}) for obj in objects}
    return GroupoidModel(G, H, N, Hbar=H)


FIXTURE_BUILDERS = {
    "normalized": _fixture_normalized,
    "disjoint_semi": _fixture_disjoint,
    "non_disjoint_semi": _fixture_non_disjoint,
    "non_semi": _fixture_non_semi,
}

# documented truth table for the four shipped fixtures
FIXTURE_TRUTH_TABLE = {
    "normalized": {"uniform": True, "semi_normalized": True, "disjoint": True,
                   "factorization": True, "splitting": True, "extension": True},
    "disjoint_semi": {"uniform": True, "semi_normalized": True, "disjoint": True,
                      "factorization": True, "splitting": True, "extension": True},
    "non_disjoint_semi": {"uniform": True, "semi_normalized": True, "disjoint": False,
                          "factorization": True, "splitting": False, "extension": True},
    "non_semi": {"uniform": True, "semi_normalized": False, "disjoint": True,
                 "factorization": False, "splitting": False, "extension": False},
}


def load_fixture(name: str) -> GroupoidModel:
    from importlib import resources

    text = resources.files("schsym.data.groupoids").joinpath(f"{name}.json").read_text()
    return model_from_json(text)
