"""Parametric, seeded generators for the structure families used in experiments.

Every family is deterministic: element n of a family depends only on the
spec's parameters and, for random families, on the SplitMix64 stream derived
from (seed, n).  Undirected graphs are stored with symmetric closure; random
hypergraph edges are canonical sorted k-subsets with one stored tuple per
subset (symmetric expansion available separately).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .errors import BudgetExceededError
from .gadget import BaseStructure, Gadget, gadget_construct, subdivide
from .relstruct import Language, Structure, StructureError, build_structure
from .rng import SplitMix64, derive

GRAPH = Language.of([("E", 2)])


@dataclass(frozen=True)
class SequenceSpec:
    family: str
    params: Mapping = field(default_factory=dict)
    seed: int = 0
    role: str = "plain"  # plain | base | gadget

    @staticmethod
    def from_dict(data: Mapping) -> "SequenceSpec":
        allowed = {"family", "params", "seed", "role"}
        unknown = set(data) - allowed
        if unknown:
            raise StructureError(f"unknown sequence spec keys {sorted(unknown)}")
        return SequenceSpec(
            family=data["family"],
            params=dict(data.get("params", {})),
            seed=int(data.get("seed", 0)),
            role=data.get("role", "plain"),
        )


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(str(x))
    return Fraction(x)


def _symmetric_pairs(edges) -> set[tuple[int, int]]:
    out = set()
    for u, v in edges:
        out.add((u, v))
        out.add((v, u))
    return out


def clique_structure(m: int, language: Language = GRAPH) -> Structure:
    edges = {(u, v) for u in range(m) for v in range(m) if u != v}
    return build_structure(language, m, [("E", edges)])


def star_structure(leaves: int) -> Structure:
    """Star with `leaves` leaves; the center is vertex 0."""
    edges = _symmetric_pairs((0, i) for i in range(1, leaves + 1))
    return build_structure(GRAPH, leaves + 1, [("E", edges)])


def path_structure(vertices: int) -> Structure:
    edges = _symmetric_pairs((i, i + 1) for i in range(vertices - 1))
    return build_structure(GRAPH, vertices, [("E", edges)])


def lollipop_structure(k: int, ell: int) -> Structure:
    """Clique on k vertices sharing vertex 0 with a path of length ell."""
    if k < 1 or ell < 1:
        raise StructureError("lollipop requires k >= 1 and ell >= 1")
    edges = {(u, v) for u in range(k) for v in range(k) if u != v}
    path = [0] + list(range(k, k + ell))
    edges |= _symmetric_pairs(zip(path, path[1:]))
    return build_structure(GRAPH, k + ell, [("E", edges)])


def random_hypergraph_structure(n: int, k: int, p: Fraction, stream: SplitMix64) -> Structure:
    """Each of the C(n,k) potential edges is kept independently with probability p.

    Edges are visited in lexicographic order, consuming one draw each, so a
    fixed stream pins the structure exactly.
    """
    if k < 1 or n < 0:
        raise StructureError("invalid hypergraph parameters")
    lang = Language.of([("E", k)])
    edges = {combo for combo in itertools.combinations(range(n), k) if stream.chance(p)}
    return build_structure(lang, n, [("E", edges)])


_MARKED_GRAPH = Language.of([("E", 2), ("R", 1)])
_MAGNIFICATION_LANG = Language.of([("E", 2), ("R", 1), ("S", 1)])


def _marked_clique(m: int) -> Structure:
    """Clique with one vertex (id 0, the canonical choice) marked by R."""
    edges = {(u, v) for u in range(m) for v in range(m) if u != v}
    return build_structure(_MARKED_GRAPH, m, [("E", edges), ("R", {(0,)})])


def _marked_independent_union(n: int, swap: bool) -> Structure:
    """K_{n^2} plus two marked independent sets (sizes n and 2n, swapped on parity)."""
    a, b = (n, 2 * n) if not swap else (2 * n, n)
    total = n * n + a + b
    edges = {(u, v) for u in range(n * n) for v in range(n * n) if u != v}
    r_marks = {(v,) for v in range(n * n, total)}
    s_marks = {(v,) for v in range(n * n + a, total)}
    return build_structure(
        _MAGNIFICATION_LANG, total, [("E", edges), ("R", r_marks), ("S", s_marks)]
    )


_LEAF_LANG = Language.of([("E", 2), ("Leaf", 1)])


def _attach_leaves(inner: Structure, count: int) -> Structure:
    """Attach `count` leaves, all marked Leaf, to every vertex of `inner`."""
    if inner.language.has_relation("R") or inner.language.has_relation("Leaf"):
        raise StructureError("inner structure already uses R or Leaf")
    base_lang = inner.language.extended(relations=[("R", 1)])
    base = build_structure(
        base_lang,
        inner.n,
        [(sym, inner.relations[sym]) for sym, _ in inner.language.relations]
        + [("R", {(v,) for v in range(inner.n)})],
        list(inner.constants.items()),
    )
    edges = _symmetric_pairs((0, i) for i in range(1, count + 1))
    star = build_structure(
        _LEAF_LANG, count + 1, [("E", edges), ("Leaf", {(i,) for i in range(1, count + 1)})]
    )
    return gadget_construct(BaseStructure(base, "R"), Gadget(star, (0,))).result


def _require_params(spec: SequenceSpec, required: set[str], optional: set[str] = frozenset()):
    keys = set(spec.params)
    missing = required - keys
    unknown = keys - required - optional
    if missing:
        raise StructureError(f"family {spec.family!r} missing params {sorted(missing)}")
    if unknown:
        raise StructureError(f"family {spec.family!r} got unknown params {sorted(unknown)}")


def generate(spec: SequenceSpec, n: int):
    """Element n (n >= 1) of the family, wrapped according to the spec's role."""
    if n < 1:
        raise StructureError("sequence index must be >= 1")
    family = spec.family

    roots: tuple[int, ...] | None = None
    edge_symbol = "R"

    if family == "clique":
        _require_params(spec, set(), {"size"})
        s = clique_structure(int(spec.params.get("size", n)))
    elif family == "star":
        _require_params(spec, set(), {"size"})
        s = star_structure(int(spec.params.get("size", n)))
        roots = (0,)
    elif family == "path":
        _require_params(spec, set(), {"size"})
        m = int(spec.params.get("size", n))
        s = path_structure(m)
        roots = (0, m - 1) if m >= 2 else (0,)
    elif family == "lollipop":
        _require_params(spec, {"k", "ell"})
        s = lollipop_structure(int(spec.params["k"]), int(spec.params["ell"]))
    elif family == "lollipop-alternating":
        _require_params(spec, set())
        ell = n ** 3 if n % 2 == 1 else math.ceil(n ** 1.5)
        s = lollipop_structure(n, ell)
    elif family == "marked-independent-union":
        _require_params(spec, set())
        s = _marked_independent_union(n, swap=n % 2 == 0)
    elif family == "random-hypergraph":
        _require_params(spec, {"k", "p"})
        stream = SplitMix64(derive(spec.seed, n))
        s = random_hypergraph_structure(n, int(spec.params["k"]), _as_fraction(spec.params["p"]), stream)
        edge_symbol = "E"
    elif family == "random-hypergraph-alternating":
        _require_params(spec, {"k", "p", "q"})
        prob = _as_fraction(spec.params["p"] if n % 2 == 1 else spec.params["q"])
        stream = SplitMix64(derive(spec.seed, n))
        s = random_hypergraph_structure(n, int(spec.params["k"]), prob, stream)
        edge_symbol = "E"
    elif family == "attach-leaves":
        _require_params(spec, {"of"})
        inner_spec = SequenceSpec.from_dict(spec.params["of"]) if isinstance(spec.params["of"], Mapping) else spec.params["of"]
        inner = generate(inner_spec, n)
        if not isinstance(inner, Structure):
            raise StructureError("attach-leaves requires a plain inner family")
        s = _attach_leaves(inner, n)
    elif family == "subdivision":
        _require_params(spec, {"of"})
        inner_spec = SequenceSpec.from_dict(spec.params["of"]) if isinstance(spec.params["of"], Mapping) else spec.params["of"]
        inner = generate(inner_spec, n)
        if not isinstance(inner, Structure):
            raise StructureError("subdivision requires a plain inner family")
        s = subdivide(inner)
    elif family == "fluctuating-base":
        _require_params(spec, set())
        s = _marked_clique(n if n % 2 == 1 else 2 ** n)
    elif family == "fluctuating-gadget":
        _require_params(spec, set())
        s = star_structure(2 ** n if n % 2 == 1 else n)
        roots = (0,)
    else:
        raise StructureError(f"unknown family {spec.family!r}")

    if spec.role == "plain":
        return s
    if spec.role == "base":
        if not s.language.has_relation(edge_symbol):
            raise StructureError(f"family {family!r} has no relation {edge_symbol!r} for the base role")
        return BaseStructure(s, edge_symbol)
    if spec.role == "gadget":
        if roots is None:
            raise StructureError(f"family {family!r} does not define roots for the gadget role")
        return Gadget(s, roots)
    raise StructureError(f"unknown role {spec.role!r}")


def check_extension_property(
    h: Structure, q: int, edge_symbol: str = "E", partition_budget: int = 20
) -> bool:
    """Exhaustive q-extension check on a k-uniform hypergraph.

    For every vertex set S of size q-1 and every two-coloring (F0, F1) of the
    (k-1)-subsets of S there must be a witness v outside S such that
    A+{v} is an edge exactly for A in F1.
    """
    if q < 1:
        raise StructureError("q must be >= 1")
    k = h.language.arity(edge_symbol)
    edges = set()
    for tup in h.tuples(edge_symbol):
        if list(tup) != sorted(set(tup)):
            raise StructureError("edges must be sorted tuples of distinct vertices")
        edges.add(tup)
    vertices = list(range(h.n))
    for s_set in itertools.combinations(vertices, q - 1):
        subsets = list(itertools.combinations(s_set, k - 1))
        if len(subsets) > partition_budget:
            raise BudgetExceededError(
                f"{len(subsets)} subsets would need 2^{len(subsets)} partitions"
            )
        for pattern in itertools.product((False, True), repeat=len(subsets)):
            found = False
            for v in vertices:
                if v in s_set:
                    continue
                if all(
                    (tuple(sorted(a + (v,))) in edges) == want
                    for a, want in zip(subsets, pattern)
                ):
                    found = True
                    break
            if not found:
                return False
    return True
