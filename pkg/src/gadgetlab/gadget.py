"""Gadget construction with provenance, lifts, fragmentation, subdivision.

``gadget_construct`` replaces every edge of a distinguished relation of the
base by a fresh copy of the gadget, identifying the copy's roots with the
edge's vertices.  Result vertex ids are canonical: internal vertices keep
base ids ``0..n_A-1``; external vertices are numbered by (edge index, gadget
non-root index) in lexicographic order, so serialization and provenance are
reproducible.  Edges with repeated vertices are allowed; identification then
merges several roots onto one internal vertex, while non-root gadget
vertices are never merged across copies.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

from .relstruct import (
    Language,
    Structure,
    StructureError,
    gaifman_distance,
    is_symmetric,
    merge_languages,
)

LIFT_INTERNAL = "Int"
LIFT_EXTERNAL = "Ext"
LIFT_RHO = "rho"


@dataclass(frozen=True)
class BaseStructure:
    """A structure whose `edge_symbol` relation is the one to be replaced."""

    structure: Structure
    edge_symbol: str = "R"

    def __post_init__(self):
        if not self.structure.language.has_relation(self.edge_symbol):
            raise StructureError(f"base structure lacks relation {self.edge_symbol!r}")

    @property
    def arity(self) -> int:
        return self.structure.language.arity(self.edge_symbol)

    @property
    def edges(self) -> frozenset[tuple[int, ...]]:
        return self.structure.tuples(self.edge_symbol)


@dataclass(frozen=True)
class Gadget:
    """A structure with an ordered list of pairwise distinct root vertices."""

    structure: Structure
    roots: tuple[int, ...]

    def __post_init__(self):
        if len(set(self.roots)) != len(self.roots):
            raise StructureError("gadget roots must be pairwise distinct")
        for v in self.roots:
            self.structure._check_vertex(v)
        if self.structure.constants:
            raise StructureError("gadget structures carry roots positionally, not as constants")

    @property
    def nonroots(self) -> tuple[int, ...]:
        rootset = set(self.roots)
        return tuple(v for v in range(self.structure.n) if v not in rootset)


def as_rooted_structure(g: Gadget) -> Structure:
    """The gadget as a structure whose roots are constants z1..zr."""
    taken = set(g.structure.language.constants)
    names = []
    for i in range(len(g.roots)):
        name = f"z{i + 1}"
        while name in taken:
            name += "_"
        taken.add(name)
        names.append(name)
    lang = g.structure.language.extended(constants=names)
    consts = dict(g.structure.constants)
    consts.update(zip(names, g.roots))
    return Structure(lang, g.structure.n, g.structure.relations, consts)


@dataclass
class ConstructedStructure:
    """Result of gadget construction plus full provenance.

    ``internal_count`` vertices at the low ids are the base's; every other
    vertex belongs to exactly one gadget copy, recorded in ``external_map``.
    """

    result: Structure
    base: BaseStructure
    gadget: Gadget
    edge_list: tuple[tuple[int, ...], ...]
    internal_count: int
    external_map: dict[int, tuple[int, int]]
    external_of: dict[tuple[int, int], int]
    lifted: bool = False

    def is_internal(self, v: int) -> bool:
        self.result._check_vertex(v)
        return v < self.internal_count

    def rho(self, v: int) -> tuple[int, ...]:
        """The replaced edge whose copy contains the external vertex v."""
        if self.is_internal(v):
            raise StructureError(f"vertex {v} is internal")
        return self.edge_list[self.external_map[v][0]]

    def iota(self, v: int) -> int:
        """The gadget vertex an external vertex is a copy of."""
        if self.is_internal(v):
            raise StructureError(f"vertex {v} is internal")
        return self.external_map[v][1]

    def copy_vertex(self, edge_idx: int, gadget_vid: int) -> int:
        """Result vertex carrying (edge, gadget vertex); roots land on the edge."""
        roots = self.gadget.roots
        if gadget_vid in roots:
            return self.edge_list[edge_idx][roots.index(gadget_vid)]
        return self.external_of[(edge_idx, gadget_vid)]

    @property
    def edge_index(self) -> dict[tuple[int, ...], int]:
        return {e: i for i, e in enumerate(self.edge_list)}

    def internal_vertices(self) -> range:
        return range(self.internal_count)

    def external_vertices(self) -> range:
        return range(self.internal_count, self.result.n)


def _lift_language(plain: Language, edge_symbol: str, arity: int) -> Language:
    for name in (edge_symbol, LIFT_INTERNAL, LIFT_EXTERNAL, LIFT_RHO):
        if plain.has_relation(name):
            raise StructureError(f"lift symbol {name!r} collides with the result language")
    return plain.extended(
        relations=[
            (edge_symbol, arity),
            (LIFT_INTERNAL, 1),
            (LIFT_EXTERNAL, 1),
            (LIFT_RHO, arity + 1),
        ]
    )


def gadget_construct(
    base: BaseStructure,
    gadget: Gadget,
    lifted: bool = False,
    restricted_rho: bool = False,
) -> ConstructedStructure:
    """Replace every edge of the base's distinguished relation by a gadget copy.

    With ``lifted`` the result additionally realizes the replaced relation on
    internal vertices, unary Int/Ext marking vertex provenance, and rho as
    the graph of the external-to-edge map.  ``restricted_rho`` keeps only the
    rho tuples whose external vertex is adjacent to a vertex of its own edge,
    with adjacency measured in the plain (unlifted) result.
    """
    a = base.structure
    g = gadget.structure
    arity = base.arity
    if len(gadget.roots) != arity:
        raise StructureError(
            f"gadget has {len(gadget.roots)} roots but {base.edge_symbol!r} has arity {arity}"
        )
    if g.language.has_relation(base.edge_symbol) and g.relations[base.edge_symbol]:
        raise StructureError(f"gadget must not realize the replaced symbol {base.edge_symbol!r}")
    base_lang = a.language.without_relation(base.edge_symbol)
    gadget_lang = (
        g.language.without_relation(base.edge_symbol)
        if g.language.has_relation(base.edge_symbol)
        else g.language
    )
    plain_lang = merge_languages(base_lang, gadget_lang)

    edge_list = tuple(sorted(base.edges))
    nonroots = gadget.nonroots
    n_internal = a.n
    n_total = n_internal + len(edge_list) * len(nonroots)

    external_of: dict[tuple[int, int], int] = {}
    external_map: dict[int, tuple[int, int]] = {}
    next_id = n_internal
    for e_idx in range(len(edge_list)):
        for gv in nonroots:
            external_of[(e_idx, gv)] = next_id
            external_map[next_id] = (e_idx, gv)
            next_id += 1

    root_pos = {v: i for i, v in enumerate(gadget.roots)}

    def vmap(e_idx: int, e: tuple[int, ...], gv: int) -> int:
        if gv in root_pos:
            return e[root_pos[gv]]
        return external_of[(e_idx, gv)]

    relations: dict[str, set[tuple[int, ...]]] = {name: set() for name, _ in plain_lang.relations}
    for name, _ in base_lang.relations:
        relations[name] |= a.relations[name]
    for e_idx, e in enumerate(edge_list):
        for name, _ in gadget_lang.relations:
            for tup in g.relations[name]:
                relations[name].add(tuple(vmap(e_idx, e, v) for v in tup))

    plain = Structure(
        plain_lang,
        n_total,
        {k: frozenset(v) for k, v in relations.items()},
        dict(a.constants),
    )
    result = plain
    if lifted:
        lift_lang = _lift_language(plain_lang, base.edge_symbol, arity)
        lifted_relations = {k: frozenset(v) for k, v in relations.items()}
        lifted_relations[base.edge_symbol] = frozenset(edge_list)
        lifted_relations[LIFT_INTERNAL] = frozenset((v,) for v in range(n_internal))
        lifted_relations[LIFT_EXTERNAL] = frozenset((v,) for v in range(n_internal, n_total))
        rho_tuples = set()
        for v, (e_idx, _) in external_map.items():
            e = edge_list[e_idx]
            if restricted_rho and not any(ev in plain.adjacency[v] for ev in e):
                continue
            rho_tuples.add((v,) + e)
        lifted_relations[LIFT_RHO] = frozenset(rho_tuples)
        result = Structure(lift_lang, n_total, lifted_relations, dict(a.constants))

    return ConstructedStructure(
        result=result,
        base=base,
        gadget=gadget,
        edge_list=edge_list,
        internal_count=n_internal,
        external_map=external_map,
        external_of=external_of,
        lifted=lifted,
    )


def _root_swapping_automorphism_exists(gadget: Gadget) -> bool:
    """Brute-force search for an automorphism reversing the root order."""
    g = gadget.structure
    if g.n > 9:
        raise StructureError("automorphism check limited to gadgets with at most 9 vertices")
    fixed = {gadget.roots[i]: gadget.roots[len(gadget.roots) - 1 - i] for i in range(len(gadget.roots))}
    rest = [v for v in range(g.n) if v not in fixed]
    targets = [v for v in range(g.n) if v not in set(fixed.values())]
    for perm in itertools.permutations(targets):
        mapping = dict(fixed)
        mapping.update(zip(rest, perm))
        ok = True
        for tuples in g.relations.values():
            for tup in tuples:
                if tuple(mapping[v] for v in tup) not in tuples:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return True
    return False


def undirected_gadget_construct(
    base: BaseStructure, gadget: Gadget, lifted: bool = False
) -> ConstructedStructure:
    """One gadget copy per unordered edge of a symmetric binary relation.

    Requires the replaced relation to be binary and symmetric and the gadget
    to admit an automorphism that swaps its roots (checked), so the choice of
    orientation is immaterial.
    """
    a = base.structure
    if base.arity != 2:
        raise StructureError("undirected mode requires a binary replaced relation")
    if not is_symmetric(a, base.edge_symbol):
        raise StructureError(f"{base.edge_symbol!r} is not symmetric")
    if not _root_swapping_automorphism_exists(gadget):
        raise StructureError("gadget admits no root-swapping automorphism")
    canonical = frozenset(tup for tup in a.tuples(base.edge_symbol) if tup[0] <= tup[1])
    relations = dict(a.relations)
    relations[base.edge_symbol] = canonical
    oriented = BaseStructure(
        Structure(a.language, a.n, relations, a.constants), base.edge_symbol
    )
    return gadget_construct(oriented, gadget, lifted=lifted)


def subdivide(g: Structure, edge_symbol: str = "E") -> Structure:
    """1-subdivision of a symmetric graph: each edge gains one new vertex.

    Implemented as undirected gadget construction with the length-2 path
    gadget rooted at its endpoints.
    """
    if not g.language.has_relation(edge_symbol) or g.language.arity(edge_symbol) != 2:
        raise StructureError(f"need a binary relation {edge_symbol!r}")
    if not is_symmetric(g, edge_symbol):
        raise StructureError(f"{edge_symbol!r} is not symmetric")
    marker = edge_symbol + "_orig"
    while g.language.has_relation(marker):
        marker += "_"
    base_lang = g.language.extended(relations=[(marker, 2)])
    relations = dict(g.relations)
    relations[marker] = g.relations[edge_symbol]
    relations[edge_symbol] = frozenset()
    base = BaseStructure(Structure(base_lang, g.n, relations, g.constants), marker)
    path_lang = Language.of([(edge_symbol, 2)])
    path = Structure(
        path_lang, 3, {edge_symbol: frozenset({(0, 1), (1, 0), (1, 2), (2, 1)})}, {}
    )
    constructed = undirected_gadget_construct(base, Gadget(path, (0, 2)))
    return constructed.result


# ---------------------------------------------------------------------------
# Multi-gadget construction


@dataclass
class MultiConstructedStructure:
    """Iterated gadget construction, one gadget per distinguished symbol."""

    result: Structure
    base: Structure
    symbols: tuple[str, ...]
    gadgets: tuple[Gadget, ...]
    stages: tuple[ConstructedStructure, ...]
    edge_lists: tuple[tuple[tuple[int, ...], ...], ...]
    internal_count: int

    def is_internal(self, v: int) -> bool:
        self.result._check_vertex(v)
        return v < self.internal_count

    def provenance(self, v: int) -> tuple[int, int, int] | None:
        """(slot, edge index, gadget vertex) for an external vertex; None if internal."""
        if self.is_internal(v):
            return None
        for j, stage in enumerate(self.stages):
            if v < stage.result.n:
                e_idx, gv = stage.external_map[v]
                return (j, e_idx, gv)
        raise StructureError(f"vertex {v} out of range")

    def rho(self, v: int) -> tuple[int, ...]:
        slot, e_idx, _ = self.provenance(v)
        return self.edge_lists[slot][e_idx]


def multi_gadget_construct(
    base: Structure, replacements: Sequence[tuple[str, Gadget]]
) -> MultiConstructedStructure:
    """Left-to-right iterated construction for symbols R_1..R_l.

    Every gadget must realize none of the distinguished symbols; external
    vertices are tagged with the slot of the gadget that created them.
    """
    symbols = [sym for sym, _ in replacements]
    if len(set(symbols)) != len(symbols):
        raise StructureError("duplicate distinguished symbol")
    for sym, g in replacements:
        for other, _ in replacements:
            if g.structure.language.has_relation(other) and g.structure.relations[other]:
                raise StructureError(f"gadget for {sym!r} realizes distinguished symbol {other!r}")
    stages: list[ConstructedStructure] = []
    edge_lists: list[tuple[tuple[int, ...], ...]] = []
    current = base
    for sym, g in replacements:
        stage = gadget_construct(BaseStructure(current, sym), g)
        stages.append(stage)
        edge_lists.append(stage.edge_list)
        current = stage.result
    return MultiConstructedStructure(
        result=current,
        base=base,
        symbols=tuple(symbols),
        gadgets=tuple(g for _, g in replacements),
        stages=tuple(stages),
        edge_lists=tuple(edge_lists),
        internal_count=base.n,
    )


# ---------------------------------------------------------------------------
# Fragmentation


@dataclass(frozen=True)
class SigmaEquivalence:
    """A partition of root indices 1..arity, plus the implicit empty class X0."""

    arity: int
    classes: tuple[frozenset[int], ...]

    def __post_init__(self):
        seen: set[int] = set()
        for cls in self.classes:
            if not cls:
                raise StructureError("classes must be nonempty (X0 is implicit)")
            if cls & seen:
                raise StructureError("classes must be disjoint")
            seen |= cls
        if seen != set(range(1, self.arity + 1)):
            raise StructureError(f"classes must cover 1..{self.arity}")
        ordered = tuple(sorted(self.classes, key=min))
        object.__setattr__(self, "classes", ordered)

    @staticmethod
    def discrete(arity: int) -> "SigmaEquivalence":
        return SigmaEquivalence(arity, tuple(frozenset({i}) for i in range(1, arity + 1)))

    @staticmethod
    def single(arity: int) -> "SigmaEquivalence":
        return SigmaEquivalence(arity, (frozenset(range(1, arity + 1)),))

    @property
    def max_class_size(self) -> int:
        return max(len(c) for c in self.classes)


def gad_sigma(sigma: SigmaEquivalence, symbol_prefix: str = "R") -> Gadget:
    """The canonical splitting gadget for a root-index partition.

    Roots z_1..z_r are ids 0..r-1; auxiliary vertices x_0..x_l follow.  For
    each class X_i (including the empty X_0) there is exactly one R_i-edge
    spanning the class's roots in ascending index order with x_i last.
    """
    r = sigma.arity
    ell = len(sigma.classes)
    lang = Language.of(
        [(f"{symbol_prefix}_{i}", (0 if i == 0 else len(sigma.classes[i - 1])) + 1) for i in range(ell + 1)]
    )
    relations: dict[str, frozenset] = {}
    relations[f"{symbol_prefix}_0"] = frozenset({(r,)})
    for i, cls in enumerate(sigma.classes, start=1):
        tup = tuple(j - 1 for j in sorted(cls)) + (r + i,)
        relations[f"{symbol_prefix}_{i}"] = frozenset({tup})
    structure = Structure(lang, r + ell + 1, relations, {})
    return Gadget(structure, tuple(range(r)))


def fragment(base: BaseStructure, sigma: SigmaEquivalence) -> ConstructedStructure:
    """Split each distinguished edge into per-class subedges with auxiliaries."""
    if sigma.arity != base.arity:
        raise StructureError(
            f"partition arity {sigma.arity} does not match edge arity {base.arity}"
        )
    gadget = gad_sigma(sigma, symbol_prefix=base.edge_symbol)
    stripped = base.structure.language.without_relation(base.edge_symbol)
    for name, _ in gadget.structure.language.relations:
        if stripped.has_relation(name):
            raise StructureError(f"subedge symbol {name!r} collides with the base language")
    return gadget_construct(base, gadget)


def fragment_subedge(c: ConstructedStructure, edge_idx: int, class_idx: int) -> tuple[int, ...]:
    """The class_idx subedge of one replaced edge (class 0 is the empty class)."""
    sigma_classes = _sigma_classes_of(c)
    r = len(c.gadget.roots)
    e = c.edge_list[edge_idx]
    aux = c.external_of[(edge_idx, r + class_idx)]
    if class_idx == 0:
        return (aux,)
    cls = sigma_classes[class_idx - 1]
    return tuple(e[j - 1] for j in sorted(cls)) + (aux,)


def _sigma_classes_of(c: ConstructedStructure) -> tuple[frozenset[int], ...]:
    """Recover the partition from a gad_sigma gadget's edge realizations."""
    g = c.gadget.structure
    r = len(c.gadget.roots)
    classes = []
    for i in range(1, g.n - r):
        prefix = c.base.edge_symbol
        tup = next(iter(g.relations[f"{prefix}_{i}"]))
        classes.append(frozenset(v + 1 for v in tup[:-1]))
    return tuple(classes)


# ---------------------------------------------------------------------------
# Canonical sigma estimation


@dataclass(frozen=True)
class SigmaEstimate:
    sigma: SigmaEquivalence
    distance_trajectories: dict[tuple[int, int], tuple[float, ...]]


def estimate_eq_sigma(gadgets: Sequence[Gadget], threshold: float) -> SigmaEstimate:
    """Group root indices whose roots stay within `threshold` distance.

    Finite-horizon heuristic: grouping is decided on the last element of the
    prefix, and the per-pair distance trajectories are reported so the
    caller can judge divergence.  The true equivalence is a limit notion
    that no finite prefix determines.
    """
    if not gadgets:
        raise StructureError("empty gadget prefix")
    r = len(gadgets[0].roots)
    if any(len(g.roots) != r for g in gadgets):
        raise StructureError("inconsistent gadget arity in prefix")
    trajectories: dict[tuple[int, int], tuple[float, ...]] = {}
    for i, j in itertools.combinations(range(1, r + 1), 2):
        trajectories[(i, j)] = tuple(
            float(gaifman_distance(g.structure, g.roots[i - 1], g.roots[j - 1])) for g in gadgets
        )
    parent = list(range(r + 1))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for (i, j), traj in trajectories.items():
        if traj[-1] <= threshold:
            parent[find(i)] = find(j)
    groups: dict[int, set[int]] = {}
    for i in range(1, r + 1):
        groups.setdefault(find(i), set()).add(i)
    sigma = SigmaEquivalence(r, tuple(frozenset(g) for g in groups.values()))
    return SigmaEstimate(sigma, trajectories)
