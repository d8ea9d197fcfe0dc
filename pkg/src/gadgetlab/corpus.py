"""Seeded corpora for the theorem-check suites.

Instances mix pairs that are certified by construction (isomorphic copies,
or block unions with multiplicities at or above the game depth) with pairs
whose premises genuinely fail, so the skip accounting is exercised.  All
premises are re-certified by the game solver at check time; nothing here is
trusted by the verifiers.
"""

from __future__ import annotations

import itertools

from .convergence import ContinuityInstance, FragmentationInstance
from .gadget import BaseStructure, Gadget, SigmaEquivalence
from .relstruct import Language, Structure, StructureError, build_structure
from .rng import SplitMix64, derive
from .sequences import path_structure, star_structure

_MARKED_GRAPH = Language.of([("E", 2), ("R", 1)])
_ARC_LANG = Language.of([("E", 2), ("R", 2)])
_UNARY_BASE = Language.of([("M", 1), ("R", 2)])
_UNARY_GADGET = Language.of([("M", 1)])
_PLAIN = Language.of([("E", 2)])


def marked_clique_base(m: int) -> BaseStructure:
    edges = {(u, v) for u in range(m) for v in range(m) if u != v}
    return BaseStructure(build_structure(_MARKED_GRAPH, m, [("E", edges), ("R", {(0,)})]), "R")


def marked_independent_base(marked: int, plain: int) -> BaseStructure:
    s = build_structure(
        _MARKED_GRAPH, marked + plain, [("E", set()), ("R", {(v,) for v in range(marked)})]
    )
    return BaseStructure(s, "R")


def arc_blocks_base(blocks: int, isolated: int) -> BaseStructure:
    """Disjoint directed R-arcs plus isolated vertices; no E-edges."""
    arcs = {(2 * i, 2 * i + 1) for i in range(blocks)}
    s = build_structure(_ARC_LANG, 2 * blocks + isolated, [("E", set()), ("R", arcs)])
    return BaseStructure(s, "R")


def star_gadget(leaves: int) -> Gadget:
    return Gadget(star_structure(leaves), (0,))


def padded_path_gadget(isolated: int) -> Gadget:
    """Length-2 path rooted at its endpoints, plus isolated padding vertices."""
    edges = {(0, 1), (1, 0), (1, 2), (2, 1)}
    s = build_structure(_PLAIN, 3 + isolated, [("E", edges)])
    return Gadget(s, (0, 2))


def permuted_base(base: BaseStructure, seed: int) -> BaseStructure:
    """An isomorphic copy under a seeded vertex permutation."""
    s = base.structure
    perm = list(range(s.n))
    SplitMix64(seed).shuffle(perm)
    relations = {
        sym: frozenset(tuple(perm[v] for v in tup) for tup in tuples)
        for sym, tuples in s.relations.items()
    }
    constants = {name: perm[v] for name, v in s.constants.items()}
    return BaseStructure(Structure(s.language, s.n, relations, constants), base.edge_symbol)


def continuity_corpus(seed: int, k: int) -> list[ContinuityInstance]:
    """Instances for the composition bound at depth pair (k*arity, k)."""
    if k not in (1, 2):
        raise StructureError("continuity corpus is generated for k in {1, 2}")
    rng = SplitMix64(derive(seed, k))
    instances: list[ContinuityInstance] = []

    def add(label, b1, b2, g1, g2):
        instances.append(ContinuityInstance(f"cont-k{k}-{label}", b1, b2, g1, g2))

    if k == 1:
        for idx in range(4):
            a = 2 + rng.below(3)
            b = 2 + rng.below(3)
            add(f"clique{idx}", marked_clique_base(a), marked_clique_base(b),
                star_gadget(1 + rng.below(3)), star_gadget(1 + rng.below(3)))
        for idx in range(3):
            add(f"indep{idx}",
                marked_independent_base(1 + rng.below(3), 1 + rng.below(3)),
                marked_independent_base(1 + rng.below(3), 1 + rng.below(3)),
                star_gadget(1 + rng.below(2)), star_gadget(1 + rng.below(2)))
        for idx in range(3):
            # base premise depth is k*arity = 2: block counts must be >= 2
            add(f"arcs{idx}",
                arc_blocks_base(2 + rng.below(2), 2 + rng.below(2)),
                arc_blocks_base(2 + rng.below(2), 2 + rng.below(2)),
                padded_path_gadget(1 + rng.below(2)), padded_path_gadget(1 + rng.below(2)))
        base = arc_blocks_base(2, 2)
        add("arcperm", base, permuted_base(base, derive(seed, k, 1)),
            padded_path_gadget(1), padded_path_gadget(1))
        # premise failures on purpose: counts below the depth
        add("uncert-arcs", arc_blocks_base(1, 0), arc_blocks_base(2, 0),
            padded_path_gadget(1), padded_path_gadget(1))
        add("uncert-gadget", marked_clique_base(3), marked_clique_base(3),
            star_gadget(0), star_gadget(2))
    else:
        for idx in range(4):
            add(f"indep{idx}",
                marked_independent_base(2 + rng.below(3), 2 + rng.below(3)),
                marked_independent_base(2 + rng.below(3), 2 + rng.below(3)),
                star_gadget(2 + rng.below(3)), star_gadget(2 + rng.below(3)))
        for idx in range(3):
            add(f"clique{idx}", marked_clique_base(3 + rng.below(2)), marked_clique_base(3 + rng.below(2)),
                star_gadget(2 + rng.below(2)), star_gadget(2 + rng.below(2)))
        for idx in range(3):
            base = arc_blocks_base(3, 2)
            add(f"arcperm{idx}", base, permuted_base(base, derive(seed, k, 10 + idx)),
                padded_path_gadget(2), padded_path_gadget(2))
        add("uncert-indep", marked_independent_base(1, 1), marked_independent_base(3, 3),
            star_gadget(2), star_gadget(2))
    return instances


def _unary_gadget(marked: int, unmarked: int, mark_roots: tuple[bool, bool]) -> Gadget:
    """Two isolated roots plus isolated marked/unmarked vertices; edgeless."""
    n = 2 + marked + unmarked
    marks = {(2 + i,) for i in range(marked)}
    marks |= {(i,) for i in range(2) if mark_roots[i]}
    s = build_structure(_UNARY_GADGET, n, [("M", marks)])
    return Gadget(s, (0, 1))


def _unary_arc_base(blocks: int, mark_tail: bool) -> BaseStructure:
    """Disjoint R-arcs over {M/1, R/2}; tails optionally M-marked."""
    arcs = {(2 * i, 2 * i + 1) for i in range(blocks)}
    marks = {(2 * i,) for i in range(blocks)} if mark_tail else set()
    s = build_structure(_UNARY_BASE, 2 * blocks, [("M", marks), ("R", arcs)])
    return BaseStructure(s, "R")


def _binary_base(n: int, edges, arcs) -> BaseStructure:
    s = build_structure(_ARC_LANG, n, [("E", edges), ("R", arcs)])
    return BaseStructure(s, "R")


def fragmentation_corpus(seed: int, k: int = 1) -> list[FragmentationInstance]:
    """Instances for the fragmentation bound, tractable at k = 1."""
    rng = SplitMix64(derive(seed, 100 + k))
    instances: list[FragmentationInstance] = []

    def add(label, b1, b2, g1, g2, sigma):
        instances.append(FragmentationInstance(f"frag-k{k}-{label}", b1, b2, g1, g2, sigma))

    discrete = SigmaEquivalence.discrete(2)
    single = SigmaEquivalence.single(2)

    # edgeless unary gadgets: root distance is infinite, so any partition
    # satisfies the distance premise
    for idx in range(4):
        g = _unary_gadget(rng.below(2), 1 + rng.below(2), (False, False))
        b = _unary_arc_base(1 + rng.below(2), mark_tail=bool(rng.below(2)))
        sigma = discrete if idx % 2 == 0 else single
        add(f"unary-iso{idx}", b, b, g, g, sigma)
    add("unary-counts",
        _unary_arc_base(3, True), _unary_arc_base(4, True),
        _unary_gadget(1, 1, (False, False)), _unary_gadget(1, 1, (False, False)),
        discrete)
    add("unary-gadget-counts",
        _unary_arc_base(2, False), _unary_arc_base(2, False),
        _unary_gadget(4, 4, (True, False)), _unary_gadget(5, 4, (True, False)),
        single)

    # binary gadgets: a 3-vertex path forces the single-class partition
    path = Gadget(path_structure(3), (0, 2))
    for idx in range(3):
        edges = set()
        if rng.below(2):
            edges = {(0, 1), (1, 0)}
        arcs = {(0, 1)} if rng.below(2) else {(0, 1), (1, 2)}
        b = _binary_base(3, edges, arcs)
        add(f"path-iso{idx}", b, b, path, path, single)
    add("path-blocks",
        arc_blocks_base(3, 3), arc_blocks_base(4, 3), path, path, single)
    # purposeful skips
    add("uncert-distance",
        _binary_base(2, set(), {(0, 1)}), _binary_base(2, set(), {(0, 1)}),
        path, path, discrete)
    add("uncert-base",
        _unary_arc_base(1, True), _unary_arc_base(1, False),
        _unary_gadget(1, 1, (False, False)), _unary_gadget(1, 1, (False, False)),
        discrete)
    return instances
