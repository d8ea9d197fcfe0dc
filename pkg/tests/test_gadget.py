import itertools
import math

import pytest
from hypothesis import given, settings

from conftest import BASE_BIN, GRAPH, base_and_gadget, clique, path, path_gadget
from gadgetlab.efgames import duplicator_wins
from gadgetlab.gadget import (
    BaseStructure,
    Gadget,
    SigmaEquivalence,
    as_rooted_structure,
    estimate_eq_sigma,
    fragment,
    fragment_subedge,
    gad_sigma,
    gadget_construct,
    multi_gadget_construct,
    subdivide,
    undirected_gadget_construct,
)
from gadgetlab.relstruct import (
    Language,
    StructureError,
    build_structure,
    gaifman_distance,
    induced_substructure,
    shadow_to,
)
from gadgetlab.sequences import lollipop_structure, star_structure


def single_edge_base():
    return BaseStructure(
        build_structure(BASE_BIN, 2, [("E", set()), ("R", {(0, 1)})]), "R"
    )


def test_gadget_validation():
    with pytest.raises(StructureError):
        Gadget(path(3), (0, 0))
    lang = Language.of([("E", 2)], ["c"])
    rooted = build_structure(lang, 2, [("E", set())], [("c", 0)])
    with pytest.raises(StructureError):
        Gadget(rooted, (0,))
    with pytest.raises(StructureError):
        BaseStructure(path(3), "R")


def test_single_edge_path_gadget():
    c = gadget_construct(single_edge_base(), path_gadget())
    assert c.result.n == 3
    assert c.internal_count == 2
    assert c.result.tuples("E") == frozenset({(0, 2), (2, 0), (2, 1), (1, 2)})
    assert c.rho(2) == (0, 1) and c.iota(2) == 1
    assert c.copy_vertex(0, 0) == 0 and c.copy_vertex(0, 2) == 1


def test_roots_only_gadget_gives_shadow():
    base = single_edge_base()
    roots_only = Gadget(build_structure(GRAPH, 2, [("E", set())]), (0, 1))
    c = gadget_construct(base, roots_only)
    assert c.result == shadow_to(base.structure, GRAPH)


def test_empty_edge_set_gives_shadow():
    base = BaseStructure(
        build_structure(BASE_BIN, 3, [("E", {(0, 1)}), ("R", set())]), "R"
    )
    c = gadget_construct(base, path_gadget())
    assert c.result == shadow_to(base.structure, GRAPH)


def test_arity_mismatch():
    with pytest.raises(StructureError):
        gadget_construct(single_edge_base(), Gadget(path(3), (0,)))


def test_gadget_realizing_replaced_symbol_rejected():
    g = build_structure(BASE_BIN, 3, [("E", set()), ("R", {(0, 1)})])
    with pytest.raises(StructureError):
        gadget_construct(single_edge_base(), Gadget(g, (0, 2)))


def test_repeated_vertex_edge_merges_roots():
    base = BaseStructure(
        build_structure(BASE_BIN, 1, [("E", set()), ("R", {(0, 0)})]), "R"
    )
    c = gadget_construct(base, path_gadget())
    # both roots identify with vertex 0; the external midpoint survives
    assert c.result.n == 2
    assert c.result.tuples("E") == frozenset({(0, 1), (1, 0)})


def test_lifted_construction():
    c = gadget_construct(single_edge_base(), path_gadget(), lifted=True)
    assert c.result.tuples("Int") == frozenset({(0,), (1,)})
    assert c.result.tuples("Ext") == frozenset({(2,)})
    assert c.result.tuples("rho") == frozenset({(2, 0, 1)})
    assert c.result.tuples("R") == frozenset({(0, 1)})


def test_lifted_empty_edges():
    base = BaseStructure(
        build_structure(BASE_BIN, 2, [("E", set()), ("R", set())]), "R"
    )
    c = gadget_construct(base, path_gadget(), lifted=True)
    assert c.result.tuples("Ext") == frozenset()
    assert c.result.tuples("rho") == frozenset()


def test_restricted_rho_drops_distant_externals():
    # gadget with a non-root at distance 2 from both roots
    g = build_structure(GRAPH, 4, [("E", {(0, 1), (1, 0), (1, 2), (2, 1), (1, 3), (3, 1)})])
    gadget = Gadget(g, (0, 2))  # vertex 3 hangs off the midpoint
    far = build_structure(
        GRAPH, 5, [("E", {(0, 1), (1, 0), (1, 2), (2, 1), (2, 3), (3, 2), (3, 4), (4, 3)})]
    )
    gadget_far = Gadget(far, (0, 4))  # vertex 2 is at distance 2 from both roots
    base = single_edge_base()
    full = gadget_construct(base, gadget_far, lifted=True)
    restricted = gadget_construct(base, gadget_far, lifted=True, restricted_rho=True)
    mid_copy = [v for v in restricted.external_vertices() if restricted.iota(v) == 2]
    assert len(mid_copy) == 1
    assert all(tup[0] != mid_copy[0] for tup in restricted.result.tuples("rho"))
    assert any(tup[0] == mid_copy[0] for tup in full.result.tuples("rho"))


def test_internal_substructure_isomorphic_when_no_root_only_edges():
    base = BaseStructure(
        build_structure(BASE_BIN, 3, [("E", {(0, 2), (2, 0)}), ("R", {(0, 1), (1, 2)})]), "R"
    )
    c = gadget_construct(base, path_gadget())
    internal, index = induced_substructure(c.result, range(c.internal_count))
    assert internal == shadow_to(base.structure, GRAPH)


@settings(max_examples=60, deadline=None)
@given(base_and_gadget())
def test_vertex_count_identity(bg):
    base, gadget = bg
    c = gadget_construct(base, gadget)
    arity = base.arity
    assert c.result.n == base.structure.n + len(base.edges) * (
        gadget.structure.n - arity
    )


@settings(max_examples=40, deadline=None)
@given(base_and_gadget())
def test_per_copy_embedding(bg):
    base, gadget = bg
    c = gadget_construct(base, gadget)
    for e_idx in range(len(c.edge_list)):
        for symbol, _ in gadget.structure.language.relations:
            for tup in gadget.structure.relations[symbol]:
                image = tuple(c.copy_vertex(e_idx, v) for v in tup)
                assert image in c.result.tuples(symbol)


# --- multi-gadget ----------------------------------------------------------------


def test_multi_single_equals_plain():
    base = single_edge_base()
    mc = multi_gadget_construct(base.structure, [("R", path_gadget())])
    c = gadget_construct(base, path_gadget())
    assert mc.result == c.result


def test_multi_two_unary_marks_additive():
    lang = Language.of([("E", 2), ("R_a", 1), ("R_b", 1)])
    s = build_structure(
        lang, 4, [("E", set()), ("R_a", {(0,), (1,)}), ("R_b", {(2,)})]
    )
    star2 = Gadget(star_structure(2), (0,))
    star3 = Gadget(star_structure(3), (0,))
    mc = multi_gadget_construct(s, [("R_a", star2), ("R_b", star3)])
    assert mc.result.n == 4 + 2 * 2 + 1 * 3
    assert mc.provenance(4)[0] == 0 and mc.provenance(9)[0] == 1
    assert mc.is_internal(3)


def test_multi_rejects_gadget_with_distinguished_edge():
    lang = Language.of([("E", 2), ("R_a", 1), ("R_b", 1)])
    s = build_structure(lang, 2, [("E", set()), ("R_a", {(0,)}), ("R_b", {(1,)})])
    bad_lang = Language.of([("E", 2), ("R_b", 1)])
    bad = Gadget(build_structure(bad_lang, 2, [("E", set()), ("R_b", {(1,)})]), (0,))
    with pytest.raises(StructureError):
        multi_gadget_construct(s, [("R_a", bad), ("R_b", Gadget(star_structure(1), (0,)))])


# --- fragmentation ----------------------------------------------------------------


def test_gad_sigma_discrete():
    g = gad_sigma(SigmaEquivalence.discrete(2))
    assert g.structure.n == 5
    assert g.structure.tuples("R_0") == frozenset({(2,)})
    assert g.structure.tuples("R_1") == frozenset({(0, 3)})
    assert g.structure.tuples("R_2") == frozenset({(1, 4)})


def test_gad_sigma_single_class():
    g = gad_sigma(SigmaEquivalence.single(2))
    assert g.structure.n == 4
    assert g.structure.tuples("R_0") == frozenset({(2,)})
    assert g.structure.tuples("R_1") == frozenset({(0, 1, 3)})


def test_gad_sigma_unary():
    g = gad_sigma(SigmaEquivalence.single(1))
    assert g.structure.n == 3


def test_sigma_validation():
    with pytest.raises(StructureError):
        SigmaEquivalence(2, (frozenset({1}),))
    with pytest.raises(StructureError):
        SigmaEquivalence(2, (frozenset({1, 2}), frozenset({2})))


def test_fragment_single_edge():
    c = fragment(single_edge_base(), SigmaEquivalence.discrete(2))
    assert c.result.n == 5
    assert set(c.result.language.relation_names()) == {"E", "R_0", "R_1", "R_2"}
    assert fragment_subedge(c, 0, 0) == (c.external_of[(0, 2)],)
    assert fragment_subedge(c, 0, 1) == (0, c.external_of[(0, 3)])
    assert fragment_subedge(c, 0, 2) == (1, c.external_of[(0, 4)])


def test_fragment_single_class_counts():
    base = BaseStructure(
        build_structure(BASE_BIN, 3, [("E", set()), ("R", {(0, 1), (1, 2)})]), "R"
    )
    c = fragment(base, SigmaEquivalence.single(2))
    # each edge contributes one aux per class plus the empty class
    assert c.result.n == 3 + 2 * 2
    assert len(c.result.tuples("R_1")) == 2


def test_fragment_empty_edges_is_shadow():
    base = BaseStructure(
        build_structure(BASE_BIN, 2, [("E", {(0, 1)}), ("R", set())]), "R"
    )
    c = fragment(base, SigmaEquivalence.discrete(2))
    assert c.result.n == 2 and c.result.tuples("E") == frozenset({(0, 1)})


def test_fragment_aux_degree_one():
    base = BaseStructure(
        build_structure(BASE_BIN, 3, [("E", set()), ("R", {(0, 1), (1, 2)})]), "R"
    )
    c = fragment(base, SigmaEquivalence.discrete(2))
    for v in c.external_vertices():
        if c.iota(v) >= 2 + 1:  # x_1, x_2 copies sit inside one subedge each
            assert len(c.result.adjacency[v]) == 1


# --- subdivision -------------------------------------------------------------------


def test_subdivide_triangle_to_hexagon():
    sub = subdivide(clique(3))
    assert sub.n == 6
    assert all(len(sub.adjacency[v]) == 2 for v in range(6))
    assert duplicator_wins(sub, cycle(6), 3)


def cycle(m: int):
    edges = set()
    for i in range(m):
        edges |= {(i, (i + 1) % m), ((i + 1) % m, i)}
    return build_structure(GRAPH, m, [("E", edges)])


def test_subdivide_k2_and_lollipop():
    assert subdivide(clique(2)).n == 3
    assert subdivide(lollipop_structure(4, 2)).n == 14


def test_subdivide_rejects_asymmetric():
    directed = build_structure(GRAPH, 2, [("E", {(0, 1)})])
    with pytest.raises(StructureError):
        subdivide(directed)


def test_undirected_requires_root_swap_automorphism():
    asym = build_structure(GRAPH, 3, [("E", {(0, 1), (1, 0)})])
    gadget = Gadget(asym, (0, 2))  # no automorphism swaps the roots (degrees differ)
    base = BaseStructure(
        build_structure(BASE_BIN, 2, [("E", set()), ("R", {(0, 1), (1, 0)})]), "R"
    )
    with pytest.raises(StructureError):
        undirected_gadget_construct(base, gadget)


# --- canonical sigma estimation -------------------------------------------------------


def test_estimate_eq_sigma_growing_paths():
    gadgets = [Gadget(path(n), (0, n - 1)) for n in (3, 5, 7, 9)]
    est = estimate_eq_sigma(gadgets, threshold=3)
    assert est.sigma == SigmaEquivalence.discrete(2)
    assert est.distance_trajectories[(1, 2)] == (2.0, 4.0, 6.0, 8.0)


def test_estimate_eq_sigma_adjacent_roots():
    gadgets = [Gadget(path(n), (0, 1)) for n in (3, 5, 7)]
    est = estimate_eq_sigma(gadgets, threshold=3)
    assert est.sigma == SigmaEquivalence.single(2)


def test_estimate_eq_sigma_single_root():
    gadgets = [Gadget(star_structure(n), (0,)) for n in (1, 2)]
    est = estimate_eq_sigma(gadgets, threshold=1)
    assert est.sigma == SigmaEquivalence.single(1)
    with pytest.raises(StructureError):
        estimate_eq_sigma([], 1)


def test_rooted_structure_names_avoid_collisions():
    g = Gadget(path(3), (0, 2))
    rooted = as_rooted_structure(g)
    assert rooted.constants == {"z1": 0, "z2": 2}
