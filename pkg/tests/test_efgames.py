import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import GRAPH, clique, path, path_gadget, structures
from gadgetlab.efgames import (
    GamePosition,
    GameSolver,
    StrategyError,
    compose_strategy,
    copy_strategy,
    duplicator_wins,
    equivalence_rank,
    is_partial_isomorphism,
    rank_k_type_partition,
    rho_distance,
    solver_strategy,
    survives_exhaustive_spoiler,
)
from gadgetlab.errors import BudgetExceededError
from gadgetlab.gadget import BaseStructure, Gadget, as_rooted_structure, gadget_construct
from gadgetlab.relstruct import Language, RootedStructure, StructureError, build_structure, gaifman_distance


def linear_order(m: int):
    lang = Language.of([("lt", 2)])
    return build_structure(lang, m, [("lt", {(i, j) for i in range(m) for j in range(m) if i < j})])


# --- partial isomorphisms -----------------------------------------------------


def test_partial_iso_examples(k2):
    assert is_partial_isomorphism(k2, (0, 1), k2, (1, 0))
    edge = build_structure(GRAPH, 2, [("E", {(0, 1), (1, 0)})])
    nonedge = build_structure(GRAPH, 2, [])
    assert not is_partial_isomorphism(edge, (0, 1), nonedge, (0, 1))
    assert not is_partial_isomorphism(k2, (0, 0), k2, (0, 1))


def test_partial_iso_constants():
    lang = Language.of([("E", 2)], ["c", "d"])
    a = build_structure(lang, 2, [("E", {(0, 1)})], [("c", 0), ("d", 1)])
    b = build_structure(lang, 2, [("E", set())], [("c", 0), ("d", 1)])
    assert is_partial_isomorphism(a, (), a, ())
    assert not is_partial_isomorphism(a, (), b, ())  # constants lose their edge


# --- game solver ---------------------------------------------------------------


def test_ef_cliques(k2, k3):
    assert duplicator_wins(k2, k3, 2)
    assert not duplicator_wins(k2, k3, 3)


def test_ef_reflexive():
    for n in (1, 3, 5):
        s = clique(n)
        for k in (0, 1, 2, 3):
            assert duplicator_wins(s, s, k)


def test_linear_order_threshold():
    assert duplicator_wins(linear_order(3), linear_order(4), 2)
    assert not duplicator_wins(linear_order(2), linear_order(3), 2)


def test_equivalence_rank_examples(k2, k3):
    res = equivalence_rank(k2, k3, 5)
    assert res.rank == 2 and not res.truncated
    res = equivalence_rank(k3, clique(3), 3)
    assert res.rank == 3 and res.truncated


def test_rank_zero_constant_mismatch():
    lang = Language.of([("E", 2)], ["c", "d"])
    a = build_structure(lang, 2, [("E", {(0, 1)})], [("c", 0), ("d", 1)])
    b = build_structure(lang, 2, [("E", set())], [("c", 0), ("d", 1)])
    res = equivalence_rank(a, b, 2)
    assert res.rank == -1


def test_rho_distance(k2, k3):
    assert rho_distance(k2, k3, 5).value == Fraction(1, 4)
    res = rho_distance(k3, clique(3), 4)
    assert res.value == Fraction(1, 16) and res.truncated


def test_rho_ultrametric_on_corpus():
    corpus = [clique(2), clique(3), clique(4), path(3), path(4), linear_order_free(4)]
    kmax = 3
    for a, b, c in itertools.permutations(corpus, 3):
        ab = rho_distance(a, b, kmax).value
        bc = rho_distance(b, c, kmax).value
        ac = rho_distance(a, c, kmax).value
        assert ac <= max(ab, bc)


def linear_order_free(m: int):
    # same language as the graph corpus so the pseudo-metric is defined
    return build_structure(GRAPH, m, [("E", {(i, j) for i in range(m) for j in range(m) if i < j})])


def test_budget_gate_is_distinct():
    big = clique(12)
    with pytest.raises(BudgetExceededError):
        duplicator_wins(big, big, 3, product_budget=10)
    solver = GameSolver(clique(4), clique(5), node_budget=3)
    with pytest.raises(BudgetExceededError):
        solver.duplicator_wins((), (), 3)


def test_language_mismatch():
    with pytest.raises(StructureError):
        duplicator_wins(clique(2), linear_order(2), 1)


@settings(max_examples=15, deadline=None)
@given(structures(max_n=4), structures(max_n=4), st.integers(1, 3))
def test_monotone_in_rounds(a, b, k):
    if duplicator_wins(a, b, k):
        for smaller in range(k):
            assert duplicator_wins(a, b, smaller)


def test_equivalence_relation_on_corpus():
    corpus = [clique(2), clique(3), path(3), path(4), clique(4)]
    k = 2
    for a in corpus:
        assert duplicator_wins(a, a, k)
    for a, b in itertools.combinations(corpus, 2):
        assert duplicator_wins(a, b, k) == duplicator_wins(b, a, k)
    for a, b, c in itertools.permutations(corpus, 3):
        if duplicator_wins(a, b, k) and duplicator_wins(b, c, k):
            assert duplicator_wins(a, c, k)


# --- type refinement -----------------------------------------------------------


def test_type_partition_k3(k3):
    assert rank_k_type_partition(k3, 1, 1).type_count == 1


def test_type_partition_rooted_path():
    lang = Language.of([("E", 2)], ["c"])
    p3 = build_structure(lang, 3, [("E", {(0, 1), (1, 0), (1, 2), (2, 1)})], [("c", 0)])
    assert rank_k_type_partition(p3, 0, 1).type_count == 3


def test_type_partition_budget():
    with pytest.raises(BudgetExceededError):
        rank_k_type_partition(clique(6), 3, 2, tuple_budget=10)


@settings(max_examples=10, deadline=None)
@given(structures(max_n=4), structures(max_n=4), st.integers(0, 3), st.integers(0, 2))
def test_types_agree_with_games(a, b, k, p):
    ta = rank_k_type_partition(a, k, p)
    tb = rank_k_type_partition(b, k, p)
    solver = GameSolver(a, b)
    for ap in itertools.product(range(a.n), repeat=p):
        for bp in itertools.product(range(b.n), repeat=p):
            assert solver.duplicator_wins(ap, bp, k) == (
                ta.fingerprints[ap] == tb.fingerprints[bp]
            )


# --- lemmas as properties --------------------------------------------------------


@settings(max_examples=15, deadline=None)
@given(structures(max_n=4))
def test_winning_positions_measure_distances(s):
    # picks with a winning 2-round continuation preserve distances up to
    # r = 1 (binary language: r * maxarity = 2 <= k = 2)
    solver = GameSolver(s, s)
    k, r = 2, 1
    for a1, a2, b1, b2 in itertools.product(range(s.n), repeat=4):
        if solver.duplicator_wins((a1, a2), (b1, b2), k):
            da = gaifman_distance(s, a1, a2)
            db = gaifman_distance(s, b1, b2)
            assert da == db or (da > r and db > r)


@settings(max_examples=10, deadline=None)
@given(structures(max_n=4), st.integers(0, 3), st.integers(0, 3))
def test_neighborhood_restriction_lemma(s, root_a, root_b):
    # winning the deep game on rooted structures implies winning the shallow
    # game on the balls: t >= r*maxarity + k with r = 1, k = 1
    if s.n == 0:
        return
    root_a %= s.n
    root_b %= s.n
    k, r = 1, 1
    t = r * s.language.maxarity + k
    ra = RootedStructure(s, (root_a,))
    rb = RootedStructure(s, (root_b,))
    if duplicator_wins(ra.as_structure(), rb.as_structure(), t):
        from gadgetlab.relstruct import ball_of_roots

        ball_a = ball_of_roots(ra, r).as_structure()
        ball_b = ball_of_roots(rb, r).as_structure()
        assert duplicator_wins(ball_a, ball_b, k)


# --- strategies -------------------------------------------------------------------


def _single_edge_instance():
    lang = Language.of([("E", 2), ("R", 2)])
    base = BaseStructure(build_structure(lang, 2, [("E", set()), ("R", {(0, 1)})]), "R")
    return base, path_gadget()


def test_copy_strategy_survives():
    base, g = _single_edge_instance()
    c = gadget_construct(base, g)
    n = c.result.n
    responder = copy_strategy({v: v for v in range(n)}, 3)
    assert survives_exhaustive_spoiler(c.result, c.result, responder, 3)


def test_composed_strategy_isomorphic_case():
    base, g = _single_edge_instance()
    c1 = gadget_construct(base, g)
    c2 = gadget_construct(base, g)
    k = 2
    arity = 2
    strat_a = solver_strategy(base.structure, base.structure, k * arity)
    strat_g = solver_strategy(as_rooted_structure(g), as_rooted_structure(g), k)
    composed = compose_strategy(strat_a, strat_g, c1, c2)
    assert composed.horizon == k
    assert survives_exhaustive_spoiler(c1.result, c2.result, composed, k)


def test_composed_strategy_certified_premises():
    # nonisomorphic bases equivalent at depth k*arity, star gadgets at depth k
    lang = Language.of([("E", 2), ("R", 1)])

    def marked_iso(m, extra):
        return BaseStructure(
            build_structure(lang, m + extra, [("E", set()), ("R", {(v,) for v in range(m)})]), "R"
        )

    from gadgetlab.sequences import star_structure

    b1, b2 = marked_iso(2, 2), marked_iso(3, 2)
    g1 = Gadget(star_structure(2), (0,))
    g2 = Gadget(star_structure(3), (0,))
    k = 2
    assert duplicator_wins(b1.structure, b2.structure, k * 1)
    assert duplicator_wins(as_rooted_structure(g1), as_rooted_structure(g2), k)
    c1 = gadget_construct(b1, g1)
    c2 = gadget_construct(b2, g2)
    strat_a = solver_strategy(b1.structure, b2.structure, k * 1)
    strat_g = solver_strategy(as_rooted_structure(g1), as_rooted_structure(g2), k)
    composed = compose_strategy(strat_a, strat_g, c1, c2)
    assert survives_exhaustive_spoiler(c1.result, c2.result, composed, k)


def test_composed_strategy_horizon_error():
    base, g = _single_edge_instance()
    c1 = gadget_construct(base, g)
    c2 = gadget_construct(base, g)
    strat_a = solver_strategy(base.structure, base.structure, 2)  # only one external move worth
    strat_g = solver_strategy(as_rooted_structure(g), as_rooted_structure(g), 5)
    composed = compose_strategy(strat_a, strat_g, c1, c2)
    assert composed.horizon == 1
    external = c1.result.n - 1
    pos = GamePosition(c1.result, (external,), c2.result, (external,), 1)
    # after one external round the base strategy is exhausted
    with pytest.raises(StrategyError):
        composed.respond(pos, "left", external)


def test_solver_strategy_no_win_errors(k2, k3):
    responder = solver_strategy(k2, k3, 3)
    pos = GamePosition(k2, (), k3, (), 3)
    with pytest.raises(StrategyError):
        # Spoiler opens in K3; no response keeps a 3-round win alive
        responder.respond(pos, "right", 0)
