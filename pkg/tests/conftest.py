"""Shared strategies and small builders for the test suite."""

from __future__ import annotations

import itertools

import pytest
from hypothesis import strategies as st

from gadgetlab.gadget import BaseStructure, Gadget
from gadgetlab.relstruct import Language, Structure, build_structure

GRAPH = Language.of([("E", 2)])
MARKED = Language.of([("E", 2), ("M", 1)])
BASE_BIN = Language.of([("E", 2), ("R", 2)])
BASE_UN = Language.of([("E", 2), ("R", 1)])


def clique(m: int, language: Language = GRAPH) -> Structure:
    edges = {(u, v) for u in range(m) for v in range(m) if u != v}
    return build_structure(language, m, [("E", edges)])


def path(m: int) -> Structure:
    edges = set()
    for i in range(m - 1):
        edges |= {(i, i + 1), (i + 1, i)}
    return build_structure(GRAPH, m, [("E", edges)])


def path_gadget() -> Gadget:
    return Gadget(path(3), (0, 2))


@st.composite
def structures(draw, max_n=6, language=GRAPH, allow_empty=False):
    n = draw(st.integers(min_value=0 if allow_empty else 1, max_value=max_n))
    relation_data = []
    for symbol, arity in language.relations:
        if n == 0:
            relation_data.append((symbol, set()))
            continue
        universe = list(itertools.product(range(n), repeat=arity))
        tuples = draw(st.sets(st.sampled_from(universe), max_size=min(len(universe), 12)))
        relation_data.append((symbol, tuples))
    constant_data = [(c, draw(st.integers(0, n - 1))) for c in language.constants]
    return build_structure(language, n, relation_data, constant_data)


@st.composite
def base_and_gadget(draw, max_base=6, max_gadget=5, max_arity=3):
    arity = draw(st.integers(1, max_arity))
    lang = Language.of([("E", 2), ("R", arity)])
    n = draw(st.integers(1, max_base))
    edge_universe = list(itertools.product(range(n), repeat=arity))
    r_edges = draw(st.sets(st.sampled_from(edge_universe), max_size=min(len(edge_universe), 6)))
    e_universe = list(itertools.product(range(n), repeat=2))
    e_edges = draw(st.sets(st.sampled_from(e_universe), max_size=8))
    base = BaseStructure(build_structure(lang, n, [("E", e_edges), ("R", r_edges)]), "R")

    ng = draw(st.integers(arity, max_gadget))
    g_universe = list(itertools.product(range(ng), repeat=2))
    g_edges = draw(st.sets(st.sampled_from(g_universe), max_size=8))
    g = build_structure(GRAPH, ng, [("E", g_edges)])
    root_list = draw(st.permutations(range(ng)))
    gadget = Gadget(g, tuple(root_list[:arity]))
    return base, gadget


@pytest.fixture
def k3():
    return clique(3)


@pytest.fixture
def k2():
    return clique(2)
