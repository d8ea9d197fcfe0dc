"""Ehrenfeucht-Fraissé equivalence: game search, type refinement, strategies.

Two independent routes decide k-round equivalence:

* :class:`GameSolver` runs a memoized exhaustive search over game positions.
  The memo key is the sorted pick-pair multiset plus the remaining round
  count, which is sound because the win condition depends only on the set of
  matched pairs.
* :func:`rank_k_type_partition` refines atomic types of tuples level by
  level; two tuples get the same level-k fingerprint exactly when Duplicator
  wins the k-round game from them.

Search order is deterministic: Spoiler moves are enumerated left structure
first, ascending vertex id, and Duplicator responses ascending.  Operations
refuse products k*(n_left*n_right) above a configurable budget and raise
:class:`BudgetExceededError` rather than hanging; that is a distinct outcome
from a negative answer.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from .errors import BudgetExceededError
from .relstruct import Structure, StructureError

DEFAULT_PRODUCT_BUDGET = 20_000
DEFAULT_NODE_BUDGET = 5_000_000


class StrategyError(RuntimeError):
    """A strategy responder could not produce a safe move."""


@dataclass(frozen=True)
class GamePosition:
    left: Structure
    left_picks: tuple[int, ...]
    right: Structure
    right_picks: tuple[int, ...]
    rounds_left: int

    def __post_init__(self):
        if len(self.left_picks) != len(self.right_picks):
            raise StructureError("pick lists must have equal length")
        for v in self.left_picks:
            self.left._check_vertex(v)
        for v in self.right_picks:
            self.right._check_vertex(v)
        if self.rounds_left < 0:
            raise StructureError("rounds_left must be nonnegative")


def is_partial_isomorphism(
    a: Structure, a_picks: Sequence[int], b: Structure, b_picks: Sequence[int]
) -> bool:
    """Do the picks (with constants) induce a partial isomorphism?

    The candidate map sends a_i to b_i and each constant of a to the same
    constant of b; it must be well-defined, injective, and preserve every
    relation in both directions on the picked-and-constant vertices.
    """
    if len(a_picks) != len(b_picks):
        raise StructureError("pick lists must have equal length")
    if a.language != b.language:
        raise StructureError("structures must share a language")
    pairs = [(a.constants[c], b.constants[c]) for c in a.language.constants]
    pairs += list(zip(a_picks, b_picks))
    mapping: dict[int, int] = {}
    image: dict[int, int] = {}
    for x, y in pairs:
        if mapping.setdefault(x, y) != y or image.setdefault(y, x) != x:
            return False
    domain = list(mapping)
    codomain = [mapping[x] for x in domain]
    for symbol, arity in a.language.relations:
        ra, rb = a.relations[symbol], b.relations[symbol]
        for combo in itertools.product(range(len(domain)), repeat=arity):
            ta = tuple(domain[i] for i in combo)
            tb = tuple(codomain[i] for i in combo)
            if (ta in ra) != (tb in rb):
                return False
    return True


class GameSolver:
    """Memoized exhaustive search for Duplicator wins on a fixed pair."""

    def __init__(
        self,
        left: Structure,
        right: Structure,
        node_budget: int = DEFAULT_NODE_BUDGET,
    ):
        if left.language != right.language:
            raise StructureError("structures must share a language")
        self.left = left
        self.right = right
        self.node_budget = node_budget
        self.nodes = 0
        self._memo: dict[tuple, bool] = {}
        self._const_pairs = [
            (left.constants[c], right.constants[c]) for c in left.language.constants
        ]

    def duplicator_wins(
        self, left_picks: Sequence[int] = (), right_picks: Sequence[int] = (), rounds: int = 0
    ) -> bool:
        left_picks = tuple(left_picks)
        right_picks = tuple(right_picks)
        if not is_partial_isomorphism(self.left, left_picks, self.right, right_picks):
            return False
        return self._win(tuple(zip(left_picks, right_picks)), rounds)

    def _consistent_with(self, pairs: Sequence[tuple[int, int]], new: tuple[int, int]) -> bool:
        """Delta check: the new pair against constants and prior pairs."""
        x, y = new
        base = self._const_pairs + list(pairs)
        for px, py in base:
            if (px == x) != (py == y):
                return False
        mapping = dict(base)
        mapping[x] = y
        domain = list(mapping)
        for symbol, arity in self.left.language.relations:
            ra, rb = self.left.relations[symbol], self.right.relations[symbol]
            for combo in itertools.product(domain, repeat=arity):
                if x not in combo:
                    continue
                if (combo in ra) != (tuple(mapping[v] for v in combo) in rb):
                    return False
        return True

    def _win(self, pairs: tuple[tuple[int, int], ...], rounds: int) -> bool:
        if rounds == 0:
            return True
        key = (tuple(sorted(pairs)), rounds)
        cached = self._memo.get(key)
        if cached is not None:
            return cached
        self.nodes += 1
        if self.nodes > self.node_budget:
            raise BudgetExceededError(f"game search exceeded {self.node_budget} nodes")
        result = True
        for side, structure, other in (
            ("left", self.left, self.right),
            ("right", self.right, self.left),
        ):
            for u in range(structure.n):
                answered = False
                for v in range(other.n):
                    new = (u, v) if side == "left" else (v, u)
                    if self._consistent_with(pairs, new) and self._win(pairs + (new,), rounds - 1):
                        answered = True
                        break
                if not answered:
                    result = False
                    break
            if not result:
                break
        self._memo[key] = result
        return result


def _gate_product(left: Structure, right: Structure, k: int, product_budget: int) -> None:
    if k * left.n * right.n > product_budget:
        raise BudgetExceededError(
            f"game size k*n_left*n_right = {k * left.n * right.n} exceeds budget {product_budget}"
        )


def duplicator_wins(
    left: Structure,
    right: Structure,
    rounds: int,
    left_picks: Sequence[int] = (),
    right_picks: Sequence[int] = (),
    product_budget: int = DEFAULT_PRODUCT_BUDGET,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> bool:
    """Does Duplicator win the `rounds`-round game from the given position?"""
    _gate_product(left, right, rounds, product_budget)
    solver = GameSolver(left, right, node_budget)
    return solver.duplicator_wins(left_picks, right_picks, rounds)


def duplicator_wins_position(pos: GamePosition, **kwargs) -> bool:
    return duplicator_wins(
        pos.left, pos.right, pos.rounds_left, pos.left_picks, pos.right_picks, **kwargs
    )


@dataclass(frozen=True)
class EquivalenceRank:
    rank: int
    truncated: bool


def equivalence_rank(
    a: Structure,
    b: Structure,
    kmax: int,
    product_budget: int = DEFAULT_PRODUCT_BUDGET,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> EquivalenceRank:
    """Largest k <= kmax with a and b k-elementarily equivalent.

    Returns rank -1 only when even the constant configurations disagree
    (impossible without constants).  ``truncated`` means equivalence held all
    the way to kmax, so the true rank may be larger.
    """
    _gate_product(a, b, kmax, product_budget)
    solver = GameSolver(a, b, node_budget)
    rank = -1
    for k in range(kmax + 1):
        if not solver.duplicator_wins((), (), k):
            break
        rank = k
    return EquivalenceRank(rank, truncated=rank == kmax)


@dataclass(frozen=True)
class RhoDistance:
    value: Fraction
    truncated: bool


def rho_distance(a: Structure, b: Structure, kmax: int, **kwargs) -> RhoDistance:
    """2^-(equivalence rank), truncated at kmax.

    A truncated result is an upper bound: equivalence held through kmax, so
    the true distance may be smaller.
    """
    res = equivalence_rank(a, b, kmax, **kwargs)
    return RhoDistance(Fraction(1, 2 ** res.rank) if res.rank >= 0 else Fraction(2), res.truncated)


# ---------------------------------------------------------------------------
# Rank-k type refinement (independent oracle for the game solver)


@dataclass(frozen=True)
class TypePartition:
    k: int
    p: int
    fingerprints: dict[tuple[int, ...], str]
    type_ids: dict[tuple[int, ...], int]
    type_count: int

    def same_type(self, t1: tuple[int, ...], t2: tuple[int, ...]) -> bool:
        return self.fingerprints[t1] == self.fingerprints[t2]


def _digest(*parts: str) -> str:
    h = hashlib.sha256()
    for part in parts:
        h.update(part.encode())
        h.update(b"\x00")
    return h.hexdigest()[:32]


def _atomic_fingerprint(s: Structure, tup: tuple[int, ...]) -> str:
    """Canonical atomic type of a tuple (constants appended in sorted order)."""
    w = tup + tuple(s.constants[c] for c in sorted(s.constants))
    eq = [(i, j) for i in range(len(w)) for j in range(i + 1, len(w)) if w[i] == w[j]]
    parts = [f"p{len(tup)}", f"c{len(w) - len(tup)}", "eq" + repr(eq)]
    for symbol, arity in sorted(s.language.relations):
        members = sorted(
            combo
            for combo in itertools.product(range(len(w)), repeat=arity)
            if tuple(w[i] for i in combo) in s.relations[symbol]
        )
        parts.append(f"{symbol}/{arity}" + repr(members))
    return _digest(*parts)


def rank_k_type_partition(
    s: Structure, k: int, p: int, tuple_budget: int = 2_000_000
) -> TypePartition:
    """Partition of p-tuples by iterated type refinement to level k.

    Level 0 is the atomic type; level i+1 of a tuple combines its level-i
    type with the set of level-i types of its one-point extensions.
    Fingerprints are canonical digests, so partitions computed on different
    structures over the same language are directly comparable.
    """
    if k < 0 or p < 0:
        raise StructureError("k and p must be nonnegative")
    if s.n ** (p + k) > tuple_budget:
        raise BudgetExceededError(f"type refinement needs n^(p+k) = {s.n ** (p + k)} tuples")
    level: dict[tuple[int, ...], str] = {}
    for length in range(p, p + k + 1):
        for tup in itertools.product(range(s.n), repeat=length):
            level[tup] = _atomic_fingerprint(s, tup)
    for i in range(1, k + 1):
        nxt: dict[tuple[int, ...], str] = {}
        for length in range(p, p + k + 1 - i):
            for tup in itertools.product(range(s.n), repeat=length):
                extensions = sorted({level[tup + (v,)] for v in range(s.n)})
                nxt[tup] = _digest("L", level[tup], *extensions)
        level = nxt
    fingerprints = {
        tup: level[tup] for tup in itertools.product(range(s.n), repeat=p)
    }
    ids: dict[str, int] = {}
    type_ids = {}
    for tup in sorted(fingerprints):
        fp = fingerprints[tup]
        type_ids[tup] = ids.setdefault(fp, len(ids))
    return TypePartition(k, p, fingerprints, type_ids, len(ids))


# ---------------------------------------------------------------------------
# Strategies


@dataclass
class StrategyResponder:
    """A Duplicator strategy as a pure function of (position, Spoiler move).

    ``respond(pos, side, vertex)`` must return a vertex of the structure
    opposite to ``side``.  ``horizon`` is the number of rounds the responder
    guarantees.  Because responses depend only on the position, responders
    can be probed along branching game trees without cloning.
    """

    horizon: int
    respond: Callable[[GamePosition, str, int], int]


def copy_strategy(mapping: dict[int, int], horizon: int) -> StrategyResponder:
    """Mirror Spoiler through an isomorphism (left -> right mapping)."""
    inverse = {v: u for u, v in mapping.items()}
    if len(inverse) != len(mapping):
        raise StructureError("mapping is not injective")

    def respond(pos: GamePosition, side: str, vertex: int) -> int:
        table = mapping if side == "left" else inverse
        if vertex not in table:
            raise StrategyError(f"vertex {vertex} outside the isomorphism domain")
        return table[vertex]

    return StrategyResponder(horizon, respond)


def solver_strategy(
    left: Structure,
    right: Structure,
    horizon: int,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> StrategyResponder:
    """Optimal responder backed by the game solver (ties: ascending id).

    Only sound when Duplicator actually wins the horizon-round game; if no
    winning response exists the responder raises :class:`StrategyError`.
    """
    solver = GameSolver(left, right, node_budget)

    def respond(pos: GamePosition, side: str, vertex: int) -> int:
        if pos.rounds_left < 1:
            raise StrategyError("no rounds left")
        other = right if side == "left" else left
        for v in range(other.n):
            lp = pos.left_picks + ((vertex,) if side == "left" else (v,))
            rp = pos.right_picks + ((v,) if side == "left" else (vertex,))
            if solver.duplicator_wins(lp, rp, pos.rounds_left - 1):
                return v
        raise StrategyError("no winning response exists from this position")

    return StrategyResponder(horizon, respond)


def compose_strategy(strat_a: StrategyResponder, strat_g: StrategyResponder, c1, c2) -> StrategyResponder:
    """Compose base- and gadget-game strategies into one for the results.

    ``c1`` and ``c2`` are constructed structures over the same edge symbol.
    A Spoiler pick of an internal vertex consumes one move of ``strat_a``; a
    pick of an external vertex consumes arity(R) moves of ``strat_a`` (the
    whole replaced edge) followed by one move of ``strat_g``, and the answer
    is pulled back through the copy embedding of the answering side.  The
    guaranteed horizon is min(strat_a.horizon // arity(R), strat_g.horizon).
    """
    from .gadget import as_rooted_structure

    for c in (c1, c2):
        if c.external_map is None or c.edge_list is None:
            raise StrategyError("constructed structure lacks provenance maps")
    arity = len(c1.gadget.roots)
    if arity != len(c2.gadget.roots):
        raise StrategyError("gadget arities differ")
    horizon = min(strat_a.horizon // arity, strat_g.horizon)
    a1 = c1.base.structure
    a2 = c2.base.structure
    g1 = as_rooted_structure(c1.gadget)
    g2 = as_rooted_structure(c2.gadget)
    edge_index_2 = {e: i for i, e in enumerate(c2.edge_list)}
    edge_index_1 = {e: i for i, e in enumerate(c1.edge_list)}

    def respond(pos: GamePosition, side: str, vertex: int) -> int:
        # replay the history to rebuild both sub-game transcripts
        ha: list[tuple[int, int]] = []
        hg: list[tuple[int, int]] = []
        for a, b in zip(pos.left_picks, pos.right_picks):
            internal1 = c1.is_internal(a)
            if internal1 != c2.is_internal(b):
                raise StrategyError("inconsistent history: internal/external mismatch")
            if internal1:
                ha.append((a, b))
            else:
                e1, e2 = c1.rho(a), c2.rho(b)
                ha.extend(zip(e1, e2))
                hg.append((c1.iota(a), c2.iota(b)))

        c_s, c_d = (c1, c2) if side == "left" else (c2, c1)
        u = vertex
        if c_s.is_internal(u):
            if len(ha) + 1 > strat_a.horizon:
                raise StrategyError("base strategy horizon exhausted")
            pos_a = GamePosition(
                a1, tuple(x for x, _ in ha), a2, tuple(y for _, y in ha),
                strat_a.horizon - len(ha),
            )
            return strat_a.respond(pos_a, side, u)

        if len(ha) + arity > strat_a.horizon:
            raise StrategyError("base strategy horizon exhausted")
        if len(hg) + 1 > strat_g.horizon:
            raise StrategyError("gadget strategy horizon exhausted")
        e = c_s.rho(u)
        answers = []
        for ev in e:
            pos_a = GamePosition(
                a1, tuple(x for x, _ in ha), a2, tuple(y for _, y in ha),
                strat_a.horizon - len(ha),
            )
            fv = strat_a.respond(pos_a, side, ev)
            answers.append(fv)
            ha.append((ev, fv) if side == "left" else (fv, ev))
        f = tuple(answers)
        edge_index = edge_index_2 if side == "left" else edge_index_1
        if f not in edge_index:
            raise StrategyError(f"base strategy answered a non-edge {f}")
        pos_g = GamePosition(
            g1, tuple(x for x, _ in hg), g2, tuple(y for _, y in hg),
            strat_g.horizon - len(hg),
        )
        v_prime = strat_g.respond(pos_g, side, c_s.iota(u))
        roots_d = c_d.gadget.roots
        if v_prime in roots_d:
            return f[roots_d.index(v_prime)]
        return c_d.copy_vertex(edge_index[f], v_prime)

    return StrategyResponder(horizon, respond)


def survives_exhaustive_spoiler(
    left: Structure, right: Structure, responder: StrategyResponder, rounds: int
) -> bool:
    """Probe a responder against every Spoiler line of play.

    Returns True iff along every branch the accumulated picks stay a partial
    isomorphism for the full number of rounds.
    """

    def explore(lp: tuple[int, ...], rp: tuple[int, ...], remaining: int) -> bool:
        if remaining == 0:
            return True
        pos = GamePosition(left, lp, right, rp, remaining)
        for side, structure in (("left", left), ("right", right)):
            for u in range(structure.n):
                v = responder.respond(pos, side, u)
                nlp = lp + ((u,) if side == "left" else (v,))
                nrp = rp + ((v,) if side == "left" else (u,))
                if not is_partial_isomorphism(left, nlp, right, nrp):
                    return False
                if not explore(nlp, nrp, remaining - 1):
                    return False
        return True

    return explore((), (), rounds)
