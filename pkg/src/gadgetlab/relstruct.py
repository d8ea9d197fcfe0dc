"""Finite relational structures over user-declared languages.

Vertices are dense integer ids ``0..n-1``.  Relation tuples are stored as
ordered tuples (directed semantics); undirected graphs are represented by
symmetric closure.  Structures are immutable after construction and safe to
share across workers; every operation here is a pure function of its inputs.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence


class StructureError(ValueError):
    """Raised for malformed languages, structures, or operation inputs."""


@dataclass(frozen=True)
class Language:
    """Relation symbols with arities, plus constant symbol names."""

    relations: tuple[tuple[str, int], ...]
    constants: tuple[str, ...] = ()

    def __post_init__(self):
        names = [name for name, _ in self.relations] + list(self.constants)
        if len(names) != len(set(names)):
            raise StructureError("duplicate symbol name in language")
        for name, arity in self.relations:
            if arity < 1:
                raise StructureError(f"arity of {name} must be >= 1")

    @staticmethod
    def of(relations: Iterable[tuple[str, int]], constants: Iterable[str] = ()) -> "Language":
        return Language(tuple(relations), tuple(constants))

    def arity(self, symbol: str) -> int:
        for name, arity in self.relations:
            if name == symbol:
                return arity
        raise StructureError(f"unknown relation symbol {symbol!r}")

    def has_relation(self, symbol: str) -> bool:
        return any(name == symbol for name, _ in self.relations)

    def relation_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.relations)

    @property
    def maxarity(self) -> int:
        return max((a for _, a in self.relations), default=0)

    def extended(self, relations: Iterable[tuple[str, int]] = (), constants: Iterable[str] = ()) -> "Language":
        return Language(self.relations + tuple(relations), self.constants + tuple(constants))

    def without_relation(self, symbol: str) -> "Language":
        if not self.has_relation(symbol):
            raise StructureError(f"unknown relation symbol {symbol!r}")
        return Language(tuple(r for r in self.relations if r[0] != symbol), self.constants)

    def is_sublanguage_of(self, other: "Language") -> bool:
        rels = dict(other.relations)
        return all(rels.get(name) == arity for name, arity in self.relations) and set(
            self.constants
        ) <= set(other.constants)


def merge_languages(a: Language, b: Language) -> Language:
    """Union of two languages; conflicting arities are an error."""
    rels = dict(a.relations)
    order = list(a.relations)
    for name, arity in b.relations:
        if name in rels:
            if rels[name] != arity:
                raise StructureError(f"symbol {name!r} declared with arities {rels[name]} and {arity}")
        else:
            rels[name] = arity
            order.append((name, arity))
    consts = list(a.constants) + [c for c in b.constants if c not in a.constants]
    return Language(tuple(order), tuple(consts))


class Structure:
    """A finite relational structure; use :func:`build_structure` to create one."""

    __slots__ = ("language", "n", "relations", "constants", "_adjacency", "_hash", "_dense", "__weakref__")

    def __init__(
        self,
        language: Language,
        n: int,
        relations: Mapping[str, frozenset[tuple[int, ...]]],
        constants: Mapping[str, int],
    ):
        self.language = language
        self.n = n
        self.relations = dict(relations)
        self.constants = dict(constants)
        self._adjacency = None
        self._hash = None
        self._dense = {}

    def __eq__(self, other):
        if not isinstance(other, Structure):
            return NotImplemented
        return (
            self.language == other.language
            and self.n == other.n
            and self.relations == other.relations
            and self.constants == other.constants
        )

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(
                (
                    self.language,
                    self.n,
                    tuple(sorted((k, tuple(sorted(v))) for k, v in self.relations.items())),
                    tuple(sorted(self.constants.items())),
                )
            )
        return self._hash

    def __repr__(self):
        rels = ", ".join(f"{k}:{len(v)}" for k, v in sorted(self.relations.items()))
        return f"Structure(n={self.n}, {rels}, consts={sorted(self.constants.items())})"

    def vertices(self) -> range:
        return range(self.n)

    def tuples(self, symbol: str) -> frozenset[tuple[int, ...]]:
        if symbol not in self.relations:
            raise StructureError(f"unknown relation symbol {symbol!r}")
        return self.relations[symbol]

    def constant(self, name: str) -> int:
        if name not in self.constants:
            raise StructureError(f"unknown constant symbol {name!r}")
        return self.constants[name]

    @property
    def adjacency(self) -> tuple[frozenset[int], ...]:
        """Gaifman adjacency: u ~ v iff they co-occur in some relation tuple."""
        if self._adjacency is None:
            adj = [set() for _ in range(self.n)]
            for tuples in self.relations.values():
                for tup in tuples:
                    for u in tup:
                        for v in tup:
                            if u != v:
                                adj[u].add(v)
            self._adjacency = tuple(frozenset(s) for s in adj)
        return self._adjacency

    def degree(self, v: int) -> int:
        """Gaifman degree (number of distinct neighbours)."""
        self._check_vertex(v)
        return len(self.adjacency[v])

    def _check_vertex(self, v: int) -> None:
        if not isinstance(v, int) or not 0 <= v < self.n:
            raise StructureError(f"vertex id {v!r} out of range 0..{self.n - 1}")


def build_structure(
    language: Language,
    n: int,
    relation_data: Iterable[tuple[str, Iterable[Sequence[int]]]] = (),
    constant_data: Iterable[tuple[str, int]] = (),
) -> Structure:
    """Build and validate a structure; relation tuple sets are deduplicated."""
    if n < 0:
        raise StructureError("domain size must be nonnegative")
    relations: dict[str, set[tuple[int, ...]]] = {name: set() for name, _ in language.relations}
    for symbol, tuples in relation_data:
        if symbol not in relations:
            raise StructureError(f"unknown relation symbol {symbol!r}")
        arity = language.arity(symbol)
        for tup in tuples:
            tup = tuple(tup)
            if len(tup) != arity:
                raise StructureError(f"tuple {tup} does not match arity {arity} of {symbol}")
            for v in tup:
                if not isinstance(v, int) or not 0 <= v < n:
                    raise StructureError(f"vertex id {v!r} out of range 0..{n - 1} in {symbol} tuple")
            relations[symbol].add(tup)
    constants: dict[str, int] = {}
    for symbol, v in constant_data:
        if symbol not in language.constants:
            raise StructureError(f"unknown constant symbol {symbol!r}")
        if symbol in constants:
            raise StructureError(f"constant {symbol!r} interpreted twice")
        if not isinstance(v, int) or not 0 <= v < n:
            raise StructureError(f"vertex id {v!r} out of range for constant {symbol}")
        constants[symbol] = v
    for symbol in language.constants:
        if symbol not in constants:
            raise StructureError(f"constant {symbol!r} left uninterpreted")
    return Structure(language, n, {k: frozenset(v) for k, v in relations.items()}, constants)


@dataclass(frozen=True)
class RootedStructure:
    """A structure with an ordered tuple of root vertices.

    The roots play the role of appended constants: :meth:`as_structure`
    materializes them as fresh constants after the base's own.
    """

    base: Structure
    roots: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        for v in self.roots:
            self.base._check_vertex(v)

    def root_constant_names(self) -> tuple[str, ...]:
        taken = set(self.base.language.constants)
        names = []
        for i in range(len(self.roots)):
            name = f"r{i + 1}"
            while name in taken:
                name += "_"
            taken.add(name)
            names.append(name)
        return tuple(names)

    def as_structure(self) -> Structure:
        """The rooted structure as a plain structure with extra constants."""
        names = self.root_constant_names()
        lang = self.base.language.extended(constants=names)
        consts = dict(self.base.constants)
        consts.update(zip(names, self.roots))
        return Structure(lang, self.base.n, self.base.relations, consts)


def gaifman_distance(s: Structure, u: int, v: int) -> int | float:
    """Shortest-path distance in the Gaifman graph; unreachable gives +inf."""
    s._check_vertex(u)
    s._check_vertex(v)
    if u == v:
        return 0
    adj = s.adjacency
    seen = {u}
    frontier = deque([(u, 0)])
    while frontier:
        w, d = frontier.popleft()
        for x in adj[w]:
            if x == v:
                return d + 1
            if x not in seen:
                seen.add(x)
                frontier.append((x, d + 1))
    return math.inf


def r_neighborhood(s: Structure, xs: Iterable[int], r: int, boundary: bool = False) -> frozenset[int]:
    """Vertices within Gaifman distance r of the set; boundary gives N(X) \\ X."""
    xs = frozenset(xs)
    for v in xs:
        s._check_vertex(v)
    if r < 0:
        raise StructureError("radius must be nonnegative")
    if boundary:
        return r_neighborhood(s, xs, 1) - xs
    adj = s.adjacency
    seen = set(xs)
    frontier = set(xs)
    for _ in range(r):
        nxt = set()
        for v in frontier:
            nxt.update(adj[v])
        nxt -= seen
        if not nxt:
            break
        seen |= nxt
        frontier = nxt
    return frozenset(seen)


def induced_substructure(s: Structure, xs: Iterable[int]) -> tuple[Structure, dict[int, int]]:
    """Substructure induced by a vertex set, with the old->new index map.

    The set must contain every interpreted constant's vertex.  A tuple
    survives iff all of its entries are kept.
    """
    xs = set(xs)
    for v in xs:
        s._check_vertex(v)
    for name, v in s.constants.items():
        if v not in xs:
            raise StructureError(f"vertex set omits constant {name!r} at {v}")
    index_map = {old: new for new, old in enumerate(sorted(xs))}
    relations = {
        symbol: frozenset(
            tuple(index_map[v] for v in tup) for tup in tuples if all(v in xs for v in tup)
        )
        for symbol, tuples in s.relations.items()
    }
    constants = {name: index_map[v] for name, v in s.constants.items()}
    return Structure(s.language, len(xs), relations, constants), index_map


def ball_of_roots(rs: RootedStructure, r: int) -> RootedStructure:
    """Substructure induced by the r-neighborhood of the roots and constants."""
    centers = set(rs.roots) | set(rs.base.constants.values())
    ball = r_neighborhood(rs.base, centers, r)
    sub, index_map = induced_substructure(rs.base, ball)
    return RootedStructure(sub, tuple(index_map[v] for v in rs.roots))


def disjoint_union(a: Structure, b: Structure) -> Structure:
    """Disjoint union; vertex ids of b are shifted by |V(a)|."""
    if a.language != b.language:
        raise StructureError("disjoint union requires equal languages")
    shift = a.n
    relations = {
        symbol: a.relations[symbol]
        | frozenset(tuple(v + shift for v in tup) for tup in b.relations[symbol])
        for symbol in a.relations
    }
    constants = dict(a.constants)
    for name, v in b.constants.items():
        if name in constants:
            raise StructureError(f"constant {name!r} interpreted in both operands")
        constants[name] = v + shift
    return Structure(a.language, a.n + b.n, relations, constants)


def shadow_to(s: Structure, sub: Language) -> Structure:
    """Forget realizations of symbols outside the sublanguage."""
    if not sub.is_sublanguage_of(s.language):
        raise StructureError("target is not a sublanguage")
    relations = {name: s.relations[name] for name, _ in sub.relations}
    constants = {name: s.constants[name] for name in sub.constants}
    return Structure(sub, s.n, relations, constants)


def relative_measure(s: Structure, xs: Iterable[int]) -> Fraction:
    """Relative size |X| / |V| as an exact rational."""
    if s.n == 0:
        raise StructureError("relative measure undefined on the empty structure")
    xs = frozenset(xs)
    for v in xs:
        s._check_vertex(v)
    return Fraction(len(xs), s.n)


def symmetric_closure(s: Structure, symbol: str) -> Structure:
    """Close one relation under all permutations of tuple entries."""
    import itertools

    tuples = set(s.tuples(symbol))
    closed = set()
    for tup in tuples:
        closed.update(itertools.permutations(tup))
    relations = dict(s.relations)
    relations[symbol] = frozenset(closed)
    return Structure(s.language, s.n, relations, s.constants)


def is_symmetric(s: Structure, symbol: str) -> bool:
    tuples = s.tuples(symbol)
    return all(tuple(reversed(tup)) in tuples for tup in tuples)
