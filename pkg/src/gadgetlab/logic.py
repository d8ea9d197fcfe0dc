"""First-order formulas: AST, parser, brute-force evaluation, Stone pairings.

Evaluation is Tarskian over the finite domain.  The evaluator materializes
satisfaction tables as numpy boolean arrays (one axis per live variable) and
falls back to plain recursion when a table would not fit the cell budget.
Quantifiers range over all vertices; tuples in Stone pairings may repeat
vertices.

Formula DSL (EBNF)::

    formula := quant | bool
    quant   := ("exists" | "forall") var "." formula
    bool    := disj
    disj    := conj {"or" conj}
    conj    := lit {"and" lit}
    lit     := ["not"] atom
    atom    := name "(" term {"," term} ")" | term "=" term | "(" formula ")"
    term    := var | "@" constname
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import BudgetExceededError
from .relstruct import Structure


class FormulaError(ValueError):
    """Syntax or well-formedness error in a formula."""


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Term:
    pass


@dataclass(frozen=True)
class Var(Term):
    name: str


@dataclass(frozen=True)
class Const(Term):
    name: str


@dataclass(frozen=True)
class Formula:
    pass


@dataclass(frozen=True)
class Atom(Formula):
    relation: str
    terms: tuple[Term, ...]


@dataclass(frozen=True)
class Equal(Formula):
    left: Term
    right: Term


@dataclass(frozen=True)
class Not(Formula):
    body: Formula


@dataclass(frozen=True)
class And(Formula):
    parts: tuple[Formula, ...]


@dataclass(frozen=True)
class Or(Formula):
    parts: tuple[Formula, ...]


@dataclass(frozen=True)
class Exists(Formula):
    var: str
    body: Formula


@dataclass(frozen=True)
class Forall(Formula):
    var: str
    body: Formula


def free_variables(f: Formula) -> tuple[str, ...]:
    """Free variables in first-use order."""
    seen: list[str] = []

    def walk(node: Formula, bound: frozenset[str]) -> None:
        if isinstance(node, (Atom, Equal)):
            terms = node.terms if isinstance(node, Atom) else (node.left, node.right)
            for t in terms:
                if isinstance(t, Var) and t.name not in bound and t.name not in seen:
                    seen.append(t.name)
        elif isinstance(node, Not):
            walk(node.body, bound)
        elif isinstance(node, (And, Or)):
            for part in node.parts:
                walk(part, bound)
        elif isinstance(node, (Exists, Forall)):
            walk(node.body, bound | {node.var})

    walk(f, frozenset())
    return tuple(seen)


def quantifier_rank(f: Formula) -> int:
    if isinstance(f, (Atom, Equal)):
        return 0
    if isinstance(f, Not):
        return quantifier_rank(f.body)
    if isinstance(f, (And, Or)):
        return max((quantifier_rank(p) for p in f.parts), default=0)
    if isinstance(f, (Exists, Forall)):
        return 1 + quantifier_rank(f.body)
    raise FormulaError(f"unknown node {f!r}")


def negation_normal_form(f: Formula) -> Formula:
    """Push negations to atoms (used as an independent evaluation route)."""
    if isinstance(f, (Atom, Equal)):
        return f
    if isinstance(f, And):
        return And(tuple(negation_normal_form(p) for p in f.parts))
    if isinstance(f, Or):
        return Or(tuple(negation_normal_form(p) for p in f.parts))
    if isinstance(f, Exists):
        return Exists(f.var, negation_normal_form(f.body))
    if isinstance(f, Forall):
        return Forall(f.var, negation_normal_form(f.body))
    body = f.body
    if isinstance(body, (Atom, Equal)):
        return f
    if isinstance(body, Not):
        return negation_normal_form(body.body)
    if isinstance(body, And):
        return Or(tuple(negation_normal_form(Not(p)) for p in body.parts))
    if isinstance(body, Or):
        return And(tuple(negation_normal_form(Not(p)) for p in body.parts))
    if isinstance(body, Exists):
        return Forall(body.var, negation_normal_form(Not(body.body)))
    if isinstance(body, Forall):
        return Exists(body.var, negation_normal_form(Not(body.body)))
    raise FormulaError(f"unknown node {body!r}")


def formula_to_text(f: Formula) -> str:
    if isinstance(f, Atom):
        return f.relation + "(" + ",".join(_term_text(t) for t in f.terms) + ")"
    if isinstance(f, Equal):
        return f"{_term_text(f.left)} = {_term_text(f.right)}"
    if isinstance(f, Not):
        return f"not ({formula_to_text(f.body)})"
    if isinstance(f, And):
        return " and ".join(f"({formula_to_text(p)})" for p in f.parts)
    if isinstance(f, Or):
        return " or ".join(f"({formula_to_text(p)})" for p in f.parts)
    if isinstance(f, Exists):
        return f"exists {f.var}. ({formula_to_text(f.body)})"
    if isinstance(f, Forall):
        return f"forall {f.var}. ({formula_to_text(f.body)})"
    raise FormulaError(f"unknown node {f!r}")


def _term_text(t: Term) -> str:
    return t.name if isinstance(t, Var) else "@" + t.name


# ---------------------------------------------------------------------------
# Parser


_KEYWORDS = {"exists", "forall", "and", "or", "not"}


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "(),.=":
            kinds = {"(": "lparen", ")": "rparen", ",": "comma", ".": "dot", "=": "equals"}
            tokens.append(_Token(kinds[ch], ch, i))
            i += 1
            continue
        if ch == "@":
            j = i + 1
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            if j == i + 1:
                raise FormulaError(f"position {i}: expected constant name after '@'")
            tokens.append(_Token("const", text[i + 1:j], i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            tokens.append(_Token(word if word in _KEYWORDS else "name", word, i))
            i = j
            continue
        raise FormulaError(f"position {i}: unexpected character {ch!r}")
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token], source: str):
        self.tokens = tokens
        self.source = source
        self.i = 0

    def peek(self) -> _Token | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self, kind: str | None = None) -> _Token:
        tok = self.peek()
        if tok is None:
            raise FormulaError(f"position {len(self.source)}: unexpected end of input")
        if kind is not None and tok.kind != kind:
            raise FormulaError(f"position {tok.pos}: expected {kind}, found {tok.text!r}")
        self.i += 1
        return tok

    def formula(self) -> Formula:
        tok = self.peek()
        if tok is not None and tok.kind in ("exists", "forall"):
            self.take()
            var = self.take("name").text
            self.take("dot")
            body = self.formula()
            return Exists(var, body) if tok.kind == "exists" else Forall(var, body)
        return self.disj()

    def disj(self) -> Formula:
        parts = [self.conj()]
        while (tok := self.peek()) is not None and tok.kind == "or":
            self.take()
            parts.append(self.conj())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def conj(self) -> Formula:
        parts = [self.lit()]
        while (tok := self.peek()) is not None and tok.kind == "and":
            self.take()
            parts.append(self.lit())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def lit(self) -> Formula:
        # quantifiers are admitted in literal position with a greedy body,
        # so `... and forall z. E(y,z)` parses without extra parentheses
        if (tok := self.peek()) is not None and tok.kind == "not":
            self.take()
            if (nxt := self.peek()) is not None and nxt.kind in ("exists", "forall"):
                return Not(self.formula())
            return Not(self.atom())
        if tok is not None and tok.kind in ("exists", "forall"):
            return self.formula()
        return self.atom()

    def atom(self) -> Formula:
        tok = self.peek()
        if tok is None:
            raise FormulaError(f"position {len(self.source)}: unexpected end of input")
        if tok.kind == "lparen":
            self.take()
            inner = self.formula()
            self.take("rparen")
            return inner
        if tok.kind == "name" and self.i + 1 < len(self.tokens) and self.tokens[self.i + 1].kind == "lparen":
            self.take()
            self.take("lparen")
            terms = [self.term()]
            while self.peek() is not None and self.peek().kind == "comma":
                self.take()
                terms.append(self.term())
            self.take("rparen")
            return Atom(tok.text, tuple(terms))
        left = self.term()
        self.take("equals")
        right = self.term()
        return Equal(left, right)

    def term(self) -> Term:
        tok = self.take()
        if tok.kind == "name":
            return Var(tok.text)
        if tok.kind == "const":
            return Const(tok.text)
        raise FormulaError(f"position {tok.pos}: expected a term, found {tok.text!r}")


def _all_names(f: Formula) -> set[str]:
    names = set()

    def walk(node):
        if isinstance(node, Atom):
            names.update(t.name for t in node.terms if isinstance(t, Var))
        elif isinstance(node, Equal):
            names.update(t.name for t in (node.left, node.right) if isinstance(t, Var))
        elif isinstance(node, Not):
            walk(node.body)
        elif isinstance(node, (And, Or)):
            for p in node.parts:
                walk(p)
        elif isinstance(node, (Exists, Forall)):
            names.add(node.var)
            walk(node.body)

    walk(f)
    return names


def normalize_bound_variables(f: Formula) -> Formula:
    """Alpha-rename bound variables to fresh canonical names."""
    taken = _all_names(f)
    counter = itertools.count()

    def fresh() -> str:
        while True:
            name = f"_q{next(counter)}"
            if name not in taken:
                taken.add(name)
                return name

    def walk(node: Formula, env: dict[str, str]) -> Formula:
        if isinstance(node, Atom):
            return Atom(node.relation, tuple(_sub(t, env) for t in node.terms))
        if isinstance(node, Equal):
            return Equal(_sub(node.left, env), _sub(node.right, env))
        if isinstance(node, Not):
            return Not(walk(node.body, env))
        if isinstance(node, And):
            return And(tuple(walk(p, env) for p in node.parts))
        if isinstance(node, Or):
            return Or(tuple(walk(p, env) for p in node.parts))
        if isinstance(node, (Exists, Forall)):
            name = fresh()
            inner = dict(env)
            inner[node.var] = name
            body = walk(node.body, inner)
            return Exists(name, body) if isinstance(node, Exists) else Forall(name, body)
        raise FormulaError(f"unknown node {node!r}")

    def _sub(t: Term, env) -> Term:
        if isinstance(t, Var) and t.name in env:
            return Var(env[t.name])
        return t

    return walk(f, {})


def parse_formula(text: str, language=None) -> Formula:
    """Parse the DSL; bound variables are normalized apart.

    When a language is supplied, relation arities and constant names are
    checked immediately; otherwise validation happens at evaluation time.
    """
    parser = _Parser(_tokenize(text), text)
    f = parser.formula()
    if (tok := parser.peek()) is not None:
        raise FormulaError(f"position {tok.pos}: trailing input {tok.text!r}")
    f = normalize_bound_variables(f)
    if language is not None:
        validate_formula(f, language)
    return f


def validate_formula(f: Formula, language) -> None:
    if isinstance(f, Atom):
        if not language.has_relation(f.relation):
            raise FormulaError(f"unknown relation symbol {f.relation!r}")
        arity = language.arity(f.relation)
        if len(f.terms) != arity:
            raise FormulaError(
                f"relation {f.relation!r} has arity {arity}, got {len(f.terms)} terms"
            )
        for t in f.terms:
            if isinstance(t, Const) and t.name not in language.constants:
                raise FormulaError(f"unknown constant symbol {t.name!r}")
    elif isinstance(f, Equal):
        for t in (f.left, f.right):
            if isinstance(t, Const) and t.name not in language.constants:
                raise FormulaError(f"unknown constant symbol {t.name!r}")
    elif isinstance(f, Not):
        validate_formula(f.body, language)
    elif isinstance(f, (And, Or)):
        for p in f.parts:
            validate_formula(p, language)
    elif isinstance(f, (Exists, Forall)):
        validate_formula(f.body, language)
    else:
        raise FormulaError(f"unknown node {f!r}")


# ---------------------------------------------------------------------------
# Evaluation


@dataclass(frozen=True)
class EvalBudget:
    """Caps for table evaluation: max cells per table, max total cell work."""

    cells: int = 1 << 26
    work: int = 1 << 34


DEFAULT_BUDGET = EvalBudget()


def _dense_relation(s: Structure, symbol: str, cells: int):
    # cached on the (immutable) structure; keyed by identity, not content hash
    cache = s._dense
    if symbol in cache:
        return cache[symbol]
    arity = s.language.arity(symbol)
    if s.n ** arity > cells:
        return None
    arr = np.zeros((s.n,) * arity, dtype=bool)
    tuples = s.relations[symbol]
    if tuples:
        cols = np.array(sorted(tuples), dtype=np.intp)
        arr[tuple(cols[:, i] for i in range(arity))] = True
    cache[symbol] = arr
    return arr


_eye_cache: dict[int, np.ndarray] = {}


def _eye(n: int) -> np.ndarray:
    arr = _eye_cache.get(n)
    if arr is None:
        arr = np.equal.outer(np.arange(n), np.arange(n))
        if len(_eye_cache) > 8:
            _eye_cache.clear()
        _eye_cache[n] = arr
    return arr


def _unfixed_vars(f: Formula, fixed: frozenset[str]) -> frozenset[str]:
    return frozenset(v for v in free_variables(f) if v not in fixed)


def _peak(f: Formula, fixed: frozenset[str]) -> int:
    """Max number of live variable axes any table for f needs."""
    if isinstance(f, (Atom, Equal)):
        return len(_unfixed_vars(f, fixed))
    if isinstance(f, Not):
        return _peak(f.body, fixed)
    if isinstance(f, (And, Or)):
        here = len(frozenset().union(*(_unfixed_vars(p, fixed) for p in f.parts)) if f.parts else frozenset())
        return max([here] + [_peak(p, fixed) for p in f.parts])
    if isinstance(f, (Exists, Forall)):
        return max(len(_unfixed_vars(f, fixed)), _peak(f.body, fixed))
    raise FormulaError(f"unknown node {f!r}")


def _resolve(t: Term, s: Structure, fixed: Mapping[str, int]):
    """A term becomes either a concrete vertex id or a live variable name."""
    if isinstance(t, Const):
        if t.name not in s.constants:
            raise FormulaError(f"unknown constant symbol {t.name!r}")
        return s.constants[t.name]
    if t.name in fixed:
        return fixed[t.name]
    return t


def _align(src_vars: tuple[str, ...], arr, dst_vars: tuple[str, ...]):
    """Reshape arr (axes = src_vars) so it broadcasts against dst_vars axes."""
    order = sorted(range(len(src_vars)), key=lambda i: dst_vars.index(src_vars[i]))
    if order != list(range(len(src_vars))):
        arr = np.transpose(arr, order)
        src_vars = tuple(src_vars[i] for i in order)
    shape = []
    k = 0
    for v in dst_vars:
        if k < len(src_vars) and src_vars[k] == v:
            shape.append(arr.shape[k])
            k += 1
        else:
            shape.append(1)
    return arr.reshape(shape)


def _join(pairs, op):
    all_vars: list[str] = []
    for vars_, _ in pairs:
        for v in vars_:
            if v not in all_vars:
                all_vars.append(v)
    dst = tuple(all_vars)
    acc = None
    for vars_, arr in pairs:
        aligned = _align(vars_, arr, dst)
        acc = aligned if acc is None else op(acc, aligned)
    return dst, acc


def _table(s: Structure, f: Formula, fixed: Mapping[str, int], cells: int):
    """Satisfaction table of f over its unfixed free variables.

    Returns (vars, arr) where arr is a boolean array with one axis of length
    n per variable (0-dim for none).
    """
    n = s.n
    if isinstance(f, Atom):
        if not s.language.has_relation(f.relation):
            raise FormulaError(f"unknown relation symbol {f.relation!r}")
        if len(f.terms) != s.language.arity(f.relation):
            raise FormulaError(f"arity mismatch for {f.relation!r}")
        resolved = [_resolve(t, s, fixed) for t in f.terms]
        vars_: list[str] = []
        for rt in resolved:
            if isinstance(rt, Var) and rt.name not in vars_:
                vars_.append(rt.name)
        dense = _dense_relation(s, f.relation, cells)
        if dense is not None:
            index = []
            for rt in resolved:
                if isinstance(rt, Var):
                    axis = vars_.index(rt.name)
                    shape = [1] * len(vars_)
                    shape[axis] = n
                    index.append(np.arange(n).reshape(shape))
                else:
                    index.append(rt)
            return tuple(vars_), np.asarray(dense[tuple(index)])
        # sparse path: scatter matching tuples
        arr = np.zeros((n,) * len(vars_), dtype=bool)
        for tup in s.relations[f.relation]:
            env: dict[str, int] = {}
            ok = True
            for rt, value in zip(resolved, tup):
                if isinstance(rt, Var):
                    if env.setdefault(rt.name, value) != value:
                        ok = False
                        break
                elif rt != value:
                    ok = False
                    break
            if ok:
                arr[tuple(env[v] for v in vars_)] = True
        return tuple(vars_), arr
    if isinstance(f, Equal):
        left = _resolve(f.left, s, fixed)
        right = _resolve(f.right, s, fixed)
        lv = isinstance(left, Var)
        rv = isinstance(right, Var)
        if not lv and not rv:
            return (), np.asarray(left == right)
        if lv and rv:
            if left.name == right.name:
                return (left.name,), np.ones(n, dtype=bool)
            return (left.name, right.name), _eye(n)
        var = left.name if lv else right.name
        value = right if lv else left
        return (var,), np.arange(n) == value
    if isinstance(f, Not):
        vars_, arr = _table(s, f.body, fixed, cells)
        return vars_, ~arr
    if isinstance(f, (And, Or)):
        op = np.logical_and if isinstance(f, And) else np.logical_or
        if not f.parts:
            raise FormulaError("empty connective")
        return _join([_table(s, p, fixed, cells) for p in f.parts], op)
    if isinstance(f, (Exists, Forall)):
        vars_, arr = _table(s, f.body, fixed, cells)
        if f.var in vars_:
            axis = vars_.index(f.var)
            reduced = arr.any(axis=axis) if isinstance(f, Exists) else arr.all(axis=axis)
            return tuple(v for v in vars_ if v != f.var), reduced
        if n > 0:
            return vars_, arr
        value = isinstance(f, Forall)
        return vars_, np.full(arr.shape, value, dtype=bool)
    raise FormulaError(f"unknown node {f!r}")


def _eval_recursive(s: Structure, f: Formula, env: dict[str, int]) -> bool:
    """Plain recursive evaluation; correct everywhere, used as a fallback."""
    if isinstance(f, Atom):
        tup = tuple(_term_value(t, s, env) for t in f.terms)
        return tup in s.tuples(f.relation)
    if isinstance(f, Equal):
        return _term_value(f.left, s, env) == _term_value(f.right, s, env)
    if isinstance(f, Not):
        return not _eval_recursive(s, f.body, env)
    if isinstance(f, And):
        return all(_eval_recursive(s, p, env) for p in f.parts)
    if isinstance(f, Or):
        return any(_eval_recursive(s, p, env) for p in f.parts)
    if isinstance(f, Exists):
        return any(_eval_recursive(s, f.body, {**env, f.var: v}) for v in range(s.n))
    if isinstance(f, Forall):
        return all(_eval_recursive(s, f.body, {**env, f.var: v}) for v in range(s.n))
    raise FormulaError(f"unknown node {f!r}")


def _term_value(t: Term, s: Structure, env: Mapping[str, int]) -> int:
    if isinstance(t, Const):
        if t.name not in s.constants:
            raise FormulaError(f"unknown constant symbol {t.name!r}")
        return s.constants[t.name]
    if t.name not in env:
        raise FormulaError(f"missing assignment for free variable {t.name!r}")
    return env[t.name]


def evaluate(s: Structure, f: Formula, valuation: Mapping[str, int] | None = None,
             budget: EvalBudget = DEFAULT_BUDGET) -> bool:
    """Truth value of f in s under a valuation of its free variables."""
    valuation = dict(valuation or {})
    frees = free_variables(f)
    for v in frees:
        if v not in valuation:
            raise FormulaError(f"missing assignment for free variable {v!r}")
        s._check_vertex(valuation[v])
    validate_formula(f, s.language)
    fixed = {v: valuation[v] for v in frees}
    if s.n ** _peak(f, frozenset(fixed)) <= budget.cells:
        _, arr = _table(s, f, fixed, budget.cells)
        return bool(arr)
    return _eval_recursive(s, f, fixed)


def _count_models(s: Structure, f: Formula, frees: Sequence[str], budget: EvalBudget) -> int:
    """Number of assignments of frees (in V^len(frees)) satisfying f."""
    n = s.n
    p = len(frees)
    prefix = 0
    while prefix < p and n ** _peak(f, frozenset(frees[:prefix])) > budget.cells:
        prefix += 1
    if n ** _peak(f, frozenset(frees[:prefix])) > budget.cells:
        # even fully fixed the tables are too big; recurse per assignment
        return sum(
            _eval_recursive(s, f, dict(zip(frees, assign)))
            for assign in itertools.product(range(n), repeat=p)
        )
    total = 0
    for assign in itertools.product(range(n), repeat=prefix):
        fixed = dict(zip(frees[:prefix], assign))
        vars_, arr = _table(s, f, fixed, budget.cells)
        count = int(arr.sum())
        # free variables that fell out of the table range freely
        count *= n ** (p - prefix - len(vars_))
        total += count
    return total


def _work_estimate(s: Structure, f: Formula) -> float:
    peak = _peak(f, frozenset())
    try:
        return float(s.n ** peak)
    except OverflowError:
        return math.inf


def stone_pairing_exact(s: Structure, f: Formula, budget: EvalBudget = DEFAULT_BUDGET) -> Fraction:
    """Probability that a uniform tuple of vertices satisfies f; {0,1} for sentences.

    Assignments with repeated vertices count; the denominator is n^p.
    """
    validate_formula(f, s.language)
    frees = free_variables(f)
    if not frees:
        return Fraction(1 if evaluate(s, f, {}, budget) else 0)
    if s.n == 0:
        raise FormulaError("Stone pairing with free variables is undefined on the empty structure")
    if _work_estimate(s, f) > budget.work:
        raise BudgetExceededError(
            f"pairing work estimate n^{_peak(f, frozenset())} exceeds budget"
        )
    count = _count_models(s, f, frees, budget)
    return Fraction(count, s.n ** len(frees))


def stone_pairing_sampled(
    s: Structure,
    f: Formula,
    samples: int,
    seed: int,
    budget: EvalBudget = DEFAULT_BUDGET,
) -> tuple[Fraction, float]:
    """Monte Carlo Stone pairing over i.i.d. uniform tuples.

    Deterministic for a fixed seed.  Returns (estimate, halfwidth) where the
    halfwidth is the 95% normal-approximation bound 1.96*sqrt(p(1-p)/N).
    """
    from .rng import SplitMix64

    if samples <= 0:
        raise ValueError("sample count must be positive")
    frees = free_variables(f)
    if not frees:
        raise FormulaError("sampling requires at least one free variable")
    if s.n == 0:
        raise FormulaError("cannot sample from an empty structure")
    validate_formula(f, s.language)
    rng = SplitMix64(seed)
    hits = 0
    for _ in range(samples):
        env = {v: rng.below(s.n) for v in frees}
        if evaluate(s, f, env, budget):
            hits += 1
    estimate = Fraction(hits, samples)
    phat = hits / samples
    halfwidth = 1.96 * math.sqrt(phat * (1.0 - phat) / samples)
    return estimate, halfwidth


def conditional_stone_pairing(
    s: Structure,
    edge_symbol: str,
    f: Formula,
    blocks: Sequence[Sequence[str]],
    profile,
    budget: EvalBudget = DEFAULT_BUDGET,
    max_assignments: int = 2_000_000,
) -> Fraction | None:
    """Conditional Stone pairing of a formula with p blocks of free variables.

    ``profile`` carries ``internal`` (a set of 0-based block indices) and
    ``groups`` (disjoint index sets).  Internal blocks range over single
    vertices; every block in one group is bound to a common edge of
    ``edge_symbol``, with distinct groups bound to distinct edges.  Returns
    the exact conditional probability, or None when the conditioning event
    is empty.
    """
    p = len(blocks)
    internal = frozenset(profile.internal)
    groups = [frozenset(g) for g in profile.groups]
    covered = set(internal)
    for g in groups:
        covered |= g
    if covered != set(range(p)) or sum(len(g) for g in groups) + len(internal) != p:
        raise FormulaError("profile does not partition the block indices")
    arity = s.language.arity(edge_symbol)
    frees = free_variables(f)
    declared = [name for block in blocks for name in block]
    if len(set(declared)) != len(declared):
        raise FormulaError("block variable names must be distinct")
    if not set(frees) <= set(declared):
        raise FormulaError("every free variable of the formula must belong to a block")
    for i, block in enumerate(blocks):
        want = 1 if i in internal else arity
        if len(block) != want:
            raise FormulaError(f"block {i} has {len(block)} variables, profile requires {want}")
    validate_formula(f, s.language)

    edges = sorted(s.tuples(edge_symbol))
    m = len(edges)
    t = len(groups)
    n = s.n
    internal_list = sorted(internal)
    total_assignments = (n ** len(internal_list)) * math.perm(m, t) if m >= t else 0
    if total_assignments == 0:
        return None
    if total_assignments > max_assignments:
        raise BudgetExceededError("conditional pairing enumeration exceeds budget")

    hits = 0
    for chosen in itertools.permutations(edges, t):
        group_env: dict[str, int] = {}
        for g_idx, group in enumerate(groups):
            for i in group:
                for name, value in zip(blocks[i], chosen[g_idx]):
                    group_env[name] = value
        for assign in itertools.product(range(n), repeat=len(internal_list)):
            env = dict(group_env)
            for i, v in zip(internal_list, assign):
                env[blocks[i][0]] = v
            if evaluate(s, f, env, budget):
                hits += 1
    return Fraction(hits, total_assignments)


# ---------------------------------------------------------------------------
# Fast local statistics
#
# These are specialized evaluation routes for local formulas whose generic
# table evaluation would be too expensive at experiment scale.  Degrees are
# Gaifman degrees (distinct co-occurring vertices), which coincides with the
# usual FO degree formulas on loop-free symmetric graphs; the test suite
# cross-checks both routes on small instances.


def degree_eq_fraction(s: Structure, d: int) -> Fraction:
    """Fraction of vertices with Gaifman degree exactly d."""
    if s.n == 0:
        raise FormulaError("statistic undefined on the empty structure")
    hits = sum(1 for v in range(s.n) if len(s.adjacency[v]) == d)
    return Fraction(hits, s.n)


def neighbors_with_degree_fraction(s: Structure, d: int, count: int) -> Fraction:
    """Fraction of vertices with exactly `count` neighbours of degree d."""
    if s.n == 0:
        raise FormulaError("statistic undefined on the empty structure")
    adj = s.adjacency
    degs = [len(adj[v]) for v in range(s.n)]
    hits = 0
    for v in range(s.n):
        if sum(1 for u in adj[v] if degs[u] == d) == count:
            hits += 1
    return Fraction(hits, s.n)


def local_statistic_value(s: Structure, spec: Mapping) -> Fraction:
    """Dispatch a named statistic given as a {"kind": ..., ...} mapping."""
    kind = spec.get("kind")
    if kind == "degree_eq":
        return degree_eq_fraction(s, int(spec["d"]))
    if kind == "neighbors_of_degree_eq":
        return neighbors_with_degree_fraction(s, int(spec["d"]), int(spec["count"]))
    raise FormulaError(f"unknown statistic kind {kind!r}")
