"""Profiles, representation statistics, trajectories, and theorem checks.

Convergence of a sequence cannot be decided from a finite prefix; the
verdicts here are explicitly finite-horizon functions of the computed rows
(window 4, tolerance 0.02 by default).  Theorem checks classify every corpus
instance as pass, fail, or skip: instances whose premises cannot be
certified are skips, never counterexamples.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from . import logic
from .efgames import duplicator_wins
from .errors import BudgetExceededError
from .gadget import (
    BaseStructure,
    ConstructedStructure,
    Gadget,
    MultiConstructedStructure,
    SigmaEquivalence,
    as_rooted_structure,
    estimate_eq_sigma,
    fragment,
    gadget_construct,
)
from .logic import Formula, local_statistic_value, parse_formula, stone_pairing_exact, stone_pairing_sampled
from .relstruct import (
    RootedStructure,
    Structure,
    StructureError,
    ball_of_roots,
    gaifman_distance,
    r_neighborhood,
    relative_measure,
)
from .sequences import SequenceSpec, generate


# ---------------------------------------------------------------------------
# Profiles


@dataclass(frozen=True)
class Profile:
    """Ordered partition of 0-based tuple indices: internal set, copy groups.

    Indices in one group name external vertices sharing a gadget copy;
    groups are ordered by ascending minimum element.
    """

    internal: frozenset[int]
    groups: tuple[frozenset[int], ...]

    def __post_init__(self):
        seen = set(self.internal)
        for g in self.groups:
            if not g:
                raise StructureError("profile groups must be nonempty")
            if g & seen:
                raise StructureError("profile parts must be disjoint")
            seen |= g
        if seen != set(range(len(seen))):
            raise StructureError("profile must partition 0..p-1")
        object.__setattr__(self, "groups", tuple(sorted(self.groups, key=min)))

    @property
    def p(self) -> int:
        return len(self.internal) + sum(len(g) for g in self.groups)

    @staticmethod
    def of(internal, groups) -> "Profile":
        return Profile(frozenset(internal), tuple(frozenset(g) for g in groups))


@dataclass(frozen=True)
class MultiProfile:
    internal: frozenset[int]
    slots: tuple[tuple[frozenset[int], ...], ...]

    @property
    def p(self) -> int:
        return len(self.internal) + sum(len(g) for groups in self.slots for g in groups)


def profile_of(c: ConstructedStructure, tup: Sequence[int]) -> Profile:
    internal = set()
    by_edge: dict[int, set[int]] = {}
    for i, v in enumerate(tup):
        if c.is_internal(v):
            internal.add(i)
        else:
            by_edge.setdefault(c.external_map[v][0], set()).add(i)
    return Profile.of(internal, by_edge.values())


def multi_profile_of(mc: MultiConstructedStructure, tup: Sequence[int]) -> MultiProfile:
    internal = set()
    by_slot: list[dict[int, set[int]]] = [dict() for _ in mc.symbols]
    for i, v in enumerate(tup):
        if mc.is_internal(v):
            internal.add(i)
        else:
            slot, e_idx, _ = mc.provenance(v)
            by_slot[slot].setdefault(e_idx, set()).add(i)
    slots = tuple(
        tuple(sorted((frozenset(g) for g in groups.values()), key=min))
        for groups in by_slot
    )
    return MultiProfile(frozenset(internal), slots)


def internal_proportion(c: ConstructedStructure) -> Fraction:
    if c.result.n == 0:
        raise StructureError("empty result")
    return Fraction(c.internal_count, c.result.n)


def profile_probability_exact(
    c: ConstructedStructure, pi: Profile, tuple_budget: int = 2_000_000
) -> Fraction:
    """Fraction of all p-tuples of the result whose profile equals pi."""
    n = c.result.n
    p = pi.p
    if n == 0:
        raise StructureError("empty result")
    if n ** p > tuple_budget:
        raise BudgetExceededError(f"profile enumeration needs n^p = {n ** p} tuples")
    count = sum(1 for tup in itertools.product(range(n), repeat=p) if profile_of(c, tup) == pi)
    return Fraction(count, n ** p)


def profile_probability_formula(
    internal_prop: Fraction, edge_count: int, pi: Profile, copy_size_uniform: bool = True
) -> Fraction:
    """Closed-form profile probability.

    Exact (and equal to the enumerated value) when every gadget copy
    contributes the same number of external vertices, which plain
    single-gadget construction guarantees; `copy_size_uniform` records the
    caller's claim for mixed settings.
    """
    c = Fraction(internal_prop)
    if not 0 <= c <= 1:
        raise StructureError("internal proportion must lie in [0, 1]")
    p = pi.p
    t = len(pi.groups)
    ext = p - len(pi.internal)
    if edge_count < t and ext > 0:
        raise StructureError(f"profile needs {t} copies but only {edge_count} edges exist")
    falling = 1
    for i in range(t):
        falling *= edge_count - i
    value = c ** len(pi.internal) * (1 - c) ** ext * Fraction(falling)
    if ext:
        value /= Fraction(edge_count) ** ext
    return value


# ---------------------------------------------------------------------------
# Representation equivalence


@dataclass(frozen=True)
class Representation:
    profile: Profile
    base_side: RootedStructure
    gadget_sides: tuple[RootedStructure, ...]


def representation_at(c: ConstructedStructure, tup: Sequence[int], r: int) -> Representation:
    """Rooted r-balls of a tuple's base-side and gadget-side representations.

    The base side roots each internal vertex directly and each external
    vertex's whole replaced edge; each gadget side roots the copy images of
    one group, on the gadget with its own roots as constants.
    """
    pi = profile_of(c, tup)
    base_roots: list[int] = []
    for i, v in enumerate(tup):
        if i in pi.internal:
            base_roots.append(v)
        else:
            base_roots.extend(c.rho(v))
    base_side = ball_of_roots(RootedStructure(c.base.structure, tuple(base_roots)), r)
    rooted_gadget = as_rooted_structure(c.gadget)
    sides = []
    for group in pi.groups:
        picks = tuple(c.iota(tup[i]) for i in sorted(group))
        sides.append(ball_of_roots(RootedStructure(rooted_gadget, picks), r))
    return Representation(pi, base_side, tuple(sides))


@dataclass(frozen=True)
class RepresentationEquivalence:
    equivalent: bool
    depth: int
    reason: str


def representation_depth(c: ConstructedStructure, k: int, r: int, p: int) -> int:
    arity = len(c.gadget.roots)
    return arity ** (p + 1) * (r * c.base.structure.language.maxarity + k)


def representation_equivalent(
    c1: ConstructedStructure,
    t1: Sequence[int],
    c2: ConstructedStructure,
    t2: Sequence[int],
    k: int,
    r: int,
    product_budget: int = 20_000,
    node_budget: int = 5_000_000,
) -> RepresentationEquivalence:
    """Deep equivalence of two tuples through their representations.

    Tuples with different profiles are inequivalent outright; otherwise the
    base sides, the per-group gadget sides, and the root balls of the bare
    gadgets must all be equivalent at depth arity^(p+1) * (r*maxarity + k).
    """
    if len(t1) != len(t2):
        raise StructureError("tuples must have equal length")
    depth = representation_depth(c1, k, r, len(t1))
    rep1 = representation_at(c1, t1, r)
    rep2 = representation_at(c2, t2, r)
    if rep1.profile != rep2.profile:
        return RepresentationEquivalence(False, depth, "profiles differ")

    def equivalent(x: RootedStructure, y: RootedStructure) -> bool:
        return duplicator_wins(
            x.as_structure(), y.as_structure(), depth,
            product_budget=product_budget, node_budget=node_budget,
        )

    if not equivalent(rep1.base_side, rep2.base_side):
        return RepresentationEquivalence(False, depth, "base sides differ")
    for j, (g1, g2) in enumerate(zip(rep1.gadget_sides, rep2.gadget_sides)):
        if not equivalent(g1, g2):
            return RepresentationEquivalence(False, depth, f"gadget side {j} differs")
    ball1 = ball_of_roots(RootedStructure(as_rooted_structure(c1.gadget), ()), r)
    ball2 = ball_of_roots(RootedStructure(as_rooted_structure(c2.gadget), ()), r)
    if not equivalent(ball1, ball2):
        return RepresentationEquivalence(False, depth, "gadget root balls differ")
    return RepresentationEquivalence(True, depth, "all conditions hold")


# ---------------------------------------------------------------------------
# Trajectories


@dataclass(frozen=True)
class FormulaTask:
    formula_id: str
    text: str | None = None
    statistic: Mapping | None = None

    def __post_init__(self):
        if (self.text is None) == (self.statistic is None):
            raise StructureError("formula task needs exactly one of text/statistic")

    @staticmethod
    def from_dict(data: Mapping) -> "FormulaTask":
        allowed = {"id", "text", "statistic"}
        unknown = set(data) - allowed
        if unknown:
            raise StructureError(f"unknown formula task keys {sorted(unknown)}")
        return FormulaTask(data["id"], data.get("text"), data.get("statistic"))


@dataclass(frozen=True)
class TrajectoryRow:
    n: int
    formula_id: str
    value: Fraction | None
    exact: bool
    samples: int | None
    error: str | None = None


@dataclass(frozen=True)
class Trajectory:
    rows: tuple[TrajectoryRow, ...]

    def values(self, formula_id: str) -> list[TrajectoryRow]:
        return [row for row in self.rows if row.formula_id == formula_id]

    def formula_ids(self) -> list[str]:
        seen: list[str] = []
        for row in self.rows:
            if row.formula_id not in seen:
                seen.append(row.formula_id)
        return seen


@dataclass(frozen=True)
class SamplingMode:
    samples: int
    seed: int


def trajectory_compute(
    base_spec: SequenceSpec,
    gadget_spec: SequenceSpec | None,
    formulas: Sequence[FormulaTask],
    indices: Sequence[int],
    mode: SamplingMode | None = None,
    eval_budget: logic.EvalBudget = logic.DEFAULT_BUDGET,
) -> Trajectory:
    """Stone-pairing rows across a family; budget overruns mark rows, not drop them."""
    rows: list[TrajectoryRow] = []
    for n in indices:
        base = generate(base_spec, n)
        if gadget_spec is not None:
            if not isinstance(base, BaseStructure):
                raise StructureError("base spec must have role 'base' when a gadget is given")
            g = generate(gadget_spec, n)
            if not isinstance(g, Gadget):
                raise StructureError("gadget spec must have role 'gadget'")
            s = gadget_construct(base, g).result
        else:
            if not isinstance(base, Structure):
                raise StructureError("base spec must have role 'plain' without a gadget")
            s = base
        for task in formulas:
            try:
                if task.statistic is not None:
                    value = local_statistic_value(s, task.statistic)
                    rows.append(TrajectoryRow(n, task.formula_id, value, True, None))
                elif mode is None:
                    f = parse_formula(task.text, s.language)
                    value = stone_pairing_exact(s, f, eval_budget)
                    rows.append(TrajectoryRow(n, task.formula_id, value, True, None))
                else:
                    f = parse_formula(task.text, s.language)
                    estimate, _ = stone_pairing_sampled(
                        s, f, mode.samples, mode.seed, eval_budget
                    )
                    rows.append(
                        TrajectoryRow(n, task.formula_id, estimate, False, mode.samples)
                    )
            except BudgetExceededError:
                rows.append(TrajectoryRow(n, task.formula_id, None, False, None, "budget"))
    return Trajectory(tuple(rows))


@dataclass(frozen=True)
class FormulaVerdict:
    formula_id: str
    window: int
    max_oscillation: Fraction | None
    odd_mean: Fraction | None
    even_mean: Fraction | None
    verdict: str  # stable | fluctuating | inconclusive


@dataclass(frozen=True)
class ConvergenceReport:
    window: int
    tolerance: Fraction
    verdicts: tuple[FormulaVerdict, ...]

    def verdict_of(self, formula_id: str) -> str:
        for v in self.verdicts:
            if v.formula_id == formula_id:
                return v.verdict
        raise KeyError(formula_id)


def convergence_verdict(traj: Trajectory, window: int = 4, tol=Fraction(1, 50)) -> ConvergenceReport:
    """Finite-horizon verdict per formula.

    stable: max-min over the last `window` values <= tol.  fluctuating: the
    odd-index and even-index means within the window differ by more than
    2*tol.  Everything else (including windows touching budget-marked rows)
    is inconclusive.
    """
    tol = Fraction(str(tol)) if not isinstance(tol, Fraction) else tol
    verdicts = []
    for formula_id in traj.formula_ids():
        rows = traj.values(formula_id)
        ns = [row.n for row in rows]
        if ns != sorted(set(ns)):
            raise StructureError(f"indices for {formula_id!r} must be strictly increasing")
        if window > len(rows):
            raise StructureError(f"window {window} exceeds {len(rows)} rows for {formula_id!r}")
        tail = rows[-window:]
        if any(row.value is None for row in tail):
            verdicts.append(FormulaVerdict(formula_id, window, None, None, None, "inconclusive"))
            continue
        values = [row.value for row in tail]
        oscillation = max(values) - min(values)
        odd = [row.value for row in tail if row.n % 2 == 1]
        even = [row.value for row in tail if row.n % 2 == 0]
        odd_mean = sum(odd) / len(odd) if odd else None
        even_mean = sum(even) / len(even) if even else None
        if oscillation <= tol:
            verdict = "stable"
        elif odd_mean is not None and even_mean is not None and abs(odd_mean - even_mean) > 2 * tol:
            verdict = "fluctuating"
        else:
            verdict = "inconclusive"
        verdicts.append(
            FormulaVerdict(formula_id, window, oscillation, odd_mean, even_mean, verdict)
        )
    return ConvergenceReport(window, tol, tuple(verdicts))


# ---------------------------------------------------------------------------
# Sequence diagnostics (root-neighborhood mass, tips)


@dataclass(frozen=True)
class TipReport:
    indices: tuple[int, ...]
    class_members: tuple[int, ...]
    mass_by_radius: Mapping[int, tuple[Fraction, ...]]
    classification: str  # light | heavy


@dataclass(frozen=True)
class DiagnosticsReport:
    indices: tuple[int, ...]
    radii: tuple[int, ...]
    root_mass: Mapping[int, tuple[Fraction, ...]]
    sigma: SigmaEquivalence
    distance_trajectories: Mapping[tuple[int, int], tuple[float, ...]]
    tips: tuple[TipReport, ...]


def sequence_diagnostics(
    gadget_spec: SequenceSpec,
    indices: Sequence[int],
    radii: Sequence[int],
    threshold: float,
    mass_tol: Fraction = Fraction(3, 10),
) -> DiagnosticsReport:
    """Finite-horizon negligibility diagnostics for a gadget family.

    Reports the relative mass of r-neighborhoods of the root set per index,
    a distance-threshold estimate of the root partition, and per-class tip
    mass trends with a light/heavy classification (light iff the final mass
    at the largest radius is at most `mass_tol`).
    """
    gadgets = [generate(gadget_spec, n) for n in indices]
    if not all(isinstance(g, Gadget) for g in gadgets):
        raise StructureError("diagnostics requires a gadget-role spec")
    root_mass = {
        r: tuple(
            relative_measure(g.structure, r_neighborhood(g.structure, g.roots, r))
            for g in gadgets
        )
        for r in radii
    }
    estimate = estimate_eq_sigma(gadgets, threshold)
    tips = []
    for cls in estimate.sigma.classes:
        mass_by_radius = {
            r: tuple(
                relative_measure(
                    g.structure,
                    r_neighborhood(g.structure, [g.roots[i - 1] for i in sorted(cls)], r),
                )
                for g in gadgets
            )
            for r in radii
        }
        final = mass_by_radius[max(radii)][-1]
        tips.append(
            TipReport(
                tuple(indices),
                tuple(sorted(cls)),
                mass_by_radius,
                "light" if final <= mass_tol else "heavy",
            )
        )
    return DiagnosticsReport(
        tuple(indices), tuple(radii), root_mass, estimate.sigma,
        estimate.distance_trajectories, tuple(tips),
    )


# ---------------------------------------------------------------------------
# Theorem checks


@dataclass(frozen=True)
class ContinuityInstance:
    label: str
    base1: BaseStructure
    base2: BaseStructure
    gadget1: Gadget
    gadget2: Gadget


@dataclass(frozen=True)
class FragmentationInstance:
    label: str
    base1: BaseStructure
    base2: BaseStructure
    gadget1: Gadget
    gadget2: Gadget
    sigma: SigmaEquivalence


@dataclass(frozen=True)
class InstanceResult:
    label: str
    status: str  # pass | fail | skip
    reason: str


@dataclass(frozen=True)
class TheoremCheckReport:
    kind: str
    k: int
    results: tuple[InstanceResult, ...]

    @property
    def passes(self) -> int:
        return sum(1 for r in self.results if r.status == "pass")

    @property
    def fails(self) -> int:
        return sum(1 for r in self.results if r.status == "fail")

    @property
    def skips(self) -> int:
        return sum(1 for r in self.results if r.status == "skip")

    def certified_labels(self) -> list[str]:
        return [r.label for r in self.results if r.status in ("pass", "fail")]


def _ef(a: Structure, b: Structure, rounds: int, product_budget: int, node_budget: int) -> bool:
    return duplicator_wins(a, b, rounds, product_budget=product_budget, node_budget=node_budget)


def verify_continuity_bound(
    corpus: Sequence[ContinuityInstance],
    k: int,
    product_budget: int = 50_000,
    node_budget: int = 5_000_000,
) -> TheoremCheckReport:
    """Certify premises at depths (k*arity, k); certified conclusions must hold.

    Premise-failed instances are skips; any fail indicates a construction or
    solver bug, since the bound is a theorem.
    """
    results = []
    for inst in corpus:
        arity = inst.base1.arity
        try:
            if inst.base2.arity != arity:
                raise StructureError("edge arity mismatch in instance")
            if not _ef(inst.base1.structure, inst.base2.structure, k * arity,
                       product_budget, node_budget):
                results.append(InstanceResult(inst.label, "skip", "base premise failed"))
                continue
            if not _ef(as_rooted_structure(inst.gadget1), as_rooted_structure(inst.gadget2),
                       k, product_budget, node_budget):
                results.append(InstanceResult(inst.label, "skip", "gadget premise failed"))
                continue
            r1 = gadget_construct(inst.base1, inst.gadget1).result
            r2 = gadget_construct(inst.base2, inst.gadget2).result
            conclusion = _ef(r1, r2, k, product_budget, node_budget)
        except BudgetExceededError as exc:
            results.append(InstanceResult(inst.label, "skip", f"budget: {exc}"))
            continue
        if conclusion:
            results.append(InstanceResult(inst.label, "pass", "premises certified, conclusion holds"))
        else:
            results.append(InstanceResult(inst.label, "fail", "premises certified, conclusion FAILED"))
    return TheoremCheckReport("continuity", k, tuple(results))


def verify_fragmentation_bound(
    corpus: Sequence[FragmentationInstance],
    k: int = 1,
    product_budget: int = 50_000,
    node_budget: int = 5_000_000,
) -> TheoremCheckReport:
    """Three premises: fragmented bases at depth (m+1)k, gadgets at depth
    2^(k+1)*maxarity, and the root-distance/partition compatibility of the
    first gadget.  Certified conclusions must hold at depth k."""
    results = []
    for inst in corpus:
        try:
            m = inst.sigma.max_class_size
            frag1 = fragment(inst.base1, inst.sigma).result
            frag2 = fragment(inst.base2, inst.sigma).result
            if not _ef(frag1, frag2, (m + 1) * k, product_budget, node_budget):
                results.append(InstanceResult(inst.label, "skip", "fragmented base premise failed"))
                continue
            g1 = as_rooted_structure(inst.gadget1)
            g2 = as_rooted_structure(inst.gadget2)
            from .relstruct import merge_languages

            shared = merge_languages(
                inst.base1.structure.language.without_relation(inst.base1.edge_symbol),
                inst.gadget1.structure.language,
            )
            depth = (2 ** (k + 1)) * shared.maxarity
            if not _ef(g1, g2, depth, product_budget, node_budget):
                results.append(InstanceResult(inst.label, "skip", "gadget premise failed"))
                continue
            class_of = {}
            for idx, cls in enumerate(inst.sigma.classes):
                for i in cls:
                    class_of[i] = idx
            ok = True
            roots = inst.gadget1.roots
            for i, j in itertools.combinations(range(1, len(roots) + 1), 2):
                dist = gaifman_distance(inst.gadget1.structure, roots[i - 1], roots[j - 1])
                if dist <= 2 ** (k + 1) and class_of[i] != class_of[j]:
                    ok = False
                    break
            if not ok:
                results.append(InstanceResult(inst.label, "skip", "root distance premise failed"))
                continue
            r1 = gadget_construct(inst.base1, inst.gadget1).result
            r2 = gadget_construct(inst.base2, inst.gadget2).result
            conclusion = _ef(r1, r2, k, product_budget, node_budget)
        except BudgetExceededError as exc:
            results.append(InstanceResult(inst.label, "skip", f"budget: {exc}"))
            continue
        if conclusion:
            results.append(InstanceResult(inst.label, "pass", "premises certified, conclusion holds"))
        else:
            results.append(InstanceResult(inst.label, "fail", "premises certified, conclusion FAILED"))
    return TheoremCheckReport("fragmentation", k, tuple(results))


# ---------------------------------------------------------------------------
# Conditional pairings over profiles and the profile-restricted lift


def conditional_stone_pairing(
    base: BaseStructure,
    f: Formula,
    blocks: Sequence[Sequence[str]],
    pi: Profile,
    **kwargs,
) -> Fraction | None:
    """Exact conditional pairing of a p-block formula over a base structure."""
    return logic.conditional_stone_pairing(
        base.structure, base.edge_symbol, f, blocks, pi, **kwargs
    )


def _fresh_names(taken: set[str], prefix: str, count: int) -> list[str]:
    names = []
    i = 0
    while len(names) < count:
        name = f"{prefix}{i}"
        if name not in taken:
            taken.add(name)
            names.append(name)
        i += 1
    return names


def _rename_free(f: Formula, mapping: Mapping[str, str]) -> Formula:
    from .logic import And, Atom, Const, Equal, Exists, Forall, Not, Or, Var

    def sub(t):
        if isinstance(t, Var) and t.name in mapping:
            return Var(mapping[t.name])
        return t

    def walk(node):
        if isinstance(node, Atom):
            return Atom(node.relation, tuple(sub(t) for t in node.terms))
        if isinstance(node, Equal):
            return Equal(sub(node.left), sub(node.right))
        if isinstance(node, Not):
            return Not(walk(node.body))
        if isinstance(node, And):
            return And(tuple(walk(p) for p in node.parts))
        if isinstance(node, Or):
            return Or(tuple(walk(p) for p in node.parts))
        if isinstance(node, (Exists, Forall)):
            # bound names are normalized apart from the free names we touch
            body = walk(node.body)
            return Exists(node.var, body) if isinstance(node, Exists) else Forall(node.var, body)
        raise StructureError(f"unknown node {node!r}")

    return walk(f)


def _relativize_to(f: Formula, guard: str) -> Formula:
    from .logic import And, Atom, Equal, Exists, Forall, Not, Or, Var

    def walk(node):
        if isinstance(node, (Atom, Equal)):
            return node
        if isinstance(node, Not):
            return Not(walk(node.body))
        if isinstance(node, And):
            return And(tuple(walk(p) for p in node.parts))
        if isinstance(node, Or):
            return Or(tuple(walk(p) for p in node.parts))
        if isinstance(node, Exists):
            return Exists(node.var, And((Atom(guard, (Var(node.var),)), walk(node.body))))
        if isinstance(node, Forall):
            return Forall(node.var, Or((Not(Atom(guard, (Var(node.var),))), walk(node.body))))
        raise StructureError(f"unknown node {node!r}")

    return walk(f)


def build_profile_restricted_lift(
    phi: Formula,
    blocks: Sequence[Sequence[str]],
    pi: Profile,
    arity: int,
    edge_symbol: str = "R",
) -> Formula:
    """Lift a p-block formula over the base into one over the lifted result.

    The produced formula holds on a p-tuple of the lifted construction
    exactly when the tuple's profile matches ``pi`` and the tuple's
    representation in the base satisfies ``phi``: internal membership and
    copy grouping are checked through Int/Ext/rho, each group's shared edge
    is recovered from rho, and ``phi`` is evaluated with quantifiers
    relativized to Int.
    """
    from .logic import And, Atom, Exists, Not, Var, free_variables, normalize_bound_variables

    from .gadget import LIFT_EXTERNAL, LIFT_INTERNAL, LIFT_RHO

    p = pi.p
    if len(blocks) != p:
        raise StructureError("block count must match the profile size")
    taken = set(logic._all_names(phi))
    xs = _fresh_names(taken, "t", p)

    def same_copy(x: str, y: str) -> Formula:
        us = _fresh_names(taken, "u", arity)
        body = And(
            (
                Atom(LIFT_RHO, (Var(x),) + tuple(Var(u) for u in us)),
                Atom(LIFT_RHO, (Var(y),) + tuple(Var(u) for u in us)),
            )
        )
        for u in reversed(us):
            body = Exists(u, body)
        return body

    parts: list[Formula] = []
    for i in range(p):
        marker = LIFT_INTERNAL if i in pi.internal else LIFT_EXTERNAL
        parts.append(Atom(marker, (Var(xs[i]),)))
    for group in pi.groups:
        members = sorted(group)
        for a, b in zip(members, members[1:]):
            parts.append(same_copy(xs[a], xs[b]))
    reps = [min(group) for group in pi.groups]
    for a, b in itertools.combinations(reps, 2):
        parts.append(Not(same_copy(xs[a], xs[b])))

    mapping: dict[str, str] = {}
    edge_vars: list[list[str]] = []
    for j, group in enumerate(pi.groups):
        es = _fresh_names(taken, f"e{j}_", arity)
        edge_vars.append(es)
        for i in group:
            for name, e in zip(blocks[i], es):
                mapping[name] = e
    for i in sorted(pi.internal):
        (name,) = tuple(blocks[i])
        mapping[name] = xs[i]

    inner: Formula = _relativize_to(_rename_free(phi, mapping), LIFT_INTERNAL)
    for j in reversed(range(len(pi.groups))):
        es = edge_vars[j]
        rep = min(pi.groups[j])
        inner = And((Atom(LIFT_RHO, (Var(xs[rep]),) + tuple(Var(e) for e in es)), inner))
        for e in reversed(es):
            inner = Exists(e, inner)
    parts.append(inner)
    psi = And(tuple(parts)) if len(parts) > 1 else parts[0]
    psi = normalize_bound_variables(psi)
    got = free_variables(psi)
    if sorted(got) != sorted(xs):
        raise StructureError(f"lift produced free variables {got}, expected {xs}")
    return psi


@dataclass(frozen=True)
class InverseCheckResult:
    lifted_value: Fraction
    conditional: Fraction | None
    profile_probability: Fraction
    holds: bool


def verify_inverse_identity(
    base: BaseStructure,
    gadget: Gadget,
    phi: Formula,
    blocks: Sequence[Sequence[str]],
    pi: Profile,
    eval_budget: logic.EvalBudget = logic.DEFAULT_BUDGET,
) -> InverseCheckResult:
    """Exact identity: lifted pairing = conditional pairing * profile probability.

    Requires that no gadget edge spans only roots, so the Int-induced part of
    the lifted result is the base itself.
    """
    rootset = set(gadget.roots)
    for tuples in gadget.structure.relations.values():
        for tup in tuples:
            if tup and all(v in rootset for v in tup):
                raise StructureError("gadget edge spans only roots; lift identity needs none")
    c = gadget_construct(base, gadget, lifted=True)
    psi = build_profile_restricted_lift(phi, blocks, pi, base.arity, base.edge_symbol)
    lifted_value = stone_pairing_exact(c.result, psi, eval_budget)
    conditional = conditional_stone_pairing(base, phi, blocks, pi, budget=eval_budget)
    prob = profile_probability_exact(c, pi)
    expected = (conditional if conditional is not None else Fraction(0)) * prob
    return InverseCheckResult(lifted_value, conditional, prob, lifted_value == expected)
