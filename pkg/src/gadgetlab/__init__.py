"""gadgetlab: gadget construction on finite relational structures.

Library + CLI for building structures by edge replacement, deciding
k-elementary equivalence with Ehrenfeucht-Fraissé games, measuring Stone
pairings, and running structural-convergence experiments and theorem checks
at desk scale.
"""

from .relstruct import (
    Language,
    RootedStructure,
    Structure,
    StructureError,
    ball_of_roots,
    build_structure,
    disjoint_union,
    gaifman_distance,
    induced_substructure,
    r_neighborhood,
    relative_measure,
    shadow_to,
    symmetric_closure,
)
from .logic import (
    EvalBudget,
    Formula,
    FormulaError,
    evaluate,
    free_variables,
    parse_formula,
    quantifier_rank,
    stone_pairing_exact,
    stone_pairing_sampled,
)
from .efgames import (
    GamePosition,
    GameSolver,
    StrategyResponder,
    compose_strategy,
    copy_strategy,
    duplicator_wins,
    equivalence_rank,
    is_partial_isomorphism,
    rank_k_type_partition,
    rho_distance,
    solver_strategy,
)
from .gadget import (
    BaseStructure,
    ConstructedStructure,
    Gadget,
    SigmaEquivalence,
    estimate_eq_sigma,
    fragment,
    gad_sigma,
    gadget_construct,
    multi_gadget_construct,
    subdivide,
    undirected_gadget_construct,
)
from .sequences import SequenceSpec, check_extension_property, generate
from .convergence import (
    Profile,
    Trajectory,
    convergence_verdict,
    internal_proportion,
    multi_profile_of,
    profile_of,
    profile_probability_exact,
    profile_probability_formula,
    representation_at,
    representation_equivalent,
    sequence_diagnostics,
    trajectory_compute,
    verify_continuity_bound,
    verify_fragmentation_bound,
)
from .errors import BudgetExceededError

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
