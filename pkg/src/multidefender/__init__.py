"""Multidefender security games: models, solvers and experiment tooling."""

from .game import (
    AttackDistribution,
    CoverageProfile,
    EquilibriumReport,
    InterdependentGame,
    WelfareSignError,
    ase_attack,
    attacker_value,
    attacker_values,
    defender_utilities,
    epsilon_poa,
    evaluate_profile,
    game_from_dict,
    game_to_dict,
    load_game,
    regret,
    save_game,
    social_welfare,
    validate_profile,
)
from .games import IndependentParams, encode_independent, random_independent_game, standoff_game
from .analytic import (
    AnalyticResult,
    baseline_solve,
    general_solve,
    multitarget_solve,
    symmetric_regret_curve,
    symmetric_regret_oracle,
)
from .search import (
    SearchConfig,
    SearchResourceError,
    SearchTrace,
    corner_profile,
    iterated_best_response,
    random_search,
    ribr,
    run_search,
    sample_profile,
    simulated_annealing,
)
from .cascade import (
    CascadeSizeError,
    CompromiseProfile,
    DependencyGraph,
    cascade_exact,
    cascade_mc,
    compromise_profile,
    derive_utilities,
    format_edges,
    load_edges,
    parse_edges,
    save_edges,
)
from .netgen import (
    Partition,
    Topology,
    closeness,
    cut_size,
    erdos_renyi,
    grid,
    load_partition,
    load_topology,
    partition,
    preferential_attachment,
    save_partition,
    save_topology,
)
from .experiment import (
    ExperimentConfig,
    ExperimentRow,
    centrality_report,
    desk_config,
    full_config,
    results_csv,
    run_experiment,
    write_centrality,
    write_results,
)

__all__ = [name for name in dir() if not name.startswith("_")]
