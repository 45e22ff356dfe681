"""Solvers, oracles, and simulators for collective-upkeep mechanisms."""

from .first_best import (
    FirstBestSolution,
    fb_dual_value,
    fb_threshold_gap,
    solve_first_best,
)
from .model import (
    AgentType,
    DegenerateDistributionError,
    FeasibilityReport,
    Mechanism,
    PhysicalParams,
    TypeDistribution,
    agent_utility,
    balance_residual,
    check_feasible,
    valuation,
    welfare,
)
from .oracle import (
    GridSpec,
    TooManyTypesError,
    lp_screening_welfare,
    menu_grid_oracle,
    primal_grid_welfare,
)
from .participation import (
    NotOrderedError,
    OrderedTypesReport,
    ParticipationSolution,
    classify_interval,
    inner_max_Q,
    reduced_lagrangian,
    slater_gap,
    solve_participation,
)
from .screening import (
    MenuSolution,
    MenuTier,
    ScreeningSolution,
    bounded_monopoly_solve,
    ic_lagrangian,
    solve_screening,
    verify_structure,
)
from .sim import (
    Admissibility,
    MarkovPolicy,
    ReducedFormReport,
    SimStats,
    build_policy,
    check_reduced_form,
    simulate_fluid,
    simulate_poisson,
)

__all__ = [
    "AgentType",
    "Admissibility",
    "DegenerateDistributionError",
    "FeasibilityReport",
    "FirstBestSolution",
    "GridSpec",
    "MarkovPolicy",
    "Mechanism",
    "MenuSolution",
    "MenuTier",
    "NotOrderedError",
    "OrderedTypesReport",
    "ParticipationSolution",
    "PhysicalParams",
    "ReducedFormReport",
    "ScreeningSolution",
    "SimStats",
    "TooManyTypesError",
    "TypeDistribution",
    "agent_utility",
    "balance_residual",
    "build_policy",
    "check_feasible",
    "check_reduced_form",
    "classify_interval",
    "fb_dual_value",
    "fb_threshold_gap",
    "ic_lagrangian",
    "inner_max_Q",
    "lp_screening_welfare",
    "menu_grid_oracle",
    "bounded_monopoly_solve",
    "primal_grid_welfare",
    "reduced_lagrangian",
    "simulate_fluid",
    "simulate_poisson",
    "slater_gap",
    "solve_first_best",
    "solve_participation",
    "solve_screening",
    "valuation",
    "verify_structure",
    "welfare",
]
