"""Robust UAV trajectory and computation-offloading planner."""

from ._core import (
    DimensionError,
    InfeasibleScenarioError,
    ParseError,
    Plan,
    PlanResult,
    Scenario,
    SolverError,
    TraceRow,
    ValidationError,
    ValidationReport,
    bernstein_margin,
    check_plan,
    check_plan_robust,
    effective_max_distance,
    histogram,
    init_plan,
    plan,
    run_cli,
    sample_jitter,
    total_energy,
    validate_plan,
    within_budget,
)

MODES = ("joint", "all-local", "all-offload", "non-robust")

__all__ = [
    "DimensionError",
    "InfeasibleScenarioError",
    "MODES",
    "ParseError",
    "Plan",
    "PlanResult",
    "Scenario",
    "SolverError",
    "TraceRow",
    "ValidationError",
    "ValidationReport",
    "bernstein_margin",
    "check_plan",
    "check_plan_robust",
    "effective_max_distance",
    "histogram",
    "init_plan",
    "plan",
    "run_cli",
    "sample_jitter",
    "total_energy",
    "validate_plan",
    "within_budget",
]
