"""Joint generator / storage dispatch."""
from .kkt import KKTReport, kkt_report
from .oracle import brute_force_dispatch, grid_slack
from .problem import (
    ConfigurationError,
    DispatchProblem,
    DispatchSolution,
    InfeasibleProblemError,
    SolverError,
    assemble_problem,
)
from .projection import feasible_project
from .solver import SOLVERS, solve_gcd, solve_gd, solve_sdad, storage_response


def kkt_residual(sol: DispatchSolution, prob: DispatchProblem) -> KKTReport:
    """Full optimality report for ``sol``; ``.residual`` is the max-norm summary."""
    from .solver import GCD_RIDGE

    if sol.strategy == "GD":
        return kkt_report(prob, sol.g, sol.u, sol.x, with_storage=False)
    if sol.strategy == "GCD":
        return kkt_report(prob, sol.g, sol.u, sol.x, cycling=False, ridge=GCD_RIDGE)
    return kkt_report(prob, sol.g, sol.u, sol.x)


__all__ = [
    "ConfigurationError", "DispatchProblem", "DispatchSolution", "InfeasibleProblemError", "KKTReport",
    "SOLVERS", "SolverError", "assemble_problem", "brute_force_dispatch", "feasible_project", "grid_slack",
    "kkt_residual", "solve_gcd", "solve_gd", "solve_sdad", "storage_response",
]
