"""Exhaustive grid search over storage schedules, for small horizons only."""
from __future__ import annotations

import numpy as np

from .. import kernels
from ..degradation import cycling_cost_profile
from .problem import DispatchProblem, DispatchSolution, InfeasibleProblemError

MAX_T = 4
MAX_POINTS = 2e8


def brute_force_dispatch(prob: DispatchProblem, grid_step: float) -> DispatchSolution:
    """Best schedule with every ``u_t`` on the grid ``k * grid_step`` (``u_T`` closes the cycle)."""
    if not grid_step > 0:
        raise ValueError(f"grid_step must be positive, got {grid_step}")
    T = prob.T
    if T > MAX_T:
        raise ValueError(f"grid search is limited to T <= {MAX_T}, got T={T}")
    k_lo = int(np.ceil(prob.u_min / grid_step - 1e-9))
    k_hi = int(np.floor(prob.u_max / grid_step + 1e-9))
    grid = np.arange(k_lo, k_hi + 1) * grid_step
    if float(grid.size) ** max(T - 1, 1) > MAX_POINTS:
        raise ValueError(f"grid of {grid.size}^{T - 1} points is too large; use a coarser step")
    deg = prob.degradation
    best, u = kernels.grid_search(
        grid, T, prob.D, prob.alpha_g, prob.beta_g, prob.g_min, prob.g_max, prob.u_min, prob.u_max,
        prob.E, prob.x_o, deg.cost_scale, deg.beta_b,
    )
    if not np.isfinite(best):
        raise InfeasibleProblemError("no grid point is feasible")
    x = np.clip(np.r_[prob.x_o, prob.x_o + np.cumsum(u) / prob.E], 0.0, 1.0)
    x[-1] = prob.x_o
    g = prob.D + u
    gen = prob.generation_cost(g)
    cyc = cycling_cost_profile(x, deg)
    return DispatchSolution(strategy="GRID", g=g, u=u, x=x, generation_cost=gen, cycling_cost=cyc,
                            total_cost=gen + cyc, converged=True)


def grid_slack(prob: DispatchProblem, grid_step: float) -> float:
    """Upper bound on how far the grid optimum can sit above the true optimum.

    Rounding the optimal schedule to the grid moves the free powers by at most
    ``h/2`` each and the closing power by at most ``(T-1) h/2``; the bound is
    the resulting first-order change with a Lipschitz constant of the
    objective in ``u`` plus the quadratic term.
    """
    T = prob.T
    h = grid_step
    g_hi = float(np.max(prob.D)) + max(abs(prob.u_min), prob.u_max)
    lip_gen = 2.0 * prob.alpha_g * g_hi + abs(prob.beta_g)
    deg = prob.degradation
    lip_cyc = deg.cost_scale * deg.beta_b * 2.0 * T / prob.E
    du1 = (T - 1) * h
    return (lip_gen + lip_cyc) * du1 + prob.alpha_g * T * ((T - 1) * h) ** 2
