"""The three dispatch strategies.

* ``SDAD``: generation cost plus cycling cost, co-optimized.
* ``GCD``: generation cost only; the cycling cost of the resulting schedule
  is reported afterwards as a hidden cost.
* ``GD``: no storage, the generator follows demand.
"""
from __future__ import annotations

import numpy as np

from ..degradation import cycling_cost_profile
from .core import Objective, minimize_profile
from .kkt import kkt_report
from .problem import DispatchProblem, DispatchSolution, InfeasibleProblemError

GCD_RIDGE = 1e-9


def _objective(prob: DispatchProblem, cycling: bool, ridge: float = 0.0) -> Objective:
    # a|u|^2 + b.u equals the generation cost up to the constant alpha|D|^2 + beta*sum(D)
    return Objective(
        a=prob.alpha_g + ridge,
        b=2.0 * prob.alpha_g * prob.D + prob.beta_g,
        E=prob.E,
        K=prob.degradation.cost_scale if cycling else 0.0,
        beta=prob.degradation.beta_b,
    )


def _bounds(prob: DispatchProblem, storage_only: bool = False):
    lb, ub = prob.node_bounds()
    lo, hi = prob.diff_bounds(storage_only)
    return lb, ub, lo, hi


def _start(prob: DispatchProblem, x0):
    if x0 is None:
        return np.full(prob.T + 1, prob.x_o)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (prob.T + 1,):
        raise ValueError(f"x0 must have length {prob.T + 1}")
    return x0


def _finish(prob, strategy, x, res, cycling: bool, ridge: float) -> DispatchSolution:
    u = prob.E * np.diff(x)
    g = prob.D + u
    gen = prob.generation_cost(g)
    cyc = cycling_cost_profile(np.clip(x, 0.0, 1.0), prob.degradation)
    rep = kkt_report(prob, g, u, x, cycling=cycling, ridge=ridge)
    return DispatchSolution(
        strategy=strategy, g=g, u=u, x=x, generation_cost=gen, cycling_cost=cyc, total_cost=gen + cyc,
        prices=_settle_prices(prob, g, rep), kkt_residual=rep.residual, iterations=res.iterations,
        converged=res.converged, history=tuple(res.history),
    )


def _settle_prices(prob, g, rep) -> np.ndarray:
    lam = rep.lam.copy()
    interior = np.setdiff1d(np.arange(prob.T), rep.gen_active)
    lam[interior] = 2.0 * prob.alpha_g * g[interior] + prob.beta_g
    return lam


def solve_sdad(prob: DispatchProblem, x0=None) -> DispatchSolution:
    if not prob.is_feasible():
        raise InfeasibleProblemError("no feasible storage schedule for this problem")
    res = minimize_profile(_objective(prob, True), _bounds(prob), _start(prob, x0))
    return _finish(prob, "SDAD", res.x, res, cycling=True, ridge=0.0)


def solve_gcd(prob: DispatchProblem, x0=None) -> DispatchSolution:
    """Generation-only optimum; ``cycling_cost`` holds the hidden cycling cost."""
    if not prob.is_feasible():
        raise InfeasibleProblemError("no feasible storage schedule for this problem")
    res = minimize_profile(_objective(prob, False, GCD_RIDGE), _bounds(prob), _start(prob, x0), tol=1e-10)
    return _finish(prob, "GCD", res.x, res, cycling=False, ridge=GCD_RIDGE)


def solve_gd(prob: DispatchProblem) -> DispatchSolution:
    D = prob.D
    bad = np.flatnonzero((D < prob.g_min) | (D > prob.g_max))
    if bad.size:
        t = int(bad[0])
        raise InfeasibleProblemError(f"demand {D[t]} at slot {t} outside generator limits [{prob.g_min}, {prob.g_max}]")
    u = np.zeros(prob.T)
    x = np.full(prob.T + 1, prob.x_o)
    g = D.copy()
    gen = prob.generation_cost(g)
    rep = kkt_report(prob, g, u, x, with_storage=False)
    return DispatchSolution(
        strategy="GD", g=g, u=u, x=x, generation_cost=gen, cycling_cost=0.0, total_cost=gen,
        prices=rep.lam, kkt_residual=rep.residual, iterations=0, converged=True,
    )


def storage_response(prob: DispatchProblem, prices, x0=None):
    """Profile maximizing ``-p.u - C_s(x)`` under the storage-only constraints."""
    p = np.asarray(prices, dtype=float)
    if p.shape != (prob.T,):
        raise ValueError(f"price vector must have length {prob.T}")
    if not prob.is_feasible(storage_only=True):
        raise InfeasibleProblemError("no feasible storage schedule")
    obj = Objective(a=0.0, b=p, E=prob.E, K=prob.degradation.cost_scale, beta=prob.degradation.beta_b)
    return minimize_profile(obj, _bounds(prob, storage_only=True), _start(prob, x0))


SOLVERS = {"SDAD": solve_sdad, "GCD": solve_gcd, "GD": solve_gd}
