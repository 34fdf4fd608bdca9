"""Optimality residual of a dispatch solution and multiplier estimates.

The multipliers solve a bounded least-squares system built from

* generator stationarity  ``2 a g + b - lam + gam_hi - gam_lo = 0``
* storage power           ``lam - theta / E + nu_hi - nu_lo (+ 2 eps u) = 0``
* SoC stationarity        ``sum_k w_k grad_k + A.T theta + mu_hi - mu_lo + om_0 e_0 + om_T e_T = 0``

where ``grad_k`` are the cycling-cost gradients of the counting patterns
adjacent to ``x`` (so ``sum w_k grad_k`` ranges over the local
subdifferential), ``w >= 0`` with ``sum w = 1``, and only active inequality
constraints carry a multiplier. Each block is divided by its natural scale
(the largest marginal generation cost ``P``, and ``E * P`` for the SoC
block), so the reported residual is relative.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import lsq_linear

from .patterns import adjacent_patterns, random_patterns, surrogate_grad
from .problem import DispatchProblem

ACTIVE_RTOL = 1e-6
SOC_ACTIVE_TOL = 1e-9
PROBE_BATCH = 400
PROBE_BUDGET = 4000
ENOUGH = 1e-9


@dataclass
class KKTReport:
    residual: float
    stationarity_gen: float
    stationarity_ctrl: float
    stationarity_soc: float
    complementarity: float
    primal: float
    lam: np.ndarray
    theta: np.ndarray | None = None
    multipliers: dict = field(default_factory=dict)
    pattern_weights: np.ndarray | None = None
    gen_active: np.ndarray | None = None
    storage_active: np.ndarray | None = None


def _primal_violation(prob: DispatchProblem, g, u, x, with_storage: bool) -> float:
    gs = max(1.0, float(np.max(np.abs(prob.D))))
    v = [np.max(np.abs(g - prob.D - u)) / gs,
         max(0.0, prob.g_min - g.min()) / gs,
         max(0.0, g.max() - prob.g_max) / gs]
    if with_storage:
        v += [max(0.0, -x.min()), max(0.0, x.max() - 1.0),
              abs(x[0] - prob.x_o), abs(x[-1] - prob.x_o),
              np.max(np.abs(np.diff(x) - u / prob.E)),
              max(0.0, prob.u_min - u.min()) / prob.E,
              max(0.0, u.max() - prob.u_max) / prob.E]
    return float(max(v))


def kkt_report(prob: DispatchProblem, g, u, x, *, cycling: bool = True, ridge: float = 0.0,
               with_storage: bool = True) -> KKTReport:
    g = np.asarray(g, dtype=float)
    u = np.asarray(u, dtype=float)
    x = np.asarray(x, dtype=float)
    T, E = prob.T, prob.E
    marg = 2.0 * prob.alpha_g * g + prob.beta_g
    P = max(1.0, float(np.max(np.abs(marg))))
    gtol = ACTIVE_RTOL * max(1.0, abs(prob.g_max), abs(prob.g_min))
    g_hi = np.flatnonzero(g >= prob.g_max - gtol)
    g_lo = np.flatnonzero(g <= prob.g_min + gtol)
    primal = _primal_violation(prob, g, u, x, with_storage)

    if not with_storage:
        lam = marg.copy()
        return KKTReport(residual=primal, stationarity_gen=0.0, stationarity_ctrl=0.0, stationarity_soc=0.0,
                         complementarity=0.0, primal=primal, lam=lam,
                         gen_active=np.union1d(g_hi, g_lo))

    utol = ACTIVE_RTOL * max(1.0, abs(prob.u_max), abs(prob.u_min))
    u_hi = np.flatnonzero(u >= prob.u_max - utol)
    u_lo = np.flatnonzero(u <= prob.u_min + utol)
    inner = np.arange(1, T)
    x_hi = inner[x[1:T] >= 1.0 - SOC_ACTIVE_TOL]
    x_lo = inner[x[1:T] <= SOC_ACTIVE_TOL]

    K = prob.degradation.cost_scale if cycling else 0.0
    beta = prob.degradation.beta_b
    active = (g_hi, g_lo, u_hi, u_lo, x_hi, x_lo)
    if K <= 0:
        return _assemble(prob, g, u, x, marg, P, primal, active, [], ridge)
    free = np.zeros(T + 1, dtype=bool)
    free[1:T] = True
    grads: dict = {}

    def collect(patterns):
        for e in patterns:
            gk = surrogate_grad(e, x, K, beta)
            grads.setdefault(np.round(gk / (E * P), 12).tobytes(), gk)

    collect(adjacent_patterns(x, free))
    rep = _assemble(prob, g, u, x, marg, P, primal, active, list(grads.values()), ridge)
    seed = 0
    while rep.residual > ENOUGH and seed * PROBE_BATCH < PROBE_BUDGET:
        n_before = len(grads)
        collect(random_patterns(x, free, PROBE_BATCH, seed=seed))
        seed += 1
        if len(grads) > n_before:
            rep = _assemble(prob, g, u, x, marg, P, primal, active, list(grads.values()), ridge)
    return rep


def _assemble(prob, g, u, x, marg, P, primal, active, grads, ridge) -> KKTReport:
    T, E = prob.T, prob.E
    g_hi, g_lo, u_hi, u_lo, x_hi, x_lo = active
    nw = len(grads)

    # column layout
    blocks = [("lam", T), ("theta", T), ("om", 2), ("w", nw), ("gam_hi", g_hi.size), ("gam_lo", g_lo.size),
              ("nu_hi", u_hi.size), ("nu_lo", u_lo.size), ("mu_hi", x_hi.size), ("mu_lo", x_lo.size)]
    off = {}
    n = 0
    for name, size in blocks:
        off[name] = slice(n, n + size)
        n += size
    rows_gen = slice(0, T)
    rows_ctrl = slice(T, 2 * T)
    rows_soc = slice(2 * T, 3 * T + 1)
    m = 3 * T + 1 + (1 if nw else 0)
    M = np.zeros((m, n))
    rhs = np.zeros(m)
    tt = np.arange(T)

    # generator block, scaled by P
    M[tt, off["lam"].start + tt] = -1.0
    M[g_hi, off["gam_hi"].start + np.arange(g_hi.size)] = 1.0
    M[g_lo, off["gam_lo"].start + np.arange(g_lo.size)] = -1.0
    rhs[rows_gen] = -marg
    # storage power block
    r0 = T
    M[r0 + tt, off["lam"].start + tt] = 1.0
    M[r0 + tt, off["theta"].start + tt] = -1.0 / E
    M[r0 + u_hi, off["nu_hi"].start + np.arange(u_hi.size)] = 1.0
    M[r0 + u_lo, off["nu_lo"].start + np.arange(u_lo.size)] = -1.0
    rhs[rows_ctrl] = -2.0 * ridge * u
    M[: 2 * T] /= P
    rhs[: 2 * T] /= P
    # SoC block, scaled by E * P; (A.T theta)[s] = theta[s-1] - theta[s]
    r0 = 2 * T
    M[r0 + tt + 1, off["theta"].start + tt] += 1.0
    M[r0 + tt, off["theta"].start + tt] -= 1.0
    M[r0 + 0, off["om"].start] = 1.0
    M[r0 + T, off["om"].start + 1] = 1.0
    for k, gk in enumerate(grads):
        M[r0: r0 + T + 1, off["w"].start + k] = gk
    M[r0 + x_hi, off["mu_hi"].start + np.arange(x_hi.size)] = 1.0
    M[r0 + x_lo, off["mu_lo"].start + np.arange(x_lo.size)] = -1.0
    M[rows_soc] /= E * P
    if nw:
        M[-1, off["w"]] = 1.0
        rhs[-1] = 1.0

    lower = np.full(n, -np.inf)
    for name in ("w", "gam_hi", "gam_lo", "nu_hi", "nu_lo", "mu_hi", "mu_lo"):
        lower[off[name]] = 0.0
    # rescale theta / omega columns so all unknowns are O(P)
    col_scale = np.ones(n)
    col_scale[off["theta"]] = E
    col_scale[off["om"]] = E
    col_scale[off["mu_hi"]] = E
    col_scale[off["mu_lo"]] = E
    col_scale[off["w"]] = 1.0
    Ms = M * col_scale
    lo_s = lower / col_scale
    sol = lsq_linear(Ms, rhs, bounds=(lo_s, np.full(n, np.inf)), method="bvls", tol=1e-14, lsmr_tol=None)
    z = sol.x * col_scale
    r = M @ z - rhs

    def part(name):
        return z[off[name]]

    gs = max(1.0, float(np.max(np.abs(prob.D))))
    comp = [0.0]
    comp += list(part("gam_hi") / P * np.abs(g[g_hi] - prob.g_max) / gs)
    comp += list(part("gam_lo") / P * np.abs(g[g_lo] - prob.g_min) / gs)
    comp += list(part("nu_hi") / P * np.abs(u[u_hi] - prob.u_max) / gs)
    comp += list(part("nu_lo") / P * np.abs(u[u_lo] - prob.u_min) / gs)
    comp += list(part("mu_hi") / (E * P) * np.abs(x[x_hi] - 1.0))
    comp += list(part("mu_lo") / (E * P) * np.abs(x[x_lo]))
    comp_max = float(np.max(np.abs(comp)))
    st_gen = float(np.max(np.abs(r[rows_gen])))
    st_ctrl = float(np.max(np.abs(r[rows_ctrl])))
    st_soc = float(np.max(np.abs(r[rows_soc])))
    if nw:
        st_soc = max(st_soc, abs(float(r[-1])))
    residual = max(st_gen, st_ctrl, st_soc, comp_max, primal)

    storage_active = np.union1d(u_hi, u_lo)
    return KKTReport(
        residual=residual, stationarity_gen=st_gen, stationarity_ctrl=st_ctrl, stationarity_soc=st_soc,
        complementarity=comp_max, primal=primal, lam=part("lam").copy(), theta=part("theta").copy(),
        multipliers={name: part(name).copy() for name in
                     ("om", "gam_hi", "gam_lo", "nu_hi", "nu_lo", "mu_hi", "mu_lo")}
        | {"gen_hi_slots": g_hi, "gen_lo_slots": g_lo, "u_hi_slots": u_hi, "u_lo_slots": u_lo},
        pattern_weights=part("w").copy(), gen_active=np.union1d(g_hi, g_lo), storage_active=storage_active,
    )
