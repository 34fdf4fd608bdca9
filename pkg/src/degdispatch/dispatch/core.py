"""Minimization of ``a*|u|^2 + b.u + K*sum(d**beta)`` over feasible SoC profiles.

Here ``u = E * diff(x)`` and ``d`` are the rainflow depths of ``x``. The same
routine serves the dispatch strategies (``a > 0``) and the storage price
response (``a = 0``).

Two stages:

1. Fixed-pattern majorization: freeze the counting pattern at the current
   iterate, minimize the hinged surrogate with accelerated projected
   gradient, recount. Steps that do not lower the true objective are
   shortened along the segment, so the recorded objective never increases.
2. Trust-region refinement: the cycling cost is modelled by the maximum of
   the surrogates of all patterns adjacent to the iterate, the epigraph
   subproblem is solved with SLSQP inside an infinity-norm box, and steps
   are accepted on the ratio of actual to predicted decrease. This removes
   the stalls of stage 1 at profiles where the pattern flips back and forth.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .. import kernels
from .patterns import PieceSet, adjacent_patterns
from .problem import SolverError
from .projection import project

INNER_TOL = 1e-8
INNER_MAX_ITER = 100_000
OUTER_MAX_ITER = 1000
REL_DECREASE = 1e-8
TR_MAX_ITER = 300
TR_PRED_RTOL = 1e-13
TR_MEMORY = 30
TR_STALL_RTOL = 1e-9
TR_MIN_RADIUS = 1e-10


@dataclass(frozen=True)
class Objective:
    a: float
    b: np.ndarray
    E: float
    K: float
    beta: float

    def smooth(self, x) -> float:
        u = self.E * np.diff(x)
        return float(self.a * u @ u + self.b @ u)

    def smooth_grad(self, x) -> np.ndarray:
        u = self.E * np.diff(x)
        gu = self.E * (2.0 * self.a * u + self.b)
        out = np.zeros_like(x)
        out[1:] += gu
        out[:-1] -= gu
        return out

    def cycling(self, x) -> float:
        if self.K == 0.0:
            return 0.0
        return self.K * float(kernels.cycle_power_sum(np.ascontiguousarray(x), self.beta))

    def __call__(self, x) -> float:
        return self.smooth(x) + self.cycling(x)


@dataclass
class MinimizeResult:
    x: np.ndarray
    value: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)


def _fixed_pattern_stage(obj: Objective, x, bounds, tol, hist):
    lb, ub, lo, hi = bounds
    fx = obj(x)
    hist.append(fx)
    prev_pattern = None
    it = 0
    for it in range(1, OUTER_MAX_ITER + 1):
        edges = kernels.rainflow_kernel(x)[1]
        key = edges.tobytes()
        xn, _, _ = kernels.apg(
            x, obj.a, obj.b, obj.E, obj.K, obj.beta, edges, lb, ub, lo, hi,
            tol, INNER_MAX_ITER,
        )
        xn = np.clip(xn, lb, ub)
        fn = obj(xn)
        tau = 1.0
        while fn > fx and tau > 1e-6:
            tau *= 0.5
            xt = x + tau * (xn - x)
            fn = obj(xt)
            if fn <= fx:
                xn = xt
        if fn > fx:
            break
        decrease = fx - fn
        x, fx = xn, fn
        hist.append(fx)
        if key == prev_pattern and decrease <= REL_DECREASE * max(1.0, abs(fx)):
            break
        if decrease <= REL_DECREASE * max(1.0, abs(fx)) * 1e-3:
            break
        prev_pattern = key
    return x, it


def _trust_region_stage(obj: Objective, x, bounds, hist):
    lb, ub, lo, hi = bounds
    free = lb < ub
    fidx = np.flatnonzero(free)
    nf = fidx.size
    T = x.size - 1
    if nf == 0:
        return x, 0, True
    # diff(x) = Af @ x[free] + c
    A = np.zeros((T, T + 1))
    A[np.arange(T), np.arange(T)] = -1.0
    A[np.arange(T), np.arange(1, T + 1)] = 1.0
    Af = A[:, fidx]

    fx = obj(x)
    scale = max(1.0, abs(fx))
    radius = 0.1
    converged = False
    # working set of patterns: key -> [edges, iteration last active]
    work: dict = {}

    def remember(edges, it):
        key = edges.tobytes() + bytes([len(edges) % 256])
        if key in work:
            work[key][1] = it
        else:
            work[key] = [edges, it]

    it = 0
    for it in range(1, TR_MAX_ITER + 1):
        if obj.K > 0:
            for e in adjacent_patterns(x, free):
                remember(e, it)
        for key in [k for k, (_, last) in work.items() if it - last > TR_MEMORY]:
            del work[key]
        pats = [e for e, _ in work.values()]
        xn, pieces = _tr_step(obj, x, bounds, fidx, Af, pats, radius, scale)
        if xn is None:
            radius *= 0.25
            if radius < TR_MIN_RADIUS:
                break
            continue
        model = obj.smooth(xn) + max(pieces + [0.0])
        pred = fx - model
        if pred <= TR_PRED_RTOL * scale:
            # no predicted progress at this radius; a smaller region gives
            # the quasi-Newton subproblem a better-conditioned view of kinks
            if radius <= TR_MIN_RADIUS:
                converged = True
                break
            radius = max(TR_MIN_RADIUS, 0.01 * radius)
            continue
        for (key, entry), v in zip(list(work.items()), pieces):
            if v >= max(pieces) - 1e-9 * scale:
                entry[1] = it
        fn = obj(xn)
        if obj.K > 0:
            remember(kernels.rainflow_kernel(xn)[1], it)
        rho = (fx - fn) / pred
        if rho > 0.1 and fn < fx:
            x, fx = xn, fn
            hist.append(fx)
        if rho > 0.75:
            radius = min(1.0, 2.0 * radius)
        elif rho < 0.25:
            radius *= 0.25
        if radius < TR_MIN_RADIUS:
            converged = pred <= TR_STALL_RTOL * scale
            break
    return x, it, converged


def _tr_step(obj: Objective, x, bounds, fidx, Af, pats, radius, scale):
    """Solve the epigraph model inside the box ``|x - x_c| <= radius``.

    Variables are the box-normalized displacement ``z`` (so ``x = x_c + radius*z``)
    and the epigraph level ``s`` in units of the current cycling cost.
    Returns the projected trial point and the model pieces there.
    """
    lb, ub, lo, hi = bounds
    nf = fidx.size
    T = x.size - 1
    c = np.diff(x) - Af @ x[fidx]
    cs_x = obj.cycling(x)
    Ks = max(cs_x, 1e-6 * scale) if obj.K > 0 else 1.0
    pieces_set = PieceSet(pats, T + 1, obj.K, obj.beta) if pats else None
    # shift pieces down so none exceeds the true cost at the center
    off = np.maximum(pieces_set.values(x) - cs_x, 0.0) if pats else np.zeros(0)
    r = radius

    def full(z):
        y = x.copy()
        y[fidx] += r * z[:nf]
        return y

    def f(z):
        return (obj.smooth(full(z)) + Ks * z[nf]) / scale

    def fgrad(z):
        g = np.zeros(nf + 1)
        g[:nf] = r * obj.smooth_grad(full(z))[fidx]
        g[nf] = Ks
        return g / scale

    def steps(z):
        return Af @ (x[fidx] + r * z[:nf]) + c

    cons = [{"type": "ineq", "fun": lambda z: np.r_[steps(z) - lo, hi - steps(z)],
             "jac": lambda z: np.c_[np.r_[r * Af, -r * Af], np.zeros(2 * T)]}]
    if pats:
        cons.append({
            "type": "ineq",
            "fun": lambda z: z[nf] - (pieces_set.values(full(z)) - off) / Ks,
            "jac": lambda z: np.c_[-r * pieces_set.jacobian(full(z))[:, fidx] / Ks, np.ones(len(pats))],
        })
    box = [(max(lb[i] - x[i], -r) / r, min(ub[i] - x[i], r) / r) for i in fidx]
    box.append((0.0, None))
    z0 = np.r_[np.zeros(nf), cs_x / Ks]
    with warnings.catch_warnings():
        # SLSQP clips trial points to the box itself; the result is projected below anyway
        warnings.filterwarnings("ignore", "Values in x were outside bounds", RuntimeWarning)
        res = minimize(f, z0, jac=fgrad, bounds=box, constraints=cons, method="SLSQP",
                       options={"ftol": 1e-16, "maxiter": 500})
    try:
        xn = project(full(res.x), lb, ub, lo, hi)
    except SolverError:
        return None, []
    pieces = list(pieces_set.values(xn) - off) if pats else []
    return xn, pieces


def minimize_profile(obj: Objective, bounds, x0, tol: float = INNER_TOL) -> MinimizeResult:
    """Minimize ``obj`` over the polytope given by ``bounds = (lb, ub, lo, hi)``."""
    lb, ub, lo, hi = (np.ascontiguousarray(v, dtype=float) for v in bounds)
    bounds = (lb, ub, lo, hi)
    x = project(x0, lb, ub, lo, hi)
    hist: list[float] = []
    x, it1 = _fixed_pattern_stage(obj, x, bounds, tol, hist)
    x, it2, ok = _trust_region_stage(obj, x, bounds, hist)
    return MinimizeResult(x=x, value=obj(x), iterations=it1 + it2, converged=ok, history=hist)
