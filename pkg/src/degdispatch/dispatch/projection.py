"""Euclidean projection onto the feasible SoC polytope."""
from __future__ import annotations

import numpy as np

from .. import kernels
from ..rainflow import SocProfile
from .problem import FEAS_TOL, DispatchProblem, InfeasibleProblemError, SolverError

PROJ_TOL = 1e-10
PROJ_MAX_ITER = 100_000


def dykstra_project(y, lb, ub, lo, hi, tol=PROJ_TOL, max_iter=PROJ_MAX_ITER) -> np.ndarray:
    """Dykstra projection onto ``{lb <= x <= ub, lo <= diff(x) <= hi}``.

    Alternates over the box and the two families of disjoint step pairs
    (odd and even ``t``), each of which has a closed-form projection.
    Endpoints pinned by ``lb == ub`` are set exactly on return.
    """
    y = np.ascontiguousarray(y, dtype=float)
    x, it, ok = kernels.dykstra(y, lb, ub, lo, hi, tol, max_iter)
    if not ok:
        raise SolverError(f"projection did not converge in {max_iter} iterations")
    return _checked(np.clip(x, lb, ub), lb, ub, lo, hi)


def project(y, lb, ub, lo, hi) -> np.ndarray:
    """Exact projection by dynamic programming along the SoC chain."""
    y = np.ascontiguousarray(y, dtype=float)
    x, ok = kernels.chain_project(y, lb, ub, lo, hi)
    if not ok:
        raise SolverError("the constraint set is empty")
    return _checked(np.clip(x, lb, ub), lb, ub, lo, hi)


def _checked(x, lb, ub, lo, hi):
    viol = kernels.violation(x, lb, ub, lo, hi)
    if viol > FEAS_TOL:
        raise SolverError(f"projection result violates constraints by {viol:.2e}")
    return x


def feasible_project(y, prob: DispatchProblem, storage_only: bool = False, method: str = "dykstra") -> SocProfile:
    """Euclidean projection of ``y`` onto the problem's feasible SoC profiles.

    ``method`` is ``"dykstra"`` (alternating projections) or ``"exact"``
    (chain dynamic program); both return the same point up to the Dykstra
    tolerance.
    """
    if not prob.is_feasible(storage_only):
        raise InfeasibleProblemError("no SoC profile satisfies the problem's constraints")
    y = np.asarray(y, dtype=float)
    if y.shape != (prob.T + 1,):
        raise ValueError(f"expected a vector of length {prob.T + 1}, got shape {y.shape}")
    lb, ub = prob.node_bounds()
    lo, hi = prob.diff_bounds(storage_only)
    if method == "dykstra":
        x = dykstra_project(y, lb, ub, lo, hi)
    elif method == "exact":
        x = project(y, lb, ub, lo, hi)
    else:
        raise ValueError(f"unknown projection method {method!r}")
    return SocProfile(x, prob.x_o)
