"""Clearing prices, participant best responses and market-side certificates.

Prices are the multipliers of the power-balance constraint of a solved
dispatch. At these prices a price-taking generator and a price-taking
storage owner should each find the dispatched schedule profit-maximizing;
:func:`verify_incentive_compatibility` checks that numerically.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .cyclegraph import RANK_RTOL, _rank, incidence_of, is_boundary_profile, rank_analysis
from .degradation import cycling_cost_profile
from .dispatch import DispatchProblem, DispatchSolution, kkt_residual, storage_response
from .rainflow import _values

TOL_GEN = 1e-4
TOL_STR = 1e-3
SLACK_TOL = 1e-9


class UnconvergedSolutionError(ValueError):
    pass


@dataclass(frozen=True)
class PriceVector:
    lam: np.ndarray
    degenerate: tuple = ()

    def __post_init__(self):
        lam = np.array(self.lam, dtype=float).reshape(-1)
        if lam.size == 0 or not np.all(np.isfinite(lam)):
            raise ValueError("prices must be a nonempty vector of finite values")
        lam.setflags(write=False)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "degenerate", tuple(int(t) for t in self.degenerate))

    def __len__(self):
        return self.lam.size

    def __array__(self, dtype=None, copy=None):
        return self.lam if dtype is None else self.lam.astype(dtype)


def _prices(p, prob: DispatchProblem) -> np.ndarray:
    lam = np.asarray(p.lam if isinstance(p, PriceVector) else p, dtype=float)
    if lam.shape != (prob.T,):
        raise ValueError(f"price vector has length {lam.size}, problem horizon is {prob.T}")
    return lam


def extract_prices(sol: DispatchSolution, prob: DispatchProblem) -> PriceVector:
    """Marginal generation cost where the generator is interior; elsewhere the
    multiplier estimate that also satisfies storage stationarity.

    Slots where both a generator limit and a storage rate limit bind are
    returned in ``degenerate``; their price is only bounded, not determined.
    """
    if not sol.converged:
        raise UnconvergedSolutionError("prices are only defined for a converged solution")
    rep = kkt_residual(sol, prob)
    lam = rep.lam.copy()
    interior = np.setdiff1d(np.arange(prob.T), rep.gen_active)
    lam[interior] = 2.0 * prob.alpha_g * sol.g[interior] + prob.beta_g
    if sol.strategy == "GD":
        degenerate = rep.gen_active
    else:
        degenerate = np.intersect1d(rep.gen_active, rep.storage_active)
    return PriceVector(lam, tuple(degenerate))


def generator_best_response(p, prob: DispatchProblem) -> np.ndarray:
    lam = _prices(p, prob)
    return np.clip((lam - prob.beta_g) / (2.0 * prob.alpha_g), prob.g_min, prob.g_max)


def generator_profit(p, g, prob: DispatchProblem) -> float:
    lam = _prices(p, prob)
    g = np.asarray(g, dtype=float)
    return float(lam @ g - prob.generation_cost(g))


def storage_best_response(p, prob: DispatchProblem, x0=None) -> tuple[np.ndarray, np.ndarray]:
    """``(u, x)`` maximizing ``-p.u - C_s(x)`` under the storage's own limits."""
    lam = _prices(p, prob)
    res = storage_response(prob, lam, x0)
    x = res.x
    return prob.E * np.diff(x), x


def storage_profit(p, u, x, prob: DispatchProblem) -> float:
    lam = _prices(p, prob)
    return float(-lam @ np.asarray(u, dtype=float) - cycling_cost_profile(np.clip(x, 0.0, 1.0), prob.degradation))


@dataclass
class Certificate:
    rank: int
    T: int
    unique: bool
    stacked_rank: int
    applicable: bool
    violations: list = field(default_factory=list)
    unverified: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class IncentiveReport:
    generator_gap: float
    storage_gap: float
    passed: bool
    lam: list
    details: dict = field(default_factory=dict)
    certificate: Certificate | None = None

    def to_dict(self) -> dict:
        out = {
            "generator_gap": self.generator_gap,
            "storage_gap": self.storage_gap,
            "pass": self.passed,
            "lambda": list(self.lam),
            "details": self.details,
        }
        if self.certificate is not None:
            c = self.certificate
            out["certificate"] = {"rank": c.rank, "T": c.T, "unique": c.unique,
                                  "stacked_rank": c.stacked_rank, "applicable": c.applicable,
                                  "violations": c.violations, "unverified": c.unverified}
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _gap(best: float, actual: float) -> float:
    return (best - actual) / max(1.0, abs(actual))


def verify_incentive_compatibility(sol: DispatchSolution, p, prob: DispatchProblem,
                                   tol_gen: float = TOL_GEN, tol_str: float = TOL_STR) -> IncentiveReport:
    lam = _prices(p, prob)
    g_br = generator_best_response(lam, prob)
    gen_star = generator_profit(lam, sol.g, prob)
    gen_best = generator_profit(lam, g_br, prob)
    u_br, x_br = storage_best_response(lam, prob, x0=sol.x)
    str_star = storage_profit(lam, sol.u, sol.x, prob)
    str_best = storage_profit(lam, u_br, x_br, prob)
    gen_gap = _gap(gen_best, gen_star)
    str_gap = _gap(str_best, str_star)
    rep = kkt_residual(sol, prob)
    details = {
        "generator_profit": gen_star,
        "generator_best_profit": gen_best,
        "storage_profit": str_star,
        "storage_best_profit": str_best,
        "kkt_residual": rep.residual,
        "multipliers": {k: np.asarray(v).tolist() for k, v in rep.multipliers.items()},
        "theta": None if rep.theta is None else rep.theta.tolist(),
        "degenerate_slots": list(p.degenerate) if isinstance(p, PriceVector) else [],
    }
    return IncentiveReport(
        generator_gap=float(gen_gap), storage_gap=float(str_gap),
        passed=bool(gen_gap <= tol_gen and str_gap <= tol_str), lam=lam.tolist(), details=details,
    )


def uniqueness_certificate(x_star, prob: DispatchProblem | None = None, tol: float = SLACK_TOL) -> Certificate:
    """Rank test for a unique storage response at ``x_star``.

    The rank test certifies uniqueness only under its hypotheses: quadratic
    stress (``beta_b == 2``), a profile away from every counting tie, and all
    inequality constraints strictly slack. Violated hypotheses make the
    certificate inapplicable; hypotheses that cannot be checked without
    ``prob`` are listed in ``unverified``.
    """
    v = _values(x_star)
    T = v.size - 1
    M = incidence_of(v)
    rep = rank_analysis(M)
    N = M.dense()
    scale = prob.degradation.alpha_b * prob.degradation.replacement_cost if prob is not None else 1.0
    e_first = np.zeros(T + 1)
    e_first[0] = 1.0
    e_last = np.zeros(T + 1)
    e_last[-1] = 1.0
    stacked = _rank(np.vstack([scale * N @ N.T, e_last, e_first]))

    violations, unverified = [], []
    if is_boundary_profile(v, tol):
        violations.append("profile has a counting tie (boundary profile)")
    if np.any(v[1:T] <= tol) or np.any(v[1:T] >= 1.0 - tol):
        violations.append("SoC reaches a bound")
    if prob is None:
        unverified += ["beta_b == 2", "rate limits slack", "generator limits slack", "x_0 == x_T == x_o"]
    else:
        if prob.degradation.beta_b != 2.0:
            violations.append(f"beta_b = {prob.degradation.beta_b}, the rank test needs beta_b = 2")
        if T != prob.T:
            violations.append(f"profile horizon {T} differs from the problem's {prob.T}")
        else:
            u = prob.E * np.diff(v)
            g = prob.D + u
            if np.any(u <= prob.u_min + tol) or np.any(u >= prob.u_max - tol):
                violations.append("a storage rate limit binds")
            if np.any(g <= prob.g_min + tol) or np.any(g >= prob.g_max - tol):
                violations.append("a generator limit binds")
            if abs(v[0] - prob.x_o) > tol or abs(v[-1] - prob.x_o) > tol:
                violations.append("profile does not start and end at x_o")
    applicable = not violations
    return Certificate(rank=rep.r, T=T, unique=bool(applicable and rep.r == T), stacked_rank=stacked,
                       applicable=applicable, violations=violations, unverified=unverified)


__all__ = [
    "Certificate", "IncentiveReport", "PriceVector", "RANK_RTOL", "UnconvergedSolutionError",
    "extract_prices", "generator_best_response", "generator_profit", "storage_best_response",
    "storage_profit", "uniqueness_certificate", "verify_incentive_compatibility",
]
