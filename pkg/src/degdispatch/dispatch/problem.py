"""Problem data for joint generator / storage dispatch.

Energies are in MWh, power in MW, and every slot lasts one hour, so a slot's
power and energy are numerically equal. The decision vector is the SoC
profile ``x`` (length ``T + 1``); storage power is ``u = E * diff(x)`` and
generation is ``g = D + u``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from ..degradation import DegradationParams, DomainError

DEFAULTS = {
    "alpha_g": 0.1,
    "beta_g": 20.0,
    "alpha_b": 5.24e-4,
    "beta_b": 2.03,
    "B": 200.0,
    "E": 500.0,
    "g_min": 0.0,
    "x_o": 0.5,
}
CONFIG_KEYS = set(DEFAULTS) | {"g_max", "u_min", "u_max"}
FEAS_TOL = 1e-9


class ConfigurationError(ValueError):
    pass


class InfeasibleProblemError(ValueError):
    pass


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class DispatchProblem:
    D: np.ndarray
    alpha_g: float
    beta_g: float
    g_min: float
    g_max: float
    degradation: DegradationParams
    u_min: float
    u_max: float
    x_o: float = 0.5

    def __post_init__(self):
        D = np.array(self.D, dtype=float).reshape(-1)
        if D.size == 0:
            raise ConfigurationError("demand vector is empty")
        if not np.all(np.isfinite(D)):
            raise ConfigurationError("demand contains non-finite values")
        D.setflags(write=False)
        object.__setattr__(self, "D", D)
        if not self.alpha_g > 0:
            raise ConfigurationError(f"alpha_g must be positive, got {self.alpha_g}")
        if not self.g_min <= self.g_max:
            raise ConfigurationError(f"g_min={self.g_min} exceeds g_max={self.g_max}")
        if not self.u_min <= 0 <= self.u_max:
            raise ConfigurationError(f"need u_min <= 0 <= u_max, got [{self.u_min}, {self.u_max}]")
        if not 0 <= self.x_o <= 1:
            raise ConfigurationError(f"x_o must lie in [0, 1], got {self.x_o}")
        lo, hi = self.diff_bounds()
        bad = np.flatnonzero(lo > hi + FEAS_TOL)
        if bad.size:
            t = int(bad[0])
            raise ConfigurationError(
                f"slot {t}: no storage power keeps generation within [{self.g_min}, {self.g_max}] "
                f"for demand {D[t]}"
            )

    @property
    def T(self) -> int:
        return self.D.size

    @property
    def E(self) -> float:
        return self.degradation.E

    def replace(self, **changes) -> "DispatchProblem":
        """Copy with fields changed; ``B``/``E``/``alpha_b``/``beta_b`` go to the degradation params."""
        deg = {k: changes.pop(k) for k in ("alpha_b", "beta_b", "B", "E") if k in changes}
        if deg:
            changes["degradation"] = dataclasses.replace(self.degradation, **deg)
        return dataclasses.replace(self, **changes)

    def diff_bounds(self, storage_only: bool = False) -> tuple[np.ndarray, np.ndarray]:
        """Bounds on ``x[t+1] - x[t]`` implied by rate and (optionally) generator limits."""
        E = self.E
        lo = np.full(self.T, self.u_min / E)
        hi = np.full(self.T, self.u_max / E)
        if not storage_only:
            lo = np.maximum(lo, (self.g_min - self.D) / E)
            hi = np.minimum(hi, (self.g_max - self.D) / E)
        return lo, hi

    def node_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lb = np.zeros(self.T + 1)
        ub = np.ones(self.T + 1)
        lb[0] = ub[0] = lb[-1] = ub[-1] = self.x_o
        return lb, ub

    def is_feasible(self, storage_only: bool = False) -> bool:
        """Exact test by interval propagation along the SoC chain."""
        lo, hi = self.diff_bounds(storage_only)
        a = b = self.x_o
        for t in range(self.T):
            a, b = max(a + lo[t], 0.0), min(b + hi[t], 1.0)
            if a > b + FEAS_TOL:
                return False
        return a - FEAS_TOL <= self.x_o <= b + FEAS_TOL

    def storage_power(self, x) -> np.ndarray:
        return self.E * np.diff(np.asarray(x, dtype=float))

    def generation_cost(self, g) -> float:
        g = np.asarray(g, dtype=float)
        return float(self.alpha_g * g @ g + self.beta_g * g.sum())


def assemble_problem(config: dict | None, demand) -> DispatchProblem:
    """Build a validated problem from a flat parameter dict and a demand vector.

    Missing keys take the default values; ``g_max`` defaults to the demand
    peak and the rate limits to ``+-E/4``.
    """
    cfg = dict(config or {})
    unknown = set(cfg) - CONFIG_KEYS
    if unknown:
        raise ConfigurationError(f"unknown parameters: {sorted(unknown)}")
    D = np.asarray(demand, dtype=float).reshape(-1)
    if D.size == 0:
        raise ConfigurationError("demand vector is empty")
    p = {**DEFAULTS, **{k: v for k, v in cfg.items() if v is not None}}
    try:
        p = {k: float(v) for k, v in p.items()}
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"non-numeric parameter: {exc}") from exc
    E = p["E"]
    try:
        deg = DegradationParams(p["alpha_b"], p["beta_b"], p["B"], E)
    except DomainError as exc:
        raise ConfigurationError(str(exc)) from exc
    return DispatchProblem(
        D=D,
        alpha_g=p["alpha_g"],
        beta_g=p["beta_g"],
        g_min=p["g_min"],
        g_max=p.get("g_max", float(D.max())),
        degradation=deg,
        u_min=p.get("u_min", -E / 4),
        u_max=p.get("u_max", E / 4),
        x_o=p["x_o"],
    )


@dataclass(frozen=True)
class DispatchSolution:
    strategy: str
    g: np.ndarray
    u: np.ndarray
    x: np.ndarray
    generation_cost: float
    cycling_cost: float
    total_cost: float
    prices: np.ndarray | None = None
    kkt_residual: float = float("nan")
    iterations: int = 0
    converged: bool = False
    history: tuple = field(default=(), repr=False)
