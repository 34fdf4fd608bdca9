"""Cycle stress and cycling cost of a storage unit.

Units: ``B`` is the capital cost in $/kWh and ``E`` the capacity in MWh, so
the replacement cost of the unit is ``1000 * B * E`` dollars. Depths are SoC
fractions in ``[0, 1]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from . import kernels
from .cyclegraph import incidence_of
from .rainflow import _values, find_switching_times

KWH_PER_MWH = 1000.0
_DEPTH_SLACK = 1e-12


class DomainError(ValueError):
    pass


class StressFunction(Protocol):
    def __call__(self, depth: np.ndarray) -> np.ndarray: ...

    def derivative(self, depth: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class PowerLawStress:
    """``phi(d) = (alpha / 2) * d**beta``."""

    alpha: float
    beta: float

    def __call__(self, depth):
        return 0.5 * self.alpha * np.power(depth, self.beta)

    def derivative(self, depth):
        return 0.5 * self.alpha * self.beta * np.power(depth, self.beta - 1.0)


@dataclass(frozen=True)
class DegradationParams:
    alpha_b: float
    beta_b: float
    B: float
    E: float

    def __post_init__(self):
        if not self.alpha_b > 0:
            raise DomainError(f"alpha_b must be positive, got {self.alpha_b}")
        if not self.beta_b > 1:
            raise DomainError(f"beta_b must exceed 1, got {self.beta_b}")
        if not self.B >= 0:
            raise DomainError(f"B must be nonnegative, got {self.B}")
        if not self.E > 0:
            raise DomainError(f"E must be positive, got {self.E}")

    @property
    def replacement_cost(self) -> float:
        """Dollar cost of replacing the whole unit."""
        return KWH_PER_MWH * self.B * self.E

    @property
    def cost_scale(self) -> float:
        """``K`` in ``C_s = K * sum(d**beta)``."""
        return 0.5 * self.alpha_b * self.replacement_cost

    @property
    def stress_fn(self) -> PowerLawStress:
        return PowerLawStress(self.alpha_b, self.beta_b)


def _check_depths(d) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if np.any(~np.isfinite(d)) or np.any(d < -_DEPTH_SLACK) or np.any(d > 1.0 + _DEPTH_SLACK):
        raise DomainError("cycle depths must lie in [0, 1]")
    return np.clip(d, 0.0, 1.0)


def stress(depth, params: DegradationParams):
    d = _check_depths(depth)
    out = params.stress_fn(d)
    return float(out) if out.ndim == 0 else out


def cycling_cost_depths(d, params: DegradationParams) -> float:
    d = _check_depths(d)
    return params.replacement_cost * float(np.sum(params.stress_fn(d)))


def cycling_cost_profile(x, params: DegradationParams) -> float:
    v = _values(x)
    return params.cost_scale * float(kernels.cycle_power_sum(np.ascontiguousarray(v), float(params.beta_b)))


def cycling_cost_quadratic(x, params: DegradationParams) -> float:
    """``(alpha_b * BE / 2) * x.T M M.T x``; equals the cycling cost when ``beta_b == 2``."""
    v = _values(x)
    d = incidence_of(v).rmatvec(v)
    return params.cost_scale * float(d @ d)


def cycling_cost_subgradient(x, params: DegradationParams) -> np.ndarray:
    """Fixed-pattern gradient ``K * beta * M d**(beta-1)`` with ``M = M(x)``.

    Exact wherever the counting pattern is locally constant, and a valid
    subgradient of the convex cycling cost everywhere.
    """
    v = _values(x)
    M = incidence_of(v)
    d = np.maximum(M.rmatvec(v), 0.0)
    w = params.cost_scale * params.beta_b * np.power(d, params.beta_b - 1.0)
    return M.matvec(w)


def naive_enumeration_cost(x, params: DegradationParams) -> float:
    """Cost of treating every swing between switching points as a half-cycle."""
    v = _values(x)
    S = find_switching_times(v)
    return cycling_cost_depths(np.abs(np.diff(v[S])), params)
