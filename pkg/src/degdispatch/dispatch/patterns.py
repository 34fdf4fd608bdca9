"""Cycle patterns (edge lists) around a profile and their hinged surrogates.

For a frozen edge list ``N`` the surrogate ``K * sum(max(N.T x, 0)**beta)`` is
smooth and convex and agrees with the cycling cost on the region of profiles
that produce ``N``. Near a profile where the counting pattern changes, the
cycling cost locally behaves like the maximum of the adjacent surrogates.
"""
from __future__ import annotations

import numpy as np

from .. import kernels

PROBE_STEP = 1e-7


def pattern_of(x) -> np.ndarray:
    return kernels.rainflow_kernel(np.ascontiguousarray(x, dtype=float))[1]


def adjacent_patterns(x, free=None, delta: float = PROBE_STEP) -> list[np.ndarray]:
    """Distinct edge lists seen at ``x`` and at small single-node and step probes.

    ``free`` masks the nodes that may move; probes only perturb those.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if free is None:
        free = np.ones(n, dtype=bool)
    seen = {}

    def add(y):
        e = pattern_of(y)
        seen.setdefault(e.tobytes() + bytes([len(e)]), e)

    add(x)
    idx = np.flatnonzero(free)
    for t in idx:
        for s in (delta, -delta):
            y = x.copy()
            y[t] += s
            add(y)
            y = x.copy()
            y[t:] += s * free[t:]
            add(y)
    return list(seen.values())


def random_patterns(x, free, count: int, seed: int = 0, delta: float = PROBE_STEP) -> list[np.ndarray]:
    """Edge lists at ``count`` random probes ``x + delta * N(0, 1)`` on the free nodes.

    Where several counting decisions tie at once, single-node probes miss
    most of the adjacent patterns; random directions reach them.
    """
    x = np.asarray(x, dtype=float)
    rng = np.random.default_rng(seed)
    mask = np.asarray(free, dtype=float)
    return [pattern_of(x + delta * mask * rng.standard_normal(x.size)) for _ in range(count)]


def surrogate(edges, x, K, beta) -> float:
    if K == 0.0 or len(edges) == 0:
        return 0.0
    d = np.maximum(x[edges[:, 0]] - x[edges[:, 1]], 0.0)
    return K * float(np.sum(d**beta))


def surrogate_grad(edges, x, K, beta) -> np.ndarray:
    out = np.zeros_like(x)
    if K == 0.0 or len(edges) == 0:
        return out
    d = np.maximum(x[edges[:, 0]] - x[edges[:, 1]], 0.0)
    c = K * beta * d ** (beta - 1.0)
    np.add.at(out, edges[:, 0], c)
    np.add.at(out, edges[:, 1], -c)
    return out


class PieceSet:
    """All hinged surrogates of a list of patterns, evaluated in one pass."""

    def __init__(self, patterns, n_nodes: int, K: float, beta: float):
        self.n = n_nodes
        self.K = K
        self.beta = beta
        self.count = len(patterns)
        sizes = [len(e) for e in patterns]
        self.group = np.repeat(np.arange(self.count), sizes)
        self.edges = np.concatenate(patterns) if sum(sizes) else np.zeros((0, 2), dtype=np.int64)
        self.idx_tail = self.group * n_nodes + self.edges[:, 0]
        self.idx_head = self.group * n_nodes + self.edges[:, 1]

    def _depths(self, x):
        return np.maximum(x[self.edges[:, 0]] - x[self.edges[:, 1]], 0.0)

    def values(self, x) -> np.ndarray:
        d = self._depths(x)
        return self.K * np.bincount(self.group, weights=d**self.beta, minlength=self.count)

    def jacobian(self, x) -> np.ndarray:
        d = self._depths(x)
        c = self.K * self.beta * d ** (self.beta - 1.0)
        size = self.count * self.n
        J = np.bincount(self.idx_tail, weights=c, minlength=size) - np.bincount(self.idx_head, weights=c, minlength=size)
        return J.reshape(self.count, self.n)
