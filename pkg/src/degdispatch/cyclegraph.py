"""Incidence-matrix view of rainflow counting.

The half-cycle depths are a piecewise-linear function of the profile,
``d = M(x).T @ x``, where ``M(x)`` is the signed node-edge incidence matrix
of the cycle graph: edge ``(a, b)`` puts ``+1`` on row ``a`` and ``-1`` on
row ``b``. Matrices are kept as edge lists; :meth:`IncidenceMatrix.dense`
materializes them.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .rainflow import CycleDecomposition, _values, edge_direction, find_switching_times

RANK_RTOL = 1e-9
BOUNDARY_TOL = 1e-9


class StructuralError(ValueError):
    """Inconsistent decomposition / matrix dimensions."""


@dataclass(frozen=True)
class IncidenceMatrix:
    """(T+1) x T incidence matrix stored as an edge list.

    Columns beyond ``len(edges)`` are zero. ``n_full`` counts the leading
    duplicate column pairs that come from extracted full cycles.
    """

    T: int
    edges: np.ndarray
    n_full: int = 0
    from_rainflow: bool = False

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if len(e) > self.T:
            raise StructuralError(f"{len(e)} edges do not fit in {self.T} columns")
        if len(e) and (e.min() < 0 or e.max() > self.T):
            raise StructuralError(f"edge endpoint outside [0, {self.T}]")
        e.setflags(write=False)
        object.__setattr__(self, "edges", e)

    @property
    def shape(self) -> tuple[int, int]:
        return self.T + 1, self.T

    def dense(self) -> np.ndarray:
        M = np.zeros(self.shape)
        cols = np.arange(len(self.edges))
        M[self.edges[:, 0], cols] += 1.0
        M[self.edges[:, 1], cols] -= 1.0
        return M

    def rmatvec(self, x) -> np.ndarray:
        """``M.T @ x`` without materializing ``M``."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.T + 1,):
            raise StructuralError(f"expected a vector of length {self.T + 1}, got shape {x.shape}")
        out = np.zeros(self.T)
        if len(self.edges):
            out[: len(self.edges)] = x[self.edges[:, 0]] - x[self.edges[:, 1]]
        return out

    def matvec(self, y) -> np.ndarray:
        """``M @ y`` for a length-T vector."""
        y = np.asarray(y, dtype=float)
        out = np.zeros(self.T + 1)
        m = len(self.edges)
        np.add.at(out, self.edges[:, 0], y[:m])
        np.add.at(out, self.edges[:, 1], -y[:m])
        return out

    def edge_list(self) -> list[tuple[int, int]]:
        return [(int(a), int(b)) for a, b in self.edges]

    def to_csv(self, path) -> None:
        M = self.dense().astype(int)
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node"] + [f"c{i}" for i in range(self.T)])
            for t, row in enumerate(M):
                w.writerow([t] + row.tolist())


@dataclass(frozen=True)
class ChargeDischargeSplit:
    M_c: IncidenceMatrix
    M_d: IncidenceMatrix
    d_c: np.ndarray
    d_d: np.ndarray


@dataclass(frozen=True)
class RankReport:
    r: int
    r_stacked: int
    r_stacked_transpose: int
    rank_bounds_ok: bool


def build_incidence(x, dec: CycleDecomposition) -> IncidenceMatrix:
    v = _values(x)
    T = v.size - 1
    if dec.depths.size != T:
        raise StructuralError(f"decomposition is for T={dec.depths.size}, profile has T={T}")
    idx = [i for pair in dec.full_cycles for i in pair] + list(dec.residual)
    if any(i < 0 or i > T for i in idx):
        raise StructuralError("decomposition index outside [0, T]")
    edges = []
    for pair in dec.full_cycles:
        edges += [pair, pair]
    for j in range(1, len(dec.residual)):
        edges.append(edge_direction(v, dec.residual, j))
    return IncidenceMatrix(T, np.array(edges, dtype=np.int64), n_full=len(dec.full_cycles), from_rainflow=True)


def incidence_of(x) -> IncidenceMatrix:
    from .rainflow import rainflow_count

    return build_incidence(x, rainflow_count(x))


def depths_from_incidence(M: IncidenceMatrix, x) -> np.ndarray:
    return M.rmatvec(_values(x))


def split_charge_discharge(M: IncidenceMatrix, x) -> ChargeDischargeSplit:
    v = _values(x)
    if v.size != M.T + 1:
        raise StructuralError(f"profile length {v.size} does not match matrix with T={M.T}")
    charge, discharge = [], []
    n_dup = 2 * M.n_full
    for i, (a, b) in enumerate(M.edges):
        if i < n_dup:
            (charge if i % 2 == 0 else discharge).append((a, b))
        elif a > b:
            charge.append((a, b))
        else:
            discharge.append((a, b))

    def ordered(edge_set):
        if not edge_set:
            return np.zeros((0, 2), dtype=np.int64), np.zeros(M.T)
        e = np.array(edge_set, dtype=np.int64)
        d = v[e[:, 0]] - v[e[:, 1]]
        order = np.argsort(-d, kind="stable")
        depths = np.zeros(M.T)
        depths[: len(e)] = d[order]
        return e[order], depths

    e_c, d_c = ordered(charge)
    e_d, d_d = ordered(discharge)
    return ChargeDischargeSplit(IncidenceMatrix(M.T, e_c), IncidenceMatrix(M.T, e_d), d_c, d_d)


def step_vector(T: int, t: int) -> np.ndarray:
    """Unit step ``1_t`` in R^{T+1}: zeros before node ``t``, ones from ``t`` on."""
    out = np.zeros(T + 1)
    out[t:] = 1.0
    return out


def column_sum_bound(M_c: IncidenceMatrix) -> float:
    """``max_t |(M_c 1).T 1_t|`` over all step vectors."""
    row_sums = M_c.matvec(np.ones(M_c.T))
    tails = np.cumsum(row_sums[::-1])[::-1]
    return float(np.max(np.abs(tails)))


def _rank(A: np.ndarray) -> int:
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > RANK_RTOL * s[0]))


def rank_analysis(M: IncidenceMatrix) -> RankReport:
    N = M.dense()
    T = M.T
    e_first = np.zeros(T + 1)
    e_first[0] = 1.0
    e_last = np.zeros(T + 1)
    e_last[-1] = 1.0
    r = _rank(N)
    r_stacked = _rank(np.vstack([N @ N.T, e_last, e_first]))
    r_stacked_t = _rank(np.vstack([N.T, e_last, e_first]))
    ok = min(r + 1, T + 1) <= r_stacked <= min(r + 2, T + 1) and r_stacked == r_stacked_t
    if M.from_rainflow:
        ok = ok and r_stacked == r + 1
    return RankReport(r=r, r_stacked=r_stacked, r_stacked_transpose=r_stacked_t, rank_bounds_ok=bool(ok))


def decision_margin(x) -> float:
    """Smallest slack among all decisions the counter takes on ``x``.

    Covers every step magnitude (sign tests), both comparisons of every
    triple examined during full-cycle extraction, the examined depths
    themselves, and the residual half-cycle depths. A step perturbation
    ``q * 1_t`` with ``|q|`` below half this margin leaves every decision,
    and therefore the incidence matrix, unchanged.
    """
    v = _values(x)
    slacks = list(np.abs(np.diff(v)))
    S = find_switching_times(v)
    j = 1
    while len(S) > 3 and j <= len(S) - 3:
        d_prev = abs(v[S[j]] - v[S[j - 1]])
        d_mid = abs(v[S[j + 1]] - v[S[j]])
        d_next = abs(v[S[j + 2]] - v[S[j + 1]])
        slacks += [abs(d_prev - d_mid), abs(d_next - d_mid), d_mid]
        if d_prev >= d_mid and d_next >= d_mid:
            del S[j:j + 2]
            j = max(1, j - 2)
        else:
            j += 1
    slacks += [abs(v[b] - v[a]) for a, b in zip(S[:-1], S[1:])]
    return float(min(slacks)) if slacks else np.inf


def is_boundary_profile(x, tol: float = BOUNDARY_TOL) -> bool:
    """True when some counting decision is tied within ``tol``.

    Ties are equal neighbouring depths in an examined triple, a zero
    examined depth, a zero step anywhere in the profile, or a zero residual
    half-cycle; at each of these an arbitrarily small step perturbation can
    change the incidence matrix.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    return decision_margin(x) <= tol
