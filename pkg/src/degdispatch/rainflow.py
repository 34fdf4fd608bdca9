"""Rainflow cycle counting of state-of-charge profiles.

The counter follows the three classic stages: switching-time
identification, nested full-cycle extraction and residual half-cycle
extraction. Besides the depth vector it returns the extracted full-cycle
index pairs and the residual switching indices, which is what the
incidence-matrix view in :mod:`degdispatch.cyclegraph` is built from.

Positional arguments ``j`` of :func:`triple_diff` and :func:`edge_direction`
are 1-based positions into the switching-index list, matching the usual
statement of the counting procedure.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels


class InvalidProfileError(ValueError):
    """Raised for SoC profiles that cannot be cycle-counted."""


@dataclass(frozen=True)
class SocProfile:
    """Normalized SoC trajectory over ``T + 1`` time nodes.

    ``initial_soc`` defaults to ``values[0]``. Profiles are not required to
    be closed (``values[0] == values[-1]``); dispatch problems enforce that
    separately, see :attr:`is_closed`.
    """

    values: np.ndarray
    initial_soc: float | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size < 2:
            raise InvalidProfileError(f"profile needs at least 2 nodes, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise InvalidProfileError("profile contains non-finite values")
        if v.min() < 0.0 or v.max() > 1.0:
            raise InvalidProfileError(
                f"SoC values must lie in [0, 1], got range [{v.min():.6g}, {v.max():.6g}]"
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.initial_soc is None:
            object.__setattr__(self, "initial_soc", float(v[0]))

    @property
    def T(self) -> int:
        return self.values.size - 1

    @property
    def is_closed(self) -> bool:
        return self.values[0] == self.values[-1] == self.initial_soc

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True)
class CycleDecomposition:
    """Output of :func:`rainflow_count`.

    Attributes:
        depths: length-``T`` half-cycle depths; full-cycle pairs first (in
            extraction order), residual half-cycles next, zeros at the tail.
        full_cycles: extracted full cycles as directed ``(high, low)`` node pairs.
        residual: remaining switching indices, strictly increasing, with 0 and T.
        edges: the directed edge list of the cycle graph (each full cycle twice,
            then one edge per residual half-cycle).
    """

    depths: np.ndarray
    full_cycles: list[tuple[int, int]]
    residual: list[int]
    edges: np.ndarray = field(repr=False)

    @property
    def T(self) -> int:
        return self.depths.size

    @property
    def n_half_cycles(self) -> int:
        return len(self.edges)


def as_profile(x) -> SocProfile:
    if isinstance(x, SocProfile):
        return x
    return SocProfile(np.asarray(x, dtype=float))


def _values(x) -> np.ndarray:
    return as_profile(x).values


def find_switching_times(x) -> list[int]:
    """Indices where the profile reverses direction, plus both endpoints.

    A zero step keeps the direction of the last nonzero step, so a plateau
    never creates a switching point of its own; a reversal after a plateau
    is placed at the plateau's last node.
    """
    v = _values(x)
    return [int(t) for t in kernels._switching_np(v)]


def triple_diff(x, S, j: int) -> tuple[float, float, float]:
    """``(Δ_{j-1}, Δ_j, Δ_{j+1})`` with ``Δ_j = |x[S[j+1]] - x[S[j]]|`` (1-based ``j``)."""
    v = _values(x)
    S = list(S)
    if not 2 <= j <= len(S) - 2:
        raise IndexError(f"j={j} outside [2, {len(S) - 2}] for |S|={len(S)}")
    s = [None] + S  # 1-based view

    def delta(i):
        return float(abs(v[s[i + 1]] - v[s[i]]))

    return delta(j - 1), delta(j), delta(j + 1)


def edge_direction(x, S, j: int) -> tuple[int, int]:
    """Directed edge between ``S[j]`` and ``S[j+1]`` (1-based), higher SoC first."""
    v = _values(x)
    S = list(S)
    if not 1 <= j <= len(S) - 1:
        raise IndexError(f"j={j} outside [1, {len(S) - 1}] for |S|={len(S)}")
    a, b = int(S[j - 1]), int(S[j])
    return (b, a) if v[b] >= v[a] else (a, b)


def rainflow_count(x) -> CycleDecomposition:
    v = _values(x)
    depths, edges, full, sr = kernels.rainflow_kernel(np.ascontiguousarray(v))
    return CycleDecomposition(
        depths=depths,
        full_cycles=[(int(a), int(b)) for a, b in full],
        residual=[int(t) for t in sr],
        edges=edges,
    )


def half_cycle_table(x) -> list[dict]:
    """One row per half-cycle: index, depth, kind, start_t, end_t.

    ``kind`` is ``"full"`` for the two halves of an extracted full cycle and
    ``"residual"`` otherwise; start/end are the chronological endpoints.
    """
    dec = rainflow_count(x)
    n_full_edges = 2 * len(dec.full_cycles)
    rows = []
    for i, (a, b) in enumerate(dec.edges):
        rows.append(
            {
                "index": i,
                "depth": float(dec.depths[i]),
                "kind": "full" if i < n_full_edges else "residual",
                "start_t": int(min(a, b)),
                "end_t": int(max(a, b)),
            }
        )
    return rows


def load_soc_csv(path) -> SocProfile:
    """Read a profile from a CSV with header ``t,soc`` (t contiguous from 0)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    values = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "soc"]:
            raise InvalidProfileError(f"{path}: expected header 't,soc', got {header}")
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                t = int(row[0])
                soc = float(row[1])
            except (ValueError, IndexError) as exc:
                raise InvalidProfileError(f"{path}: malformed row {row_no}: {row}") from exc
            if t != len(values):
                raise InvalidProfileError(f"{path}: row {row_no}: expected t={len(values)}, got t={t}")
            values.append(soc)
    try:
        return SocProfile(np.array(values))
    except InvalidProfileError as exc:
        raise InvalidProfileError(f"{path}: {exc}") from exc
