"""Reference implementations used only as test oracles.

They are written for clarity, share no code with the package, and are slow.
"""
import itertools

import numpy as np


def _sign(v):
    return int(v > 0) - int(v < 0)


def reference_switching(x):
    """Switching indices; a zero step keeps the last nonzero direction."""
    T = len(x) - 1
    S = [0]
    last = 0
    for t in range(1, T):
        prev = _sign(x[t] - x[t - 1])
        if prev != 0:
            last = prev
        cur = _sign(x[t + 1] - x[t])
        if cur != 0 and last != 0 and cur == -last:
            S.append(t)
    S.append(T)
    return S


def reference_rainflow(x):
    """Literal counter: rescan from the first triple after every extraction.

    Returns (depths, full_pairs, residual, edges) with 0-based indices.
    """
    x = [float(v) for v in x]
    T = len(x) - 1
    S = reference_switching(x)
    d = []
    full = []
    edges = []

    def direction(a, b):
        return (b, a) if x[b] >= x[a] else (a, b)

    found = True
    while found and len(S) > 3:
        found = False
        for j in range(1, len(S) - 2):
            d_prev = abs(x[S[j]] - x[S[j - 1]])
            d_mid = abs(x[S[j + 1]] - x[S[j]])
            d_next = abs(x[S[j + 2]] - x[S[j + 1]])
            if d_prev >= d_mid and d_next >= d_mid:
                pair = direction(S[j], S[j + 1])
                full.append(pair)
                edges += [pair, pair]
                d += [d_mid, d_mid]
                del S[j:j + 2]
                found = True
                break
    for a, b in zip(S[:-1], S[1:]):
        edges.append(direction(a, b))
        d.append(abs(x[b] - x[a]))
    d += [0.0] * (T - len(d))
    return np.array(d), full, S, edges


def reference_incidence(T, edges):
    M = np.zeros((T + 1, T))
    for i, (a, b) in enumerate(edges):
        M[a, i] += 1.0
        M[b, i] -= 1.0
    return M


def reference_cost(x, alpha_b, beta_b, BE):
    d, *_ = reference_rainflow(x)
    return BE * sum(alpha_b / 2.0 * di**beta_b for di in d)


def project_active_set(y, lb, ub, lo, hi):
    """Euclidean projection onto {lb <= x <= ub, lo <= diff(x) <= hi} by enumeration.

    Every face of the polytope is the solution set of some subset of the
    constraints held with equality. The projection onto that affine set is
    computed in closed form; the nearest feasible candidate over all
    subsets is the projection. Exponential in the number of constraints.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    rows, rhs = [], []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        rows += [e, e]
        rhs += [lb[i], ub[i]]
    for t in range(1, n):
        a = np.zeros(n)
        a[t], a[t - 1] = 1.0, -1.0
        rows += [a, a]
        rhs += [lo[t - 1], hi[t - 1]]
    A_all = np.array(rows)
    b_all = np.array(rhs)

    def feasible(x):
        return (np.all(x >= lb - 1e-12) and np.all(x <= ub + 1e-12)
                and np.all(np.diff(x) >= lo - 1e-12) and np.all(np.diff(x) <= hi + 1e-12))

    best, best_dist = None, np.inf
    if feasible(y):
        return y.copy()
    for k in range(1, n + 1):
        for subset in itertools.combinations(range(len(rows)), k):
            A = A_all[list(subset)]
            if np.linalg.matrix_rank(A) < k:
                continue
            b = b_all[list(subset)]
            # nearest point of {A x = b} to y
            lam = np.linalg.solve(A @ A.T, A @ y - b)
            x = y - A.T @ lam
            if feasible(x):
                dist = np.linalg.norm(x - y)
                if dist < best_dist:
                    best, best_dist = x, dist
    return best
