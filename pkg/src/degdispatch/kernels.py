"""Hot numeric kernels.

Every kernel exists twice: a numba-compiled loop version (``*_nb``) and a
numpy / plain-Python version (``*_np``). The public names at the bottom of
the module are bound to one of the two according to
:data:`degdispatch._accel.USE_NUMBA`. Both implementations are importable
directly so the test-suite and the benchmark can compare them.

Conventions shared by all kernels:

* ``x`` is a SoC profile of length ``T + 1`` (float64).
* ``edges`` is an ``(m, 2)`` int64 array of directed edges ``(tail, head)``;
  the depth carried by an edge is ``x[tail] - x[head]``.
* The feasible polytope is described by node bounds ``lb <= x <= ub``
  (equal at the fixed endpoints) and step bounds ``lo <= x[t] - x[t-1] <= hi``
  for ``t = 1..T``, stored at index ``t - 1``.
"""
import math

import numpy as np

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# Rainflow cycle counting
# ---------------------------------------------------------------------------


@njit
def _switching_nb(x):
    T = x.shape[0] - 1
    sr = np.empty(T + 1, dtype=np.int64)
    sr[0] = 0
    m = 1
    prev = 0.0
    for t in range(1, T):
        step_in = x[t] - x[t - 1]
        if step_in > 0.0:
            prev = 1.0
        elif step_in < 0.0:
            prev = -1.0
        step_out = x[t + 1] - x[t]
        nxt = 0.0
        if step_out > 0.0:
            nxt = 1.0
        elif step_out < 0.0:
            nxt = -1.0
        if nxt != 0.0 and prev != 0.0 and nxt == -prev:
            sr[m] = t
            m += 1
    sr[m] = T
    m += 1
    return sr, m


@njit
def _rainflow_nb(x):
    T = x.shape[0] - 1
    depths = np.zeros(T)
    edges = np.zeros((T, 2), dtype=np.int64)
    full = np.zeros((T, 2), dtype=np.int64)
    sr, m = _switching_nb(x)
    k = 0
    n_full = 0
    n_edges = 0
    j = 1
    while m > 3 and j <= m - 3:
        d_prev = abs(x[sr[j]] - x[sr[j - 1]])
        d_mid = abs(x[sr[j + 1]] - x[sr[j]])
        d_next = abs(x[sr[j + 2]] - x[sr[j + 1]])
        if d_prev >= d_mid and d_next >= d_mid:
            p = sr[j]
            q = sr[j + 1]
            if x[q] >= x[p]:
                full[n_full, 0] = q
                full[n_full, 1] = p
            else:
                full[n_full, 0] = p
                full[n_full, 1] = q
            edges[n_edges, 0] = full[n_full, 0]
            edges[n_edges, 1] = full[n_full, 1]
            edges[n_edges + 1, 0] = full[n_full, 0]
            edges[n_edges + 1, 1] = full[n_full, 1]
            n_edges += 2
            n_full += 1
            depths[k] = d_mid
            depths[k + 1] = d_mid
            k += 2
            for i in range(j, m - 2):
                sr[i] = sr[i + 2]
            m -= 2
            j = max(1, j - 2)
        else:
            j += 1
    for i in range(m - 1):
        p = sr[i]
        q = sr[i + 1]
        if x[q] >= x[p]:
            edges[n_edges, 0] = q
            edges[n_edges, 1] = p
        else:
            edges[n_edges, 0] = p
            edges[n_edges, 1] = q
        n_edges += 1
        depths[k] = abs(x[q] - x[p])
        k += 1
    return depths, edges[:n_edges].copy(), full[:n_full].copy(), sr[:m].copy()


def _switching_np(x):
    T = len(x) - 1
    steps = np.sign(np.diff(x))
    out = [0]
    prev = 0.0
    for t in range(1, T):
        if steps[t - 1] != 0.0:
            prev = steps[t - 1]
        nxt = steps[t]
        if nxt != 0.0 and prev != 0.0 and nxt == -prev:
            out.append(t)
    out.append(T)
    return out


def _rainflow_np(x):
    x = np.asarray(x, dtype=float)
    T = len(x) - 1
    sr = _switching_np(x)
    depths = np.zeros(T)
    full = []
    k = 0
    j = 1
    while len(sr) > 3 and j <= len(sr) - 3:
        d_prev = abs(x[sr[j]] - x[sr[j - 1]])
        d_mid = abs(x[sr[j + 1]] - x[sr[j]])
        d_next = abs(x[sr[j + 2]] - x[sr[j + 1]])
        if d_prev >= d_mid and d_next >= d_mid:
            p, q = sr[j], sr[j + 1]
            full.append((q, p) if x[q] >= x[p] else (p, q))
            depths[k:k + 2] = d_mid
            k += 2
            del sr[j:j + 2]
            j = max(1, j - 2)
        else:
            j += 1
    edges = [e for e in full for _ in range(2)]
    for p, q in zip(sr[:-1], sr[1:]):
        edges.append((q, p) if x[q] >= x[p] else (p, q))
        depths[k] = abs(x[q] - x[p])
        k += 1
    return (
        depths,
        np.array(edges, dtype=np.int64).reshape(-1, 2),
        np.array(full, dtype=np.int64).reshape(-1, 2),
        np.array(sr, dtype=np.int64),
    )


@njit
def _power_sum_nb(depths, beta):
    s = 0.0
    for i in range(depths.shape[0]):
        if depths[i] > 0.0:
            s += depths[i] ** beta
    return s


@njit
def _cycle_power_sum_nb(x, beta):
    return _power_sum_nb(_rainflow_nb(x)[0], beta)


def _cycle_power_sum_np(x, beta):
    d = _rainflow_np(x)[0]
    return float(np.sum(d[d > 0.0] ** beta))


# ---------------------------------------------------------------------------
# Dykstra projection onto {lb <= x <= ub, lo <= diff(x) <= hi}
# ---------------------------------------------------------------------------


@njit
def _project_pairs_nb(x, lo, hi, first):
    T = x.shape[0] - 1
    for t in range(first, T + 1, 2):
        delta = x[t] - x[t - 1]
        if delta < lo[t - 1]:
            c = 0.5 * (lo[t - 1] - delta)
            x[t - 1] -= c
            x[t] += c
        elif delta > hi[t - 1]:
            c = 0.5 * (delta - hi[t - 1])
            x[t - 1] += c
            x[t] -= c


@njit
def _violation_nb(x, lb, ub, lo, hi):
    v = 0.0
    n = x.shape[0]
    for i in range(n):
        v = max(v, lb[i] - x[i], x[i] - ub[i])
    for t in range(1, n):
        delta = x[t] - x[t - 1]
        v = max(v, lo[t - 1] - delta, delta - hi[t - 1])
    return v


@njit
def _dykstra_nb(y, lb, ub, lo, hi, tol, max_iter):
    n = y.shape[0]
    x = y.copy()
    x_old = np.empty(n)
    z = np.empty(n)
    p0 = np.zeros(n)
    p1 = np.zeros(n)
    p2 = np.zeros(n)
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        x_old[:] = x
        for i in range(n):
            z[i] = x[i] + p0[i]
            x[i] = min(max(z[i], lb[i]), ub[i])
            p0[i] = z[i] - x[i]
        for i in range(n):
            z[i] = x[i] + p1[i]
            x[i] = z[i]
        _project_pairs_nb(x, lo, hi, 1)
        for i in range(n):
            p1[i] = z[i] - x[i]
        for i in range(n):
            z[i] = x[i] + p2[i]
            x[i] = z[i]
        _project_pairs_nb(x, lo, hi, 2)
        for i in range(n):
            p2[i] = z[i] - x[i]
        change = 0.0
        for i in range(n):
            change = max(change, abs(x[i] - x_old[i]))
        # x can repeat across a sweep while still infeasible, so feasibility is tested too
        if change < tol and _violation_nb(x, lb, ub, lo, hi) < tol:
            converged = True
            break
    return x, it, converged


def _project_pairs_np(x, lo, hi, first):
    T = len(x) - 1
    t = np.arange(first, T + 1, 2)
    delta = x[t] - x[t - 1]
    shift = np.where(delta < lo[t - 1], 0.5 * (lo[t - 1] - delta), 0.0)
    shift = np.where(delta > hi[t - 1], -0.5 * (delta - hi[t - 1]), shift)
    x[t - 1] -= shift
    x[t] += shift


def _violation_np(x, lb, ub, lo, hi):
    delta = np.diff(x)
    return float(max(np.max(lb - x), np.max(x - ub), np.max(lo - delta), np.max(delta - hi)))


def _dykstra_np(y, lb, ub, lo, hi, tol, max_iter):
    x = np.array(y, dtype=float)
    p0 = np.zeros_like(x)
    p1 = np.zeros_like(x)
    p2 = np.zeros_like(x)
    for it in range(1, max_iter + 1):
        x_old = x.copy()
        z = x + p0
        x = np.clip(z, lb, ub)
        p0 = z - x
        z = x + p1
        x = z.copy()
        _project_pairs_np(x, lo, hi, 1)
        p1 = z - x
        z = x + p2
        x = z.copy()
        _project_pairs_np(x, lo, hi, 2)
        p2 = z - x
        if np.max(np.abs(x - x_old)) < tol and _violation_np(x, lb, ub, lo, hi) < tol:
            return x, it, True
    return x, max_iter, False


# ---------------------------------------------------------------------------
# Exact projection by dynamic programming along the chain
#
# f_t(z) = min over x_0..x_{t-1} of 0.5 * sum_{s<=t} (x_s - y_s)^2 with
# x_t = z. Its derivative is piecewise linear and nondecreasing (jumps
# allowed) and is stored as segments [s0, s1] with f' = c * z + d. Moving
# from t to t+1 splits f_t' at its minimizer m, shifts the left part by
# lo_t and the right part by hi_t, inserts a zero-derivative piece on
# [m + lo_t, m + hi_t], adds z - y_{t+1}, and clips to the node bounds.
# Backtracking clips each stored minimizer into the window left open by
# the next node.
# ---------------------------------------------------------------------------


def _chain_project_py(y, lb, ub, lo, hi):
    n = y.shape[0]
    cap = 3 * n + 8
    s0 = np.empty(cap)
    s1 = np.empty(cap)
    c = np.empty(cap)
    d = np.empty(cap)
    t0 = np.empty(cap)
    t1 = np.empty(cap)
    tc = np.empty(cap)
    td = np.empty(cap)
    ms = np.empty(n)
    x = np.empty(n)
    k = 1
    s0[0] = lb[0]
    s1[0] = ub[0]
    c[0] = 1.0
    d[0] = -y[0]
    for t in range(n):
        if t > 0:
            m = ms[t - 1]
            a = lo[t - 1]
            b = hi[t - 1]
            j = 0
            for i in range(k):
                if s0[i] < m:
                    t0[j] = s0[i] + a
                    t1[j] = min(s1[i], m) + a
                    tc[j] = c[i]
                    td[j] = d[i] - c[i] * a
                    j += 1
            t0[j] = m + a
            t1[j] = m + b
            tc[j] = 0.0
            td[j] = 0.0
            j += 1
            for i in range(k):
                if s1[i] > m:
                    t0[j] = max(s0[i], m) + b
                    t1[j] = s1[i] + b
                    tc[j] = c[i]
                    td[j] = d[i] - c[i] * b
                    j += 1
            # add the node's own term and clip to its bounds
            k = 0
            for i in range(j):
                if t1[i] < lb[t] - 1e-12 or t0[i] > ub[t] + 1e-12:
                    continue
                lo_i = max(t0[i], lb[t])
                hi_i = min(t1[i], ub[t])
                if lo_i > hi_i:
                    if lo_i > ub[t]:
                        lo_i = ub[t]
                    hi_i = lo_i
                s0[k] = lo_i
                s1[k] = hi_i
                c[k] = tc[i] + 1.0
                d[k] = td[i] - y[t]
                k += 1
            if k == 0:
                for i in range(n):
                    x[i] = np.nan
                return x, False
        # minimizer of f_t over its domain
        m = s1[k - 1]
        if c[0] * s0[0] + d[0] >= 0.0:
            m = s0[0]
        else:
            for i in range(k):
                v1 = c[i] * s1[i] + d[i]
                if v1 >= 0.0:
                    v0 = c[i] * s0[i] + d[i]
                    if v0 >= 0.0:
                        m = s0[i]
                    else:
                        m = min(max(-d[i] / c[i], s0[i]), s1[i])
                    break
        ms[t] = m
    x[n - 1] = ms[n - 1]
    for t in range(n - 2, -1, -1):
        x[t] = min(max(ms[t], x[t + 1] - hi[t]), x[t + 1] - lo[t])
    return x, True


_chain_project_nb = njit(_chain_project_py)
_chain_project_np = _chain_project_py


# ---------------------------------------------------------------------------
# Accelerated projected gradient on the frozen-pattern surrogate
#
#   f(x) = a * |u|^2 + b.u + K * sum_e max(x[tail] - x[head], 0)^beta,
#   u = E * diff(x)
# ---------------------------------------------------------------------------


@njit
def _surrogate_nb(x, a, b, E, K, beta, edges):
    T = x.shape[0] - 1
    f = 0.0
    for t in range(T):
        u = E * (x[t + 1] - x[t])
        f += a * u * u + b[t] * u
    if K != 0.0:
        s = 0.0
        for i in range(edges.shape[0]):
            d = x[edges[i, 0]] - x[edges[i, 1]]
            if d > 0.0:
                s += d ** beta
        f += K * s
    return f


@njit
def _surrogate_grad_nb(x, a, b, E, K, beta, edges, out):
    T = x.shape[0] - 1
    for i in range(T + 1):
        out[i] = 0.0
    for t in range(T):
        u = E * (x[t + 1] - x[t])
        gu = E * (2.0 * a * u + b[t])
        out[t + 1] += gu
        out[t] -= gu
    if K != 0.0:
        for i in range(edges.shape[0]):
            d = x[edges[i, 0]] - x[edges[i, 1]]
            if d > 0.0:
                c = K * beta * d ** (beta - 1.0)
                out[edges[i, 0]] += c
                out[edges[i, 1]] -= c


@njit
def _apg_nb(x0, a, b, E, K, beta, edges, lb, ub, lo, hi, tol, max_iter):
    n = x0.shape[0]
    x = _chain_project_nb(x0, lb, ub, lo, hi)[0]
    y = x.copy()
    gy = np.empty(n)
    fx = _surrogate_nb(x, a, b, E, K, beta, edges)
    L = 1.0
    tk = 1.0
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        fy = _surrogate_nb(y, a, b, E, K, beta, edges)
        _surrogate_grad_nb(y, a, b, E, K, beta, edges, gy)
        while True:
            z = _chain_project_nb(y - gy / L, lb, ub, lo, hi)[0]
            fz = _surrogate_nb(z, a, b, E, K, beta, edges)
            lin = 0.0
            sq = 0.0
            for i in range(n):
                dz = z[i] - y[i]
                lin += gy[i] * dz
                sq += dz * dz
            if fz <= fy + lin + 0.5 * L * sq + 1e-13 * abs(fy) or L > 1e30:
                break
            L *= 2.0
        if fz > fx:
            # adaptive restart: drop momentum and retry from x
            if tk == 1.0:
                converged = True
                break
            y[:] = x
            tk = 1.0
            continue
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * tk * tk))
        step = 0.0
        for i in range(n):
            step = max(step, abs(z[i] - x[i]))
            y[i] = z[i] + ((tk - 1.0) / t_next) * (z[i] - x[i])
        x = z
        fx = fz
        tk = t_next
        L *= 0.9
        if step < tol:
            converged = True
            break
    return x, it, converged


def _surrogate_np(x, a, b, E, K, beta, edges):
    u = E * np.diff(x)
    f = a * float(u @ u) + float(b @ u)
    if K != 0.0 and len(edges):
        d = x[edges[:, 0]] - x[edges[:, 1]]
        f += K * float(np.sum(np.maximum(d, 0.0) ** beta))
    return f


def _surrogate_grad_np(x, a, b, E, K, beta, edges):
    u = E * np.diff(x)
    gu = E * (2.0 * a * u + b)
    out = np.zeros_like(x)
    out[1:] += gu
    out[:-1] -= gu
    if K != 0.0 and len(edges):
        d = np.maximum(x[edges[:, 0]] - x[edges[:, 1]], 0.0)
        c = K * beta * d ** (beta - 1.0)
        np.add.at(out, edges[:, 0], c)
        np.add.at(out, edges[:, 1], -c)
    return out


def _apg_np(x0, a, b, E, K, beta, edges, lb, ub, lo, hi, tol, max_iter):
    def proj(v):
        return _chain_project_np(v, lb, ub, lo, hi)[0]

    x = proj(x0)
    y = x.copy()
    fx = _surrogate_np(x, a, b, E, K, beta, edges)
    L, tk = 1.0, 1.0
    for it in range(1, max_iter + 1):
        fy = _surrogate_np(y, a, b, E, K, beta, edges)
        gy = _surrogate_grad_np(y, a, b, E, K, beta, edges)
        while True:
            z = proj(y - gy / L)
            fz = _surrogate_np(z, a, b, E, K, beta, edges)
            dz = z - y
            if fz <= fy + gy @ dz + 0.5 * L * (dz @ dz) + 1e-13 * abs(fy) or L > 1e30:
                break
            L *= 2.0
        if fz > fx:
            if tk == 1.0:
                return x, it, True
            y = x.copy()
            tk = 1.0
            continue
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * tk * tk))
        step = float(np.max(np.abs(z - x)))
        y = z + ((tk - 1.0) / t_next) * (z - x)
        x, fx, tk = z, fz, t_next
        L *= 0.9
        if step < tol:
            return x, it, True
    return x, max_iter, False


# ---------------------------------------------------------------------------
# Exhaustive grid search over storage schedules (test oracle, T <= 4)
# ---------------------------------------------------------------------------


@njit
def _grid_search_nb(grid, T, D, a_g, b_g, g_min, g_max, u_min, u_max, E, x_o, K, beta):
    n = grid.shape[0]
    free = T - 1
    idx = np.zeros(free, dtype=np.int64)
    u = np.empty(T)
    x = np.empty(T + 1)
    best = np.inf
    best_u = np.zeros(T)
    total = 1
    for _ in range(free):
        total *= n
    for _ in range(total):
        s = 0.0
        for i in range(free):
            u[i] = grid[idx[i]]
            s += u[i]
        u[T - 1] = -s
        ok = u_min - 1e-12 <= u[T - 1] <= u_max + 1e-12
        if ok:
            x[0] = x_o
            for t in range(T):
                x[t + 1] = x[t] + u[t] / E
                g = D[t] + u[t]
                if g < g_min - 1e-12 or g > g_max + 1e-12:
                    ok = False
                    break
                if x[t + 1] < -1e-12 or x[t + 1] > 1.0 + 1e-12:
                    ok = False
                    break
        if ok:
            x[T] = x_o
            f = 0.0
            for t in range(T):
                g = D[t] + u[t]
                f += a_g * g * g + b_g * g
            if K != 0.0:
                f += K * _cycle_power_sum_nb(x, beta)
            if f < best:
                best = f
                best_u[:] = u
        # odometer increment
        for i in range(free):
            idx[i] += 1
            if idx[i] < n:
                break
            idx[i] = 0
    return best, best_u


def _grid_search_np(grid, T, D, a_g, b_g, g_min, g_max, u_min, u_max, E, x_o, K, beta):
    free = T - 1
    mesh = np.meshgrid(*([grid] * free), indexing="ij")
    U = np.stack([m.ravel() for m in mesh], axis=1)
    U = np.column_stack([U, -U.sum(axis=1)])
    X = x_o + np.cumsum(U, axis=1) / E
    G = D[None, :] + U
    ok = (U[:, -1] >= u_min - 1e-12) & (U[:, -1] <= u_max + 1e-12)
    ok &= np.all((G >= g_min - 1e-12) & (G <= g_max + 1e-12), axis=1)
    ok &= np.all((X >= -1e-12) & (X <= 1.0 + 1e-12), axis=1)
    U, G = U[ok], G[ok]
    if len(U) == 0:
        return np.inf, np.zeros(T)
    f = np.sum(a_g * G * G + b_g * G, axis=1)
    if K != 0.0:
        prof = np.column_stack([np.full(len(U), x_o), x_o + np.cumsum(U[:, :-1], axis=1) / E, np.full(len(U), x_o)])
        f = f + K * np.array([_cycle_power_sum_np(p, beta) for p in prof])
    i = int(np.argmin(f))
    return float(f[i]), U[i].copy()


# ---------------------------------------------------------------------------
# Public bindings
# ---------------------------------------------------------------------------

if USE_NUMBA:
    rainflow_kernel = _rainflow_nb
    cycle_power_sum = _cycle_power_sum_nb
    dykstra = _dykstra_nb
    chain_project = _chain_project_nb
    violation = _violation_nb
    apg = _apg_nb
    surrogate = _surrogate_nb
    grid_search = _grid_search_nb
else:
    rainflow_kernel = _rainflow_np
    cycle_power_sum = _cycle_power_sum_np
    dykstra = _dykstra_np
    chain_project = _chain_project_np
    violation = _violation_np
    apg = _apg_np
    surrogate = _surrogate_np
    grid_search = _grid_search_np
