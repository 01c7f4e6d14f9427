"""Compiled bounds and the subset branch-and-bound for continuous outcomes.

Slot layout for a table with ``k`` always-reporters: slots ``0..r0-1`` hold
the control reporters in input order, slots ``r0..k-1`` hold the ``m = k - r0``
selected treated reporters.  The treated-reporter pool is sorted in
descending order and the selected values fill the free slots in that order,
so free slot ``j`` holds ``pool[j + e_j]`` with ``0 <= e_0 <= ... <= e_{m-1} <= N - m``.
A selection is therefore a monotone lattice path of offsets.

For a fixed slot pattern the difference in means is linear in the slot
values, so its exact range over all completions of a partial path comes from
a suffix dynamic programme.  Variances are bounded with consecutive windows
(minimum) and shell sets (maximum) of the sorted pool.
"""

import numpy as np
from numba import njit

from ._numerics import g_value, stat_moments

# Relative and absolute slack used whenever a bound is compared with a
# threshold, so that rounding can only make pruning less aggressive.
REL_SLACK = 1e-9
ABS_SLACK = 1e-12

STATUS_COMPLETE = 0
STATUS_STOPPED = 1
STATUS_BUDGET = 2


@njit(cache=True)
def prefix_sums(pool):
    n = pool.shape[0]
    cs = np.zeros(n + 1)
    cq = np.zeros(n + 1)
    for i in range(n):
        cs[i + 1] = cs[i] + pool[i]
        cq[i + 1] = cq[i] + pool[i] * pool[i]
    return cs, cq


@njit(cache=True)
def _pop_var(s, q, cnt):
    if cnt == 0:
        return 0.0
    mu = s / cnt
    v = q / cnt - mu * mu
    return v if v > 0.0 else 0.0


@njit(cache=True)
def window_var_min(fs, fq, nf, cs, cq, lo, hi, r):
    """Least population variance of fixed values plus ``r`` pool values.

    Candidates are ``pool[lo:hi]``; windows of consecutive sorted values are
    optimal.  Returns ``(variance, start)``.
    """
    cnt = nf + r
    if cnt == 0:
        return 0.0, lo
    best = np.inf
    arg = lo
    for a in range(lo, hi - r + 1):
        v = _pop_var(fs + cs[a + r] - cs[a], fq + cq[a + r] - cq[a], cnt)
        if v < best:
            best = v
            arg = a
    return best, arg


@njit(cache=True)
def shell_var_max(fs, fq, nf, cs, cq, lo, hi, r):
    """Largest population variance of fixed values plus ``r`` pool values.

    Shell sets (a top block and a bottom block of ``pool[lo:hi]``) are
    optimal.  Returns ``(variance, top_count)``.
    """
    cnt = nf + r
    if cnt == 0:
        return 0.0, 0
    best = -1.0
    arg = 0
    for a in range(r + 1):
        b = r - a
        s = fs + cs[lo + a] - cs[lo] + cs[hi] - cs[hi - b]
        q = fq + cq[lo + a] - cq[lo] + cq[hi] - cq[hi - b]
        v = _pop_var(s, q, cnt)
        if v > best:
            best = v
            arg = a
    return best, arg


@njit(cache=True)
def draw_fixed(bits, ctrl):
    """Counts and sums of the fixed slots split by arm."""
    r0 = ctrl.shape[0]
    ft = 0
    fc = 0
    fst = 0.0
    fqt = 0.0
    fsc = 0.0
    fqc = 0.0
    for i in range(r0):
        y = ctrl[i]
        if bits[i]:
            ft += 1
            fst += y
            fqt += y * y
        else:
            fc += 1
            fsc += y
            fqc += y * y
    return ft, fc, fst, fqt, fsc, fqc


@njit(cache=True)
def draw_var_bounds(bits, ctrl, pool, cs, cq, m):
    """VAR-scale lower and upper bounds for one slot pattern."""
    r0 = ctrl.shape[0]
    N = pool.shape[0]
    ft, fc, fst, fqt, fsc, fqc = draw_fixed(bits, ctrl)
    f1 = 0
    for j in range(m):
        f1 += bits[r0 + j]
    f0 = m - f1
    nt = ft + f1
    nc = fc + f0
    lo = 0.0
    hi = 0.0
    if nt > 0:
        lo += window_var_min(fst, fqt, ft, cs, cq, 0, N, f1)[0] / nt
        hi += shell_var_max(fst, fqt, ft, cs, cq, 0, N, f1)[0] / nt
    if nc > 0:
        lo += window_var_min(fsc, fqc, fc, cs, cq, 0, N, f0)[0] / nc
        hi += shell_var_max(fsc, fqc, fc, cs, cq, 0, N, f0)[0] / nc
    return lo, hi


@njit(cache=True)
def dim_dp(bits, r0, pool, m, nt, nc):
    """Suffix tables of the free-slot contribution to the difference in means.

    ``fmax[j, e]`` (``fmin``) is the largest (smallest) value of
    ``sum_{j' >= j} w_j' pool[j' + e_j']`` over offsets ``e <= e_j <= ...``.
    """
    N = pool.shape[0]
    E = N - m
    fmax = np.zeros((m + 1, E + 1))
    fmin = np.zeros((m + 1, E + 1))
    wt = 1.0 / nt if nt > 0 else 0.0
    wc = -1.0 / nc if nc > 0 else 0.0
    for j in range(m - 1, -1, -1):
        w = wt if bits[r0 + j] else wc
        for e in range(E, -1, -1):
            take = w * pool[j + e]
            a = take + fmax[j + 1, e]
            b = take + fmin[j + 1, e]
            if e < E:
                if fmax[j, e + 1] > a:
                    a = fmax[j, e + 1]
                if fmin[j, e + 1] < b:
                    b = fmin[j, e + 1]
            fmax[j, e] = a
            fmin[j, e] = b
    return fmax, fmin


@njit(cache=True)
def draw_dim_range(bits, ctrl, pool, m):
    """Exact range of the difference in means over all selections."""
    r0 = ctrl.shape[0]
    ft, fc, fst, fqt, fsc, fqc = draw_fixed(bits, ctrl)
    f1 = 0
    for j in range(m):
        f1 += bits[r0 + j]
    nt = ft + f1
    nc = fc + m - f1
    if nt == 0 or nc == 0:
        return 0.0, 0.0
    fmax, fmin = dim_dp(bits, r0, pool, m, nt, nc)
    base = fst / nt - fsc / nc
    return base + fmin[0, 0], base + fmax[0, 0]


@njit(cache=True)
def _sq_range(lo, hi):
    a = lo * lo
    b = hi * hi
    top = a if a > b else b
    if lo <= 0.0 <= hi:
        return 0.0, top
    return (a if a < b else b), top


@njit(cache=True)
def _ratio_ub(dmax2, var_lo):
    if var_lo > 0.0:
        return dmax2 / var_lo
    if dmax2 > 0.0:
        return np.inf
    return 0.0


@njit(cache=True)
def _ratio_lb(dmin2, var_hi):
    if var_hi > 0.0:
        return dmin2 / var_hi
    if dmin2 > 0.0:
        return np.inf
    return 0.0


@njit(cache=True)
def observed_lb(kind, n, n1, m, r0, csum, csq, os, oq, done, start, cs, cq, N, g_obs):
    """Lower bound of the observed statistic over completions of a prefix.

    ``done`` free values are fixed (sum ``os``, squares ``oq``); the rest come
    from ``pool[start:]``.
    """
    r = m - done
    if m == 0:
        return g_obs
    mc = csum / r0
    vc = _pop_var(csum, csq, r0) / r0
    smax = os + cs[start + r] - cs[start]
    smin = os + cs[N] - cs[N - r]
    dlo = smin / m - mc
    dhi = smax / m - mc
    dmin2, _ = _sq_range(dlo, dhi)
    vt = shell_var_max(os, oq, done, cs, cq, start, N, r)[0] / m
    return _ratio_lb(dmin2, vt + vc) + g_obs


@njit(cache=True)
def observed_ub(kind, n, n1, m, r0, csum, csq, os, oq, done, start, cs, cq, N, g_obs):
    """Upper bound of the observed statistic over completions of a prefix."""
    r = m - done
    if m == 0:
        return g_obs
    mc = csum / r0
    vc = _pop_var(csum, csq, r0) / r0
    smax = os + cs[start + r] - cs[start]
    smin = os + cs[N] - cs[N - r]
    _, dmax2 = _sq_range(smin / m - mc, smax / m - mc)
    vt = window_var_min(os, oq, done, cs, cq, start, N, r)[0] / m
    return _ratio_ub(dmax2, vt + vc) + g_obs


@njit(cache=True)
def max_coverage(kind, n, n1, ctrl, pool, m, bits, weights, draw_ub, t_lo, t_hi,
                 use_obs, obs_sense, stop_at, prune_below, node_budget, init_off):
    """Maximise the covered draw weight over selections.

    A draw is covered when its statistic is at least ``t_lo``.  When
    ``use_obs`` is set only selections whose observed statistic is at most
    ``t_hi`` (``obs_sense = 0``) or at least ``t_hi`` (``obs_sense = 1``) are
    feasible.  Search stops once the incumbent reaches ``stop_at``.  Nodes
    whose bound is below ``prune_below`` are discarded and their bound kept,
    so that the returned upper bound stays valid.

    Returns ``(best, offsets, status, upper, nodes)``; ``best = -1`` means no
    feasible selection was found.
    """
    N = pool.shape[0]
    r0 = ctrl.shape[0]
    E = N - m
    S = bits.shape[0]
    cs, cq = prefix_sums(pool)
    csum = 0.0
    csq = 0.0
    for i in range(r0):
        csum += ctrl[i]
        csq += ctrl[i] * ctrl[i]
    k = r0 + m
    g_obs = g_value(kind, m, n, n1, k)[0]

    # per-draw preparation
    const_cover = 0
    alive0 = np.empty(S, dtype=np.int64)
    na0 = 0
    nt_a = np.zeros(S, dtype=np.int64)
    nc_a = np.zeros(S, dtype=np.int64)
    g_a = np.zeros(S)
    vlo_a = np.zeros(S)
    st0 = np.zeros(S)
    qt0 = np.zeros(S)
    sc0 = np.zeros(S)
    qc0 = np.zeros(S)
    fmax_all = np.zeros((S, m + 1, E + 1))
    fmin_all = np.zeros((S, m + 1, E + 1))
    for s in range(S):
        b = bits[s]
        ft, fc, fst, fqt, fsc, fqc = draw_fixed(b, ctrl)
        f1 = 0
        for j in range(m):
            f1 += b[r0 + j]
        nt = ft + f1
        nc = fc + m - f1
        gs = g_value(kind, nt, n, n1, k)[0]
        if nt == 0 or nc == 0:
            if gs >= t_lo:
                const_cover += weights[s]
            continue
        if gs >= t_lo:
            const_cover += weights[s]
            continue
        if draw_ub[s] * (1.0 + REL_SLACK) + ABS_SLACK < t_lo:
            continue
        vlo, vhi = draw_var_bounds(b, ctrl, pool, cs, cq, m)
        fmax, fmin = dim_dp(b, r0, pool, m, nt, nc)
        base = fst / nt - fsc / nc
        dlo = base + fmin[0, 0]
        dhi = base + fmax[0, 0]
        dmin2, dmax2 = _sq_range(dlo, dhi)
        ub = _ratio_ub(dmax2, vlo) + gs
        if ub * (1.0 + REL_SLACK) + ABS_SLACK < t_lo:
            continue
        c = t_lo - gs
        if dmin2 > 0.0 and dmin2 * (1.0 - REL_SLACK) >= c * vhi:
            const_cover += weights[s]
            continue
        alive0[na0] = s
        na0 += 1
        nt_a[s] = nt
        nc_a[s] = nc
        g_a[s] = gs
        vlo_a[s] = vlo
        st0[s] = fst
        qt0[s] = fqt
        sc0[s] = fsc
        qc0[s] = fqc
        fmax_all[s] = fmax
        fmin_all[s] = fmin

    best = -1
    best_off = np.zeros(m, dtype=np.int64)
    status = STATUS_COMPLETE
    max_pruned = -1
    nodes = 0

    root_bound = const_cover
    for i in range(na0):
        root_bound += weights[alive0[i]]

    # stack of depths
    alive = np.empty((m + 1, na0 if na0 > 0 else 1), dtype=np.int64)
    na = np.zeros(m + 1, dtype=np.int64)
    for i in range(na0):
        alive[0, i] = alive0[i]
    na[0] = na0
    st = np.zeros((m + 1, S))
    qt = np.zeros((m + 1, S))
    sc = np.zeros((m + 1, S))
    qc = np.zeros((m + 1, S))
    st[0] = st0
    qt[0] = qt0
    sc[0] = sc0
    qc[0] = qc0
    osum = np.zeros(m + 1)
    osq = np.zeros(m + 1)
    nxt = np.zeros(m + 1, dtype=np.int64)
    bounds = np.zeros(m + 1, dtype=np.int64)
    path = np.zeros(m + 1, dtype=np.int64)
    bounds[0] = root_bound

    if m == 0:
        nodes = 1
        feasible = True
        if use_obs:
            tobs = g_obs
            feasible = (tobs <= t_hi) if obs_sense == 0 else (tobs >= t_hi)
        if feasible:
            val = const_cover
            for i in range(na0):
                s = alive0[i]
                ts = stat_moments(kind, nt_a[s], st0[s], qt0[s], nc_a[s], sc0[s], qc0[s], n, n1)[0]
                if ts >= t_lo:
                    val += weights[s]
            best = val
        upper = best
        if best >= stop_at:
            status = STATUS_STOPPED
        return best, best_off, status, upper, nodes

    # a warm start selection evaluated up front
    if init_off.shape[0] == m:
        os = 0.0
        oq = 0.0
        for j in range(m):
            v = pool[j + init_off[j]]
            os += v
            oq += v * v
        feasible = True
        if use_obs:
            tobs = stat_moments(kind, m, os, oq, r0, csum, csq, n, n1)[0]
            feasible = (tobs <= t_hi) if obs_sense == 0 else (tobs >= t_hi)
        if feasible:
            val = const_cover
            for i in range(na0):
                s = alive0[i]
                a1 = st0[s]
                a2 = qt0[s]
                a3 = sc0[s]
                a4 = qc0[s]
                for j in range(m):
                    v = pool[j + init_off[j]]
                    if bits[s, r0 + j]:
                        a1 += v
                        a2 += v * v
                    else:
                        a3 += v
                        a4 += v * v
                ts = stat_moments(kind, nt_a[s], a1, a2, nc_a[s], a3, a4, n, n1)[0]
                if ts >= t_lo:
                    val += weights[s]
            best = val
            for j in range(m):
                best_off[j] = init_off[j]
            if best >= stop_at:
                return best, best_off, STATUS_STOPPED, best, nodes

    if root_bound < prune_below:
        upper = root_bound if root_bound > best else best
        return best, best_off, status, upper, nodes
    if root_bound <= best:
        return best, best_off, status, best, nodes

    d = 0
    nxt[0] = 0
    while d >= 0:
        e = nxt[d]
        if e > E:
            d -= 1
            continue
        nxt[d] = e + 1
        nodes += 1
        if nodes > node_budget:
            status = STATUS_BUDGET
            break
        v = pool[d + e]
        os = osum[d] + v
        oq = osq[d] + v * v
        leaf = d + 1 == m
        if use_obs:
            if leaf:
                tobs = stat_moments(kind, m, os, oq, r0, csum, csq, n, n1)[0]
                if obs_sense == 0:
                    if not tobs <= t_hi:
                        continue
                elif not tobs >= t_hi:
                    continue
            elif obs_sense == 0:
                lb = observed_lb(kind, n, n1, m, r0, csum, csq, os, oq, d + 1, d + 1 + e,
                                 cs, cq, N, g_obs)
                if lb * (1.0 - REL_SLACK) - ABS_SLACK > t_hi:
                    continue
            else:
                ubo = observed_ub(kind, n, n1, m, r0, csum, csq, os, oq, d + 1, d + 1 + e,
                                  cs, cq, N, g_obs)
                if ubo * (1.0 + REL_SLACK) + ABS_SLACK < t_hi:
                    continue
        bound = const_cover
        cnt = 0
        for i in range(na[d]):
            s = alive[d, i]
            a1 = st[d, s]
            a2 = qt[d, s]
            a3 = sc[d, s]
            a4 = qc[d, s]
            if bits[s, r0 + d]:
                a1 += v
                a2 += v * v
            else:
                a3 += v
                a4 += v * v
            if leaf:
                ts = stat_moments(kind, nt_a[s], a1, a2, nc_a[s], a3, a4, n, n1)[0]
                if ts >= t_lo:
                    bound += weights[s]
                continue
            base = a1 / nt_a[s] - a3 / nc_a[s]
            lo = base + fmin_all[s, d + 1, e]
            hi = base + fmax_all[s, d + 1, e]
            sq_lo = lo * lo
            sq_hi = hi * hi
            dmax2 = sq_lo if sq_lo > sq_hi else sq_hi
            ub = _ratio_ub(dmax2, vlo_a[s]) + g_a[s]
            if ub * (1.0 + REL_SLACK) + ABS_SLACK >= t_lo:
                alive[d + 1, cnt] = s
                cnt += 1
                st[d + 1, s] = a1
                qt[d + 1, s] = a2
                sc[d + 1, s] = a3
                qc[d + 1, s] = a4
                bound += weights[s]
        path[d] = e
        if leaf:
            if bound > best:
                best = bound
                for j in range(m):
                    best_off[j] = path[j]
                if best >= stop_at:
                    status = STATUS_STOPPED
                    break
            continue
        if bound <= best:
            continue
        if bound < prune_below:
            if bound > max_pruned:
                max_pruned = bound
            continue
        na[d + 1] = cnt
        osum[d + 1] = os
        osq[d + 1] = oq
        bounds[d + 1] = bound
        d += 1
        nxt[d] = e

    upper = best
    if max_pruned > upper:
        upper = max_pruned
    if status == STATUS_BUDGET:
        for j in range(d + 1):
            if bounds[j] > upper:
                upper = bounds[j]
    return best, best_off, status, upper, nodes


@njit(cache=True)
def offsets_to_values(pool, off):
    m = off.shape[0]
    out = np.empty(m)
    for j in range(m):
        out[j] = pool[j + off[j]]
    return out
