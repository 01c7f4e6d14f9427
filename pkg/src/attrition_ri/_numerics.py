"""Compiled scalar arithmetic shared by every evaluation path.

The statistic is evaluated from per-arm moments ``(count, sum, sum of
squares)``.  Keeping one compiled implementation means that unit-level,
count-level and solver-level evaluations agree bit for bit whenever they are
fed identical moments.
"""

import numpy as np
from numba import njit

KIND_T0 = 0
KIND_T1 = 1
KIND_T2 = 2


@njit(cache=True)
def var_dim_value(n, n1, nA):
    n0 = n - n1
    share = nA / n
    return (n * n) / (n1 * n0 * (n - 1)) * (share - share * share)


@njit(cache=True)
def dim_counts(nA1, n, n1, nA):
    return nA1 / n1 - (nA - nA1) / (n - n1)


@njit(cache=True)
def g_value(kind, nA1, n, n1, nA):
    """Count-balance penalty; returns ``(value, degenerate)``."""
    if kind == KIND_T0:
        return 0.0, False
    d = dim_counts(nA1, n, n1, nA)
    if kind == KIND_T2:
        d = -d if d < 0.0 else 0.0
    v = var_dim_value(n, n1, nA)
    num = d * d
    if v == 0.0:
        if num == 0.0:
            return 0.0, False
        return np.inf, True
    return num / v, False


@njit(cache=True)
def hajek_terms(nt, st, qt, nc, sc, qc):
    """Hajek difference and its variance from arm moments.

    Returns ``(dim, var)``; both are 0 when an arm is empty.
    """
    if nt == 0 or nc == 0:
        return 0.0, 0.0
    mt = st / nt
    mc = sc / nc
    vt = qt / nt - mt * mt
    vc = qc / nc - mc * mc
    if vt < 0.0:
        vt = 0.0
    if vc < 0.0:
        vc = 0.0
    return mt - mc, vt / nt + vc / nc


@njit(cache=True)
def studentized_sq(nt, st, qt, nc, sc, qc):
    """Squared studentized Hajek term; returns ``(value, degenerate)``."""
    if nt == 0 or nc == 0:
        return 0.0, False
    dim, var = hajek_terms(nt, st, qt, nc, sc, qc)
    num = dim * dim
    if var == 0.0:
        if num == 0.0:
            return 0.0, False
        return np.inf, True
    return num / var, False


@njit(cache=True)
def stat_moments(kind, nt, st, qt, nc, sc, qc, n, n1):
    h, f1 = studentized_sq(nt, st, qt, nc, sc, qc)
    gv, f2 = g_value(kind, nt, n, n1, nt + nc)
    return h + gv, f1 or f2


@njit(cache=True)
def stat_moments_array(kind, nt, st, qt, nc, sc, qc, n, n1):
    m = nt.shape[0]
    out = np.empty(m)
    for i in range(m):
        out[i] = stat_moments(kind, nt[i], st[i], qt[i], nc[i], sc[i], qc[i], n, n1)[0]
    return out


@njit(cache=True)
def stat_slots(kind, bits, vals, n, n1):
    """Statistic of one slot pattern with slot outcomes ``vals``.

    Sums accumulate in slot order, the convention used by the solvers.
    """
    nt = 0
    nc = 0
    st = 0.0
    qt = 0.0
    sc = 0.0
    qc = 0.0
    for i in range(vals.shape[0]):
        y = vals[i]
        if bits[i]:
            nt += 1
            st += y
            qt += y * y
        else:
            nc += 1
            sc += y
            qc += y * y
    return stat_moments(kind, nt, st, qt, nc, sc, qc, n, n1)[0]


@njit(cache=True)
def stat_slots_matrix(kind, bits, vals, n, n1):
    s = bits.shape[0]
    out = np.empty(s)
    for r in range(s):
        out[r] = stat_slots(kind, bits[r], vals, n, n1)
    return out
