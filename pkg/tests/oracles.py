"""Brute-force reference computations used by the tests.

Everything here enumerates: assignments via `enumerate_cr`, tables via
`TableFamily.members`, selections via `itertools.combinations`.
"""

import itertools
import math
from fractions import Fraction

import numpy as np

from attrition_ri import randomization as rz
from attrition_ri.core import Dataset, build_family
from attrition_ri.statistics import stat


def random_dataset(rng, n, binary=False, support=None, p_report=0.75):
    """Random valid dataset with at least one control reporter."""
    while True:
        n1 = int(rng.integers(1, n))
        d = np.zeros(n, dtype=int)
        d[rng.choice(n, n1, replace=False)] = 1
        r = (rng.random(n) < p_report).astype(int)
        if not ((d == 0) & (r == 1)).any():
            continue
        if support is not None:
            y = rng.choice(support, n)
        elif binary:
            y = rng.integers(0, 2, n).astype(float)
        else:
            y = np.round(rng.normal(size=n), 3)
        outcomes = [float(v) if rr else None for v, rr in zip(y, r)]
        return Dataset(tuple(outcomes), tuple(int(x) for x in d), tuple(int(x) for x in r))


def table_p_fraction(kind, data, table):
    """Exact enumeration p-value of one table as a Fraction."""
    A = table.indicators
    t_obs = stat(kind, data, data.assignments, A).value
    hits = total = 0
    for D in rz.enumerate_cr(data.n, data.n1):
        total += 1
        if stat(kind, data, D.bits, A).value >= t_obs:
            hits += 1
    return Fraction(hits, total)


def worst_p_fraction(kind, data, sizes=None):
    """Max enumeration p-value over compatible tables with size in ``sizes``."""
    fam = build_family(data)
    best = None
    for table in fam.members():
        if sizes is not None and table.size not in sizes:
            continue
        p = table_p_fraction(kind, data, table)
        if best is None or p > best:
            best = p
    return best


def selections(problem):
    """Every offset vector of a slot problem (all subsets of the pool)."""
    m, N = problem.m, problem.N
    for chosen in itertools.combinations(range(N), m):
        yield np.array([c - j for j, c in enumerate(chosen)], dtype=np.int64)


def variance_pop(x):
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return 0.0
    return float(np.mean((x - x.mean()) ** 2))


def comb_weighted_p(stats, weights, t):
    return Fraction(int(sum(w for s, w in zip(stats, weights) if s >= t)), int(sum(weights)))


def hypergeom_oracle(n, n1, nA, k):
    """P(k treated among the first nA units) by counting assignments."""
    hits = total = 0
    for D in rz.enumerate_cr(n, n1):
        total += 1
        hits += sum(D.bits[:nA]) == k
    return Fraction(hits, total)


def log_comb_exact(n, k):
    return math.log(math.comb(n, k))
