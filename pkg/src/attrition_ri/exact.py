"""Exact worst-case p-values for outcomes with few distinct values.

With support ``v_1 < ... < v_K`` the statistic depends on a table only
through the count vector ``c`` of always-reporters at each value, and on an
assignment only through the treated split ``t`` (``0 <= t_k <= c_k``).  The
split has an explicit law, so every table p-value is a finite sum.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _numerics as nx
from . import randomization as rz
from ._exactness import as_fraction
from .core import Dataset, build_family
from .decision import Decision, KDiagnostic
from .errors import InfeasibleCounts, SupportTooLarge
from .pretest import PruneResult, prune
from .statistics import StatKind, outcome_reference

DEFAULT_MAX_SUPPORT = 6
DEFAULT_LATTICE_LIMIT = 10_000_000


@dataclass(frozen=True)
class Support:
    values: tuple

    @property
    def K(self) -> int:
        return len(self.values)

    def index(self, y: float) -> int:
        return self.values.index(y)


@dataclass(frozen=True)
class CountVector:
    counts: tuple

    @property
    def nA(self) -> int:
        return sum(self.counts)


@dataclass(frozen=True)
class TreatedSplit:
    treated: tuple

    @property
    def nA1(self) -> int:
        return sum(self.treated)


@dataclass(frozen=True)
class SupportLayout:
    """Per-value counts of control reporters and treated reporters."""

    support: Support
    control: tuple
    free: tuple
    reference: float


def support_of(dataset: Dataset, max_support: int = DEFAULT_MAX_SUPPORT) -> Support:
    values = tuple(sorted(set(dataset.observed_outcomes())))
    if len(values) > max_support:
        raise SupportTooLarge(f"{len(values)} distinct outcomes exceed the limit of {max_support}")
    return Support(values)


def layout(dataset: Dataset, max_support: int = DEFAULT_MAX_SUPPORT) -> SupportLayout:
    sup = support_of(dataset, max_support)
    build_family(dataset)
    control = [0] * sup.K
    free = [0] * sup.K
    for y, d, r in zip(dataset.outcomes, dataset.assignments, dataset.reports):
        if not r:
            continue
        (free if d else control)[sup.index(y)] += 1
    return SupportLayout(sup, tuple(control), tuple(free),
                         outcome_reference(dataset.outcomes))


def count_vectors(dataset: Dataset, prune_result: Optional[PruneResult] = None,
                  max_support: int = DEFAULT_MAX_SUPPORT) -> list:
    """All count vectors of admissible tables, in lexicographic order."""
    lay = layout(dataset, max_support)
    allowed = None if prune_result is None else set(prune_result.admissible)
    out = []
    for extra in itertools.product(*(range(f + 1) for f in lay.free)):
        if allowed is not None and sum(extra) not in allowed:
            continue
        out.append(CountVector(tuple(c + e for c, e in zip(lay.control, extra))))
    return out


def split_pmf(c: CountVector, split: TreatedSplit, n: int, n1: int) -> float:
    counts, treated = c.counts, split.treated
    if len(counts) != len(treated):
        raise InfeasibleCounts("count vector and split differ in length")
    if any(not 0 <= t <= k for t, k in zip(treated, counts)):
        return 0.0
    nA, nA1 = c.nA, split.nA1
    if rz.exact_arithmetic_ok(n, n1):
        num = rz.comb(n - nA, n1 - nA1)
        for k, t in zip(counts, treated):
            num *= rz.comb(k, t)
        return num / math.comb(n, n1)
    logw = rz.log_comb(n - nA, n1 - nA1) - rz.log_comb(n, n1)
    logw += sum(rz.log_comb(k, t) for k, t in zip(counts, treated))
    return math.exp(logw)


def _lattice(counts) -> np.ndarray:
    grids = np.meshgrid(*[np.arange(k + 1) for k in counts], indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)


def _split_stats(kind: StatKind, splits: np.ndarray, counts, values, n: int, n1: int) -> np.ndarray:
    cnt = np.asarray(counts, dtype=np.int64)
    nt = splits.sum(axis=1)
    nc = cnt.sum() - nt
    st = np.zeros(len(splits))
    qt = np.zeros(len(splits))
    sc = np.zeros(len(splits))
    qc = np.zeros(len(splits))
    for k, v in enumerate(values):
        t = splits[:, k].astype(np.float64)
        ctl = (cnt[k] - splits[:, k]).astype(np.float64)
        vv = v * v
        st += v * t
        qt += vv * t
        sc += v * ctl
        qc += vv * ctl
    return nx.stat_moments_array(kind.value, nt, st, qt, nc, sc, qc, n, n1)


def _split_weights(splits: np.ndarray, counts, n: int, n1: int):
    """Assignment counts per split (exact int64) or probabilities (float)."""
    nA = int(sum(counts))
    nt = splits.sum(axis=1)
    if rz.exact_arithmetic_ok(n, n1):
        w = np.array([rz.comb(n - nA, n1 - int(j)) for j in range(nA + 1)], dtype=np.int64)[nt]
        for k, ck in enumerate(counts):
            table = np.array([rz.comb(ck, t) for t in range(ck + 1)], dtype=np.int64)
            w = w * table[splits[:, k]]
        return w, math.comb(n, n1)
    logw = np.array([rz.log_comb(n - nA, n1 - int(j)) for j in range(nA + 1)])[nt]
    for k, ck in enumerate(counts):
        table = np.array([rz.log_comb(ck, t) for t in range(ck + 1)])
        logw = logw + table[splits[:, k]]
    return np.exp(logw - rz.log_comb(n, n1)), None


@dataclass(frozen=True)
class CountPValue:
    """Table p-value; ``num/den`` is exact when ``den`` is not ``None``."""

    p: float
    num: Optional[int] = None
    den: Optional[int] = None
    exact: bool = True

    def le(self, level) -> bool:
        if self.den is not None:
            level = as_fraction(level)
            return self.num * level.denominator <= level.numerator * self.den
        return self.p <= float(level)


def exact_p_counts(kind, c: CountVector, dataset: Dataset, *, lay: Optional[SupportLayout] = None,
                   lattice_limit: int = DEFAULT_LATTICE_LIMIT, n_mc: int = 10_000,
                   seed: int = 0) -> CountPValue:
    """p-value of any table with count vector ``c``.

    The observed split puts every extra always-reporter (beyond the control
    reporters) in the treated arm.
    """
    kind = StatKind.parse(kind)
    lay = layout(dataset) if lay is None else lay
    n, n1 = dataset.n, dataset.n1
    counts = c.counts
    observed = tuple(ck - ctl for ck, ctl in zip(counts, lay.control))
    if any(t < 0 or t > f for t, f in zip(observed, lay.free)):
        raise InfeasibleCounts("count vector is not realised by any compatible table")
    values = [v - lay.reference for v in lay.support.values]
    size = math.prod(k + 1 for k in counts)
    if size > lattice_limit:
        return _mc_p_counts(kind, counts, observed, values, n, n1, n_mc, seed)
    splits = _lattice(counts)
    stats = _split_stats(kind, splits, counts, values, n, n1)
    obs_index = int(np.ravel_multi_index(observed, [k + 1 for k in counts]))
    mask = stats >= stats[obs_index]
    weights, den = _split_weights(splits, counts, n, n1)
    if den is not None:
        num = int(weights[mask].sum())
        return CountPValue(num / den, num, den)
    return CountPValue(min(1.0, float(math.fsum(weights[mask]))))


def _mc_p_counts(kind, counts, observed, values, n, n1, n_mc, seed) -> CountPValue:
    nA = int(sum(counts))
    groups = np.repeat(np.arange(len(counts)), counts)
    draws = rz.induced_matrix(n, n1, nA, seed, range(n_mc))
    splits = np.zeros((n_mc, len(counts)), dtype=np.int64)
    for k in range(len(counts)):
        splits[:, k] = draws[:, groups == k].sum(axis=1)
    stats = _split_stats(kind, np.vstack([splits, np.array([observed])]), counts, values, n, n1)
    hits = int((stats[:-1] >= stats[-1]).sum())
    return CountPValue(hits / n_mc, hits, n_mc, exact=False)


def worst_case_small_support(kind, dataset: Dataset, alpha: float, beta: float, side="two", *,
                             max_support: int = DEFAULT_MAX_SUPPORT,
                             lattice_limit: int = DEFAULT_LATTICE_LIMIT,
                             n_mc: int = 10_000, seed: int = 0,
                             early_exit: bool = True) -> Decision:
    """Reject iff every admissible count vector has p-value at most alpha - beta."""
    start = time.perf_counter()
    kind = StatKind.parse(kind)
    family = build_family(dataset)
    lay = layout(dataset, max_support)
    pr = prune(family, beta, side)
    level = as_fraction(alpha) - as_fraction(beta)
    vectors = count_vectors(dataset, pr, max_support)

    per_k: dict = {}
    worst: Optional[CountPValue] = None
    stopped = False
    all_exact = True
    for idx, c in enumerate(vectors):
        res = exact_p_counts(kind, c, dataset, lay=lay, lattice_limit=lattice_limit,
                             n_mc=n_mc, seed=rz.RngStream(seed).child(idx).seed)
        all_exact &= res.exact
        diag = per_k.setdefault(c.nA, KDiagnostic(c.nA, 0.0, 0.0, True))
        if res.p > diag.p_upper:
            diag.p_heuristic = diag.p_upper = res.p
        diag.certified = diag.certified and res.exact
        if worst is None or res.p > worst.p:
            worst = res
        if early_exit and not res.le(level):
            stopped = idx < len(vectors) - 1
            break

    # an empty admissible set rejects: the pretest alone has level beta
    reject = worst is None or worst.le(level)
    worst_p = None if worst is None else worst.p
    notes = []
    if not vectors:
        notes.append("pretest removed every cardinality")
    if stopped:
        notes.append("stopped at the first count vector exceeding alpha - beta")
    runtime = (time.perf_counter() - start) * 1000.0
    return Decision(
        reject=reject, mode="exact", kind=kind.label, alpha=alpha, beta=beta,
        worst_p_lower=worst_p, worst_p_upper=None if stopped else worst_p,
        per_k=[per_k[k] for k in sorted(per_k)], seed=seed, runtime_ms=runtime,
        config={"pretest_side": pr.side.value, "max_support": max_support,
                "admissible_k": list(pr.cardinalities(family.r0)),
                "count_vectors": len(vectors), "exact": all_exact},
        notes=notes,
    )
