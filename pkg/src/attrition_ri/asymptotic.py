"""Inference against quantiles of the limit law ``Z^2 + g(nA1)``.

Under the null the studentized statistic behaves like a squared standard
normal plus the count-balance penalty evaluated at the (hypergeometric)
number of treated always-reporters.  The CDF of that mixture is a finite
sum of chi-square(1) CDFs, so quantiles are found by bisection.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from . import randomization as rz
from ._exactness import as_fraction
from ._numerics import g_value
from .bounds import make_problem
from .continuous import (DEFAULT_NODE_BUDGET, DEFAULT_TOL, observed_at_least,
                         observed_at_most, stat_max_refine, stat_min_bisect)
from .core import Dataset, build_family
from .decision import Decision, KDiagnostic
from .errors import InvariantViolation
from .pretest import prune
from .statistics import StatKind

QUANTILE_TOL = 1e-10
VARIANTS = ("min", "max")


def chi2_cdf1(t: float) -> float:
    """P(Z^2 <= t) for a standard normal Z."""
    if not t > 0.0:
        return 0.0
    if math.isinf(t):
        return 1.0
    return math.erf(math.sqrt(t / 2.0))


@dataclass(frozen=True)
class MixtureSpec:
    kind: StatKind
    n: int
    n1: int
    nA: int
    level: float

    def __post_init__(self):
        object.__setattr__(self, "kind", StatKind.parse(self.kind))
        if not 0.0 < self.level < 1.0:
            raise InvariantViolation("level must lie in (0, 1)")
        if not 0 <= self.nA <= self.n:
            raise InvariantViolation("need 0 <= nA <= n")


def _mixture_parts(spec: MixtureSpec):
    pmf = rz.nA1_pmf_vector(spec.n, spec.n1, spec.nA)
    g = np.array([g_value(spec.kind.value, j, spec.n, spec.n1, spec.nA)[0]
                  for j in range(spec.nA + 1)])
    keep = pmf > 0
    return pmf[keep], g[keep]


def mixture_cdf(spec: MixtureSpec, t: float) -> float:
    pmf, g = _mixture_parts(spec)
    return _cdf(pmf, g, t)


def _cdf(pmf, g, t) -> float:
    return math.fsum(p * chi2_cdf1(t - gj) for p, gj in zip(pmf, g))


def mixture_quantile(spec: MixtureSpec) -> float:
    """Solve ``F(t) = level`` for the mixture CDF ``F`` by bisection."""
    pmf, g = _mixture_parts(spec)
    level = spec.level
    tail = 1.0 - level
    lo = 0.0
    hi = float(chi2.ppf(1.0 - tail / 2.0, 1)) + 2.0 / tail + 1.0
    # the bracket assumes a bounded penalty; widen it when it does not hold
    while _cdf(pmf, g, hi) < level:
        lo, hi = hi, 2.0 * hi
    if _cdf(pmf, g, lo) >= level:
        return lo
    while True:
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            return hi
        f = _cdf(pmf, g, mid)
        if abs(f - level) <= QUANTILE_TOL:
            return mid
        if f < level:
            lo = mid
        else:
            hi = mid


def _exceeds_min(problem, q, tol, node_budget):
    """Does every selection's observed statistic exceed ``q``?"""
    mr = stat_min_bisect(problem, tol, node_budget)
    extra = {"stat_lower": mr.lower, "stat_witness": mr.witness_stat}
    if mr.lower > q:
        return True, True, extra
    if mr.witness_stat <= q:
        return False, True, extra
    res = observed_at_most(problem, q, node_budget)
    if res.status == "unknown":
        return False, False, extra
    return res.status == "infeasible", True, extra


def _exceeds_max(problem, q, node_budget):
    """Does some selection's observed statistic exceed ``q``?"""
    upper = stat_max_refine(problem, problem.observed_bits(), None, node_budget)
    extra = {"stat_upper": upper}
    if not upper > q:
        return False, True, extra
    res = observed_at_least(problem, float(np.nextafter(q, np.inf)), node_budget)
    if res.status == "unknown":
        return False, False, extra
    return res.status == "feasible", True, extra


def asymptotic_decision(kind, dataset: Dataset, alpha: float, beta: float, variant: str = "min",
                        *, side="two", tol: float = DEFAULT_TOL,
                        node_budget: int = DEFAULT_NODE_BUDGET, seed=None) -> Decision:
    """Reject iff, for every admissible size ``k``, the extremal observed
    statistic exceeds the ``1 - alpha + beta`` quantile of the limit law.

    ``variant='min'`` requires every table of size ``k`` to exceed the
    quantile; ``variant='max'`` only requires one.
    """
    if variant not in VARIANTS:
        raise InvariantViolation(f"variant must be one of {VARIANTS}")
    start = time.perf_counter()
    kind = StatKind.parse(kind)
    fam = build_family(dataset)
    pr = prune(fam, beta, side)
    level = float(1 - as_fraction(alpha) + as_fraction(beta))
    ks = pr.cardinalities(fam.r0)
    reject = True
    per_k = []
    notes = []
    for k in ks:
        q = mixture_quantile(MixtureSpec(kind, dataset.n, dataset.n1, k, level))
        problem = make_problem(dataset, k, kind)
        if variant == "min":
            ok, certified, extra = _exceeds_min(problem, q, tol, node_budget)
        else:
            ok, certified, extra = _exceeds_max(problem, q, node_budget)
        extra["quantile"] = q
        per_k.append(KDiagnostic(k, None, None, certified, extra))
        if not certified:
            notes.append(f"comparison at k={k} hit the node budget")
        if not ok:
            reject = False
            break
    if not ks:
        notes.append("pretest removed every cardinality")
    runtime = (time.perf_counter() - start) * 1000.0
    return Decision(
        reject=bool(reject), mode="asymptotic", kind=kind.label, alpha=alpha, beta=beta,
        worst_p_lower=None, worst_p_upper=None, per_k=per_k, seed=seed, runtime_ms=runtime,
        config={"variant": variant, "pretest_side": pr.side.value, "tol": tol,
                "node_budget": node_budget, "admissible_k": list(ks)},
        notes=notes,
    )
