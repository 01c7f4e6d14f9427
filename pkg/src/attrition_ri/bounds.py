"""Certified bounds on the statistic's building blocks for one slot pattern.

All functions take a `SlotProblem` (the observed data arranged into
always-reporter slots for a fixed table size ``k``) and a 0/1 slot pattern.
Variance quantities are on the VAR scale, i.e. each arm contributes its
population variance divided by its size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _bnb
from ._numerics import g_value
from .core import Dataset, build_family
from .errors import InvariantViolation
from .statistics import StatKind, outcome_reference


@dataclass(frozen=True)
class SlotProblem:
    """Observed data arranged for tables with ``k`` always-reporters.

    ``ctrl`` holds the control-reporter outcomes in input order and ``pool``
    the treated-reporter outcomes sorted in descending order, both shifted by
    ``reference``.  ``pool_units[j]`` is the input index of ``pool[j]``.
    """

    kind: StatKind
    n: int
    n1: int
    k: int
    ctrl: np.ndarray
    pool: np.ndarray
    pool_units: tuple
    ctrl_units: tuple
    reference: float

    @property
    def r0(self) -> int:
        return self.ctrl.shape[0]

    @property
    def m(self) -> int:
        return self.k - self.r0

    @property
    def N(self) -> int:
        return self.pool.shape[0]

    @property
    def E(self) -> int:
        return self.N - self.m

    def observed_bits(self) -> np.ndarray:
        bits = np.zeros(self.k, dtype=np.uint8)
        bits[self.r0:] = 1
        return bits

    def g(self, nA1: int) -> float:
        return g_value(self.kind.value, nA1, self.n, self.n1, self.k)[0]

    def values(self, offsets) -> np.ndarray:
        """Slot outcomes for a selection given by lattice offsets."""
        sel = _bnb.offsets_to_values(self.pool, np.asarray(offsets, dtype=np.int64))
        return np.concatenate([self.ctrl, sel])

    def units(self, offsets) -> tuple:
        """Input indices of the treated reporters chosen by ``offsets``."""
        return tuple(self.pool_units[j + int(e)] for j, e in enumerate(offsets))


def make_problem(dataset: Dataset, k: int, kind="t0") -> SlotProblem:
    fam = build_family(dataset)
    if not fam.r0 <= k <= fam.r0 + fam.n_free:
        raise InvariantViolation(f"table size {k} outside [{fam.r0}, {fam.r0 + fam.n_free}]")
    ref = outcome_reference(dataset.outcomes)
    ctrl = np.array([dataset.outcomes[i] - ref for i in fam.fixed_ones])
    free = [(dataset.outcomes[i] - ref, i) for i in fam.free_indices]
    # descending by value; ties keep input order
    free.sort(key=lambda t: -t[0])
    pool = np.array([v for v, _ in free], dtype=np.float64)
    return SlotProblem(StatKind.parse(kind), dataset.n, dataset.n1, k, ctrl, pool,
                       tuple(i for _, i in free), fam.fixed_ones, ref)


@dataclass(frozen=True)
class BoundPair:
    lo: float
    hi: float
    exact: bool = False


def _check_bits(problem: SlotProblem, bits) -> np.ndarray:
    b = np.ascontiguousarray(bits, dtype=np.uint8)
    if b.shape != (problem.k,):
        raise InvariantViolation(f"slot pattern must have length {problem.k}")
    return b


def _arm_layout(problem: SlotProblem, b: np.ndarray):
    r0 = problem.r0
    fixed_t = problem.ctrl[b[:r0] == 1]
    fixed_c = problem.ctrl[b[:r0] == 0]
    f1 = int(b[r0:].sum())
    return fixed_t, fixed_c, f1, problem.m - f1


def dim2_bounds(bits, problem: SlotProblem) -> BoundPair:
    """Analytic bounds on the squared difference in means.

    The treated arm takes the largest free outcomes and the control arm the
    smallest for the upper end, and the reverse for the lower end.
    """
    b = _check_bits(problem, bits)
    fixed_t, fixed_c, f1, f0 = _arm_layout(problem, b)
    nt, nc = fixed_t.size + f1, fixed_c.size + f0
    if nt == 0 or nc == 0:
        return BoundPair(0.0, 0.0, True)
    asc = problem.pool[::-1]
    top = lambda r: problem.pool[:r].sum()
    bottom = lambda r: asc[:r].sum()
    upper = (fixed_t.sum() + top(f1)) / nt - (fixed_c.sum() + bottom(f0)) / nc
    lower = (fixed_t.sum() + bottom(f1)) / nt - (fixed_c.sum() + top(f0)) / nc
    if lower <= 0.0 <= upper:
        return BoundPair(0.0, max(lower * lower, upper * upper), problem.m == 0)
    lo_sq, hi_sq = sorted((lower * lower, upper * upper))
    return BoundPair(lo_sq, hi_sq, problem.m == 0)


def dim_range(bits, problem: SlotProblem) -> BoundPair:
    """Exact range of the difference in means over all selections."""
    b = _check_bits(problem, bits)
    lo, hi = _bnb.draw_dim_range(b, problem.ctrl, problem.pool, problem.m)
    return BoundPair(lo, hi, True)


def var_bound(arm: str, direction: str, bits, problem: SlotProblem) -> float:
    """Bound on one arm's VAR term, population variance over arm size.

    ``direction='min'`` scans consecutive windows of the sorted pool and
    ``'max'`` scans shell sets; both are exact for the arm considered alone.
    """
    b = _check_bits(problem, bits)
    fixed_t, fixed_c, f1, f0 = _arm_layout(problem, b)
    if arm == "treated":
        fixed, r = fixed_t, f1
    elif arm == "control":
        fixed, r = fixed_c, f0
    else:
        raise InvariantViolation("arm must be 'treated' or 'control'")
    cnt = fixed.size + r
    if cnt == 0:
        return 0.0
    cs, cq = _bnb.prefix_sums(problem.pool)
    fs, fq, N = float(fixed.sum()), float((fixed * fixed).sum()), problem.N
    if direction == "min":
        v = _bnb.window_var_min(fs, fq, fixed.size, cs, cq, 0, N, r)[0]
    elif direction == "max":
        v = _bnb.shell_var_max(fs, fq, fixed.size, cs, cq, 0, N, r)[0]
    else:
        raise InvariantViolation("direction must be 'min' or 'max'")
    return v / cnt


def var_range(bits, problem: SlotProblem) -> BoundPair:
    lo = var_bound("treated", "min", bits, problem) + var_bound("control", "min", bits, problem)
    hi = var_bound("treated", "max", bits, problem) + var_bound("control", "max", bits, problem)
    return BoundPair(lo, hi)


def quad_lower(bits, problem: SlotProblem, ccoef: float) -> float:
    """Certified lower bound of ``min DIM^2 + ccoef * VAR`` over selections."""
    dr = dim_range(bits, problem)
    if dr.lo <= 0.0 <= dr.hi:
        d2 = 0.0
    else:
        d2 = min(dr.lo * dr.lo, dr.hi * dr.hi)
    vr = var_range(bits, problem)
    return d2 + ccoef * (vr.lo if ccoef >= 0 else vr.hi)


def _widen_up(x: float) -> float:
    # analytic bounds round differently from the exact statistic; widen
    # them outward so they stay valid against it
    return x + _bnb.REL_SLACK * abs(x) + _bnb.ABS_SLACK


def _widen_down(x: float) -> float:
    return max(0.0, x - _bnb.REL_SLACK * abs(x) - _bnb.ABS_SLACK)


def stat_bracket(bits, problem: SlotProblem) -> BoundPair:
    """Analytic bracket ``[DIM2_L / NUM_U + g, DIM2_U / NUM_L + g]``."""
    b = _check_bits(problem, bits)
    gv = problem.g(int(b.sum()))
    fixed_t, fixed_c, f1, f0 = _arm_layout(problem, b)
    if fixed_t.size + f1 == 0 or fixed_c.size + f0 == 0:
        return BoundPair(gv, gv, True)
    d2 = dim2_bounds(b, problem)
    vr = var_range(b, problem)
    lo = _bnb._ratio_lb(d2.lo, vr.hi) + gv
    hi = _bnb._ratio_ub(d2.hi, vr.lo) + gv
    return BoundPair(_widen_down(lo), _widen_up(hi))


def refined_stat_upper(bits, problem: SlotProblem) -> float:
    """Upper bound from the exact DIM range and the window variance bound."""
    b = _check_bits(problem, bits)
    gv = problem.g(int(b.sum()))
    fixed_t, fixed_c, f1, f0 = _arm_layout(problem, b)
    if fixed_t.size + f1 == 0 or fixed_c.size + f0 == 0:
        return gv
    dr = dim_range(b, problem)
    vr = var_range(b, problem)
    return _widen_up(_bnb._ratio_ub(max(dr.lo * dr.lo, dr.hi * dr.hi), vr.lo) + gv)
