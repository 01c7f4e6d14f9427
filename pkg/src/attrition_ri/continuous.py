"""Certified worst-case p-values for continuous outcomes.

For each admissible table size ``k`` the worst case over tables is bracketed:

* a heuristic lower bound, the p-value of one table that (nearly) minimises
  the observed statistic;
* an upper bound from partitioning the range of the observed statistic into
  cells and, per cell, maximising the number of Monte Carlo draws whose
  statistic can reach the cell's lower edge.

The per-cell problem is solved exactly by the subset branch-and-bound in
`attrition_ri._bnb`, or replaced by a valid upper bound when its node budget
runs out.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _bnb
from . import randomization as rz
from ._exactness import as_fraction, threshold_count
from ._numerics import g_value, stat_slots, stat_slots_matrix
from .bounds import SlotProblem, make_problem, refined_stat_upper, stat_bracket
from .core import Dataset, build_family
from .decision import Decision, KDiagnostic
from .errors import InvariantViolation, NoFeasibleTable
from .pretest import prune
from .statistics import StatKind

DEFAULT_NODE_BUDGET = 2_000_000
DEFAULT_GRID_STEP = 0.01
DEFAULT_TOL = 1e-4
_EMPTY_OFFSETS = np.zeros(0, dtype=np.int64)


@dataclass
class ContinuousConfig:
    n_mc: int = 300
    seed: int = 0
    grid_step: float = DEFAULT_GRID_STEP
    node_budget: int = DEFAULT_NODE_BUDGET
    tol: float = DEFAULT_TOL
    side: str = "two"
    add_one: bool = False
    refine_steps: int = 4
    exact_draws: bool = False
    time_budget_s: Optional[float] = None


class _Clock:
    def __init__(self, budget_s: Optional[float]):
        self.deadline = None if budget_s is None else time.perf_counter() + budget_s

    def expired(self) -> bool:
        return self.deadline is not None and time.perf_counter() > self.deadline


class _OutOfTime(Exception):
    pass


@dataclass
class DrawSet:
    """Slot patterns with integer weights; ``p = weight / denom``.

    Monte Carlo draws have weight 1 and ``denom = n_mc``.  The exact law on
    ``k`` slots uses assignment counts and ``denom = C(n, n1)``.
    """

    bits: np.ndarray
    weights: np.ndarray
    denom: int
    nA1: np.ndarray
    g: np.ndarray
    seed: Optional[int]
    exact: bool = False

    @property
    def size(self) -> int:
        return self.bits.shape[0]

    def mass(self, mask) -> int:
        return int(self.weights[np.asarray(mask, dtype=bool)].sum())


def _finish_draws(problem: SlotProblem, bits, weights, denom, seed, exact) -> DrawSet:
    nA1 = bits.sum(axis=1).astype(np.int64)
    gv = np.array([problem.g(int(j)) for j in nA1])
    return DrawSet(np.ascontiguousarray(bits, dtype=np.uint8),
                   np.asarray(weights, dtype=np.int64), int(denom), nA1, gv, seed, exact)


def mc_draws(problem: SlotProblem, n_mc: int, seed: int) -> DrawSet:
    """``n_mc`` induced assignments; draw ``s`` uses stream ``s`` of a
    seed derived from ``(seed, k)``."""
    if n_mc < 1:
        raise InvariantViolation("n_mc must be positive")
    kseed = rz.RngStream(seed).child(problem.k).seed
    bits = rz.induced_matrix(problem.n, problem.n1, problem.k, kseed, range(n_mc))
    return _finish_draws(problem, bits, np.ones(n_mc, dtype=np.int64), n_mc, seed, False)


def exact_draws(problem: SlotProblem) -> DrawSet:
    """Every slot pattern weighted by its number of CR assignments."""
    bits, counts = rz.enumerate_induced(problem.n, problem.n1, problem.k)
    if not rz.exact_arithmetic_ok(problem.n, problem.n1):
        raise InvariantViolation("design too large for exact draw weights")
    return _finish_draws(problem, bits, counts, math.comb(problem.n, problem.n1), None, True)


@dataclass(frozen=True)
class SubsetSelection:
    """Selected treated-reporter outcomes, descending, for a table of size k."""

    values: tuple
    units: tuple
    offsets: tuple
    k: int


def selection_from_offsets(problem: SlotProblem, offsets) -> SubsetSelection:
    off = np.asarray(offsets, dtype=np.int64)
    vals = _bnb.offsets_to_values(problem.pool, off)
    return SubsetSelection(tuple(float(v) + problem.reference for v in vals),
                           problem.units(off), tuple(int(e) for e in off), problem.k)


def selection_stat(problem: SlotProblem, bits, offsets) -> float:
    vals = problem.values(offsets)
    return float(stat_slots(problem.kind.value, np.ascontiguousarray(bits, dtype=np.uint8),
                            vals, problem.n, problem.n1))


def _run(problem: SlotProblem, bits, weights, draw_ub, t_lo, t_hi, *, use_obs=True,
         obs_sense=0, stop_at=None, prune_below=0, node_budget=DEFAULT_NODE_BUDGET,
         init=None):
    bits = np.ascontiguousarray(bits, dtype=np.uint8).reshape(-1, problem.k)
    weights = np.asarray(weights, dtype=np.int64)
    draw_ub = np.asarray(draw_ub, dtype=np.float64)
    if stop_at is None:
        stop_at = np.iinfo(np.int64).max
    init = _EMPTY_OFFSETS if init is None else np.asarray(init, dtype=np.int64)
    return _bnb.max_coverage(problem.kind.value, problem.n, problem.n1, problem.ctrl,
                             problem.pool, problem.m, bits, weights, draw_ub,
                             float(t_lo), float(t_hi), bool(use_obs), int(obs_sense),
                             int(stop_at), int(prune_below), int(node_budget), init)


@dataclass
class Feasibility:
    status: str  # "feasible", "infeasible" or "unknown"
    offsets: Optional[np.ndarray] = None
    nodes: int = 0


def observed_at_most(problem: SlotProblem, level: float, node_budget=DEFAULT_NODE_BUDGET,
                     init=None) -> Feasibility:
    """Is there a selection whose observed statistic is at most ``level``?"""
    empty = np.zeros((0, problem.k), dtype=np.uint8)
    best, off, status, _, nodes = _run(problem, empty, [], [], -np.inf, level, stop_at=0,
                                       node_budget=node_budget, init=init)
    if best >= 0:
        return Feasibility("feasible", off.copy(), nodes)
    if status == _bnb.STATUS_BUDGET:
        return Feasibility("unknown", None, nodes)
    return Feasibility("infeasible", None, nodes)


def observed_at_least(problem: SlotProblem, level: float, node_budget=DEFAULT_NODE_BUDGET) -> Feasibility:
    empty = np.zeros((0, problem.k), dtype=np.uint8)
    best, off, status, _, nodes = _run(problem, empty, [], [], -np.inf, level, obs_sense=1,
                                       stop_at=0, node_budget=node_budget)
    if best >= 0:
        return Feasibility("feasible", off.copy(), nodes)
    if status == _bnb.STATUS_BUDGET:
        return Feasibility("unknown", None, nodes)
    return Feasibility("infeasible", None, nodes)


def draw_at_least(problem: SlotProblem, bits, level: float, node_budget=DEFAULT_NODE_BUDGET) -> Feasibility:
    """Is there a selection giving this slot pattern a statistic >= level?"""
    best, off, status, _, nodes = _run(problem, bits, [1], [np.inf], level, np.inf,
                                       use_obs=False, stop_at=1, node_budget=node_budget)
    if best >= 1:
        return Feasibility("feasible", off.copy(), nodes)
    if status == _bnb.STATUS_BUDGET:
        return Feasibility("unknown", None, nodes)
    return Feasibility("infeasible", None, nodes)


@dataclass
class MinResult:
    lower: float
    witness: np.ndarray
    witness_stat: float
    certified: bool
    bracket: tuple


def stat_min_bisect(problem: SlotProblem, tol: float = DEFAULT_TOL,
                    node_budget: int = DEFAULT_NODE_BUDGET) -> MinResult:
    """Certified lower bound on the least observed statistic, by bisection.

    Each step asks whether some selection has observed statistic at most
    the midpoint.  The witness is the last feasible selection found, so its
    statistic is within ``tol`` of the returned bound on completion.
    """
    obs = problem.observed_bits()
    br = stat_bracket(obs, problem)
    L, U = br.lo, br.hi
    witness = np.zeros(problem.m, dtype=np.int64)
    wstat = selection_stat(problem, obs, witness)
    if wstat < U:
        U = wstat
    certified = True
    while U - L >= tol:
        M = 0.5 * (L + U)
        if not L < M < U:
            break
        res = observed_at_most(problem, M, node_budget)
        if res.status == "feasible":
            witness = res.offsets
            wstat = selection_stat(problem, obs, witness)
            # the witness may sit well below M
            U = min(M, wstat)
        elif res.status == "infeasible":
            L = M
        else:
            certified = False
            break
    return MinResult(L, witness, wstat, certified, (br.lo, br.hi))


def stat_max_refine(problem: SlotProblem, bits, U0: Optional[float] = None,
                    node_budget: int = DEFAULT_NODE_BUDGET, refine_steps: int = 0) -> float:
    """Valid upper bound on a slot pattern's largest statistic.

    Starts from ``U0`` and halves while no selection can reach the halved
    level; the last level proven unreachable is returned.  ``refine_steps``
    extra bisection steps then tighten it between the reachable and the
    unreachable levels.
    """
    b = np.ascontiguousarray(bits, dtype=np.uint8)
    if problem.m == 0 or problem.E == 0:
        # a single selection: its statistic is the maximum
        only = selection_stat(problem, b, np.zeros(problem.m, dtype=np.int64))
        return only if U0 is None else min(U0, only)
    if U0 is None:
        U0 = refined_stat_upper(b, problem)
    if not math.isfinite(U0):
        return U0
    reach = selection_stat(problem, b, np.zeros(problem.m, dtype=np.int64))
    if reach >= U0:
        return U0
    first = draw_at_least(problem, b, U0, node_budget)
    if first.status != "infeasible":
        return U0
    ub = U0
    lo = reach
    floor = 1e-12 * (1.0 + abs(U0))
    while True:
        t = ub / 2.0
        if t <= reach or t <= floor:
            break
        res = draw_at_least(problem, b, t, node_budget)
        if res.status == "infeasible":
            ub = t
            continue
        if res.status == "feasible":
            lo = max(lo, t)
        break
    for _ in range(refine_steps):
        mid = 0.5 * (lo + ub)
        if not lo < mid < ub:
            break
        res = draw_at_least(problem, b, mid, node_budget)
        if res.status == "infeasible":
            ub = mid
        elif res.status == "feasible":
            lo = mid
        else:
            break
    return ub


@dataclass
class HeuristicResult:
    pval: float
    count: int
    L_k: float
    draws: DrawSet
    witness: MinResult
    stats: np.ndarray
    t_obs: float


def heuristic_p(problem: SlotProblem, draws: DrawSet, tol: float = DEFAULT_TOL,
                node_budget: int = DEFAULT_NODE_BUDGET, add_one: bool = False) -> HeuristicResult:
    """p-value of the table minimising the observed statistic (lower bound)."""
    mr = stat_min_bisect(problem, tol, node_budget)
    vals = problem.values(mr.witness)
    obs = problem.observed_bits()
    t_obs = float(stat_slots(problem.kind.value, obs, vals, problem.n, problem.n1))
    stats = stat_slots_matrix(problem.kind.value, draws.bits, vals, problem.n, problem.n1)
    count = draws.mass(stats >= t_obs)
    pval = _to_p(count, draws.denom, add_one)
    return HeuristicResult(pval, count, mr.lower, draws, mr, stats, t_obs)


def _to_p(count: int, denom: int, add_one: bool) -> float:
    if add_one:
        return (count + 1) / (denom + 1)
    return count / denom


def _threshold(level, denom: int, add_one: bool) -> int:
    """Smallest covered weight whose p-value reaches ``level``."""
    if add_one:
        return max(0, threshold_count(level, denom + 1) - 1)
    return threshold_count(level, denom)


@dataclass
class SubproblemResult:
    v: int
    witness: Optional[SubsetSelection]
    certified: bool
    upper: int
    nodes: int = 0
    feasible: bool = True


def subproblem_max_coverage(problem: SlotProblem, draws: DrawSet, t_lo: float, t_hi: float,
                            draw_ub=None, node_budget: int = DEFAULT_NODE_BUDGET,
                            stop_at=None, prune_below: int = 0) -> SubproblemResult:
    """Largest draw weight with statistic >= ``t_lo`` over selections whose
    observed statistic is at most ``t_hi``.

    Raises
    ------
    NoFeasibleTable
        If the search completes without any feasible selection.
    """
    if t_lo > t_hi:
        raise InvariantViolation("need t_lo <= t_hi")
    ub = np.full(draws.size, np.inf) if draw_ub is None else draw_ub
    best, off, status, upper, nodes = _run(problem, draws.bits, draws.weights, ub, t_lo, t_hi,
                                           stop_at=stop_at, prune_below=prune_below,
                                           node_budget=node_budget)
    certified = status != _bnb.STATUS_BUDGET
    if best < 0 and certified and upper < 0:
        raise NoFeasibleTable(f"no table satisfies observed statistic <= {t_hi}")
    witness = selection_from_offsets(problem, off) if best >= 0 else None
    return SubproblemResult(int(best), witness, certified, int(max(upper, best)), int(nodes),
                            best >= 0)


@dataclass
class UpperResult:
    p_upper: Optional[float]
    upper_count: Optional[int]
    certified: bool
    quick: float
    draw_ub: np.ndarray
    cells: list = field(default_factory=list)
    reached: bool = False


def reach_upper(problem: SlotProblem, draws: DrawSet, level: float,
                node_budget: int = DEFAULT_NODE_BUDGET, clock=None) -> np.ndarray:
    """Per-draw upper bounds that are exact about reaching ``level``.

    A draw proven unable to reach ``level`` gets the largest float below it;
    any other draw keeps its analytic upper bound.
    """
    clock = clock or _Clock(None)
    below = float(np.nextafter(level, -np.inf))
    ub = np.empty(draws.size)
    for s in range(draws.size):
        if clock.expired():
            raise _OutOfTime
        u = refined_stat_upper(draws.bits[s], problem)
        if u >= level and draw_at_least(problem, draws.bits[s], level, node_budget).status == "infeasible":
            u = below
        ub[s] = u
    return ub


def _weighted_tail_start(values: np.ndarray, weights: np.ndarray, thr: int) -> float:
    """Least ``t`` such that the weight of ``values >= t`` is below ``thr``."""
    order = np.argsort(-values, kind="stable")
    v = values[order]
    w = weights[order]
    cum = np.cumsum(w)
    idx = int(np.searchsorted(cum, thr, side="left"))  # first position with cum >= thr
    if idx >= len(v):
        return -np.inf
    return float(np.nextafter(v[idx], np.inf))


def p_upper_bound(problem: SlotProblem, draws: DrawSet, L_k: float, alpha: float,
                  grid_step: float = DEFAULT_GRID_STEP, node_budget: int = DEFAULT_NODE_BUDGET,
                  refine_steps: int = 4, add_one: bool = False, exact_cells: bool = False,
                  clock: Optional[_Clock] = None) -> UpperResult:
    """Certified upper bound on the worst-case p-value for table size ``k``.

    In the default decision mode cells are evaluated hierarchically and the
    search stops as soon as the bound is known to stay below ``alpha`` or a
    single cell reaches it.  ``exact_cells`` solves every grid cell exactly.
    """
    clock = clock or _Clock(None)
    thr = _threshold(alpha, draws.denom, add_one)
    if not exact_cells:
        # one feasibility query per draw settles whether it can reach L_k
        ub = reach_upper(problem, draws, L_k, node_budget, clock)
        quick_count = draws.mass(ub >= L_k)
        if quick_count < thr:
            quick = _to_p(quick_count, draws.denom, add_one)
            return UpperResult(quick, quick_count, True, quick, ub)
    ub = np.empty(draws.size)
    for s in range(draws.size):
        if clock.expired():
            raise _OutOfTime
        ub[s] = stat_max_refine(problem, draws.bits[s], None, node_budget, refine_steps)
    quick_count = draws.mass(ub >= L_k)
    quick = _to_p(quick_count, draws.denom, add_one)
    if quick_count < thr and not exact_cells:
        return UpperResult(quick, quick_count, True, quick, ub)

    tail_start = _weighted_tail_start(ub, draws.weights, thr)
    if exact_cells:
        t_max = float(np.max(ub[np.isfinite(ub)])) if np.isfinite(ub).any() else L_k
        t_max = max(t_max, L_k)
    else:
        t_max = max(tail_start, L_k)
    step = grid_step if math.isfinite(grid_step) and grid_step > 0 else max(t_max - L_k, 1.0)
    K = max(1, int(math.ceil((t_max - L_k) / step))) if t_max > L_k else 1
    grid = [L_k + i * step for i in range(K + 1)]

    cells = []
    certified = True
    best_upper = -1

    def solve(a, b, target):
        # wide cells only need enough effort to decide whether to split
        budget = node_budget if b - a == 1 or not target else max(1, node_budget // 10)
        res = subproblem_or_empty(problem, draws, grid[a], grid[b], ub, budget,
                                  stop_at=thr if target else None,
                                  prune_below=thr if target else 0)
        cells.append((grid[a], grid[b], res.v, res.upper, res.certified))
        return res

    # the tail cell [grid[K], inf) is bounded by the weight of draws whose
    # upper bound reaches grid[K]
    tail_count = draws.mass(ub >= grid[K])
    if exact_cells:
        res = subproblem_or_empty(problem, draws, grid[K], np.inf, ub, node_budget)
        cells.append((grid[K], np.inf, res.v, res.upper, res.certified))
        tail_count = min(tail_count, res.upper)
        certified &= res.certified
        for i in range(1, K + 1):
            if clock.expired():
                raise _OutOfTime
            res = solve(i - 1, i, False)
            certified &= res.certified
            best_upper = max(best_upper, res.upper)
        best_upper = max(best_upper, tail_count)
        return UpperResult(_to_p(best_upper, draws.denom, add_one), best_upper, certified,
                           quick, ub, cells, best_upper >= thr)

    if tail_count >= thr:
        # cannot happen by the choice of grid[K] >= tail_start
        return UpperResult(None, None, True, quick, ub, cells, True)
    best_upper = tail_count
    stack = [(0, K)]
    while stack:
        if clock.expired():
            raise _OutOfTime
        a, b = stack.pop()
        res = solve(a, b, True)
        if res.upper < thr:
            # valid even when the node budget ran out
            best_upper = max(best_upper, res.upper)
            continue
        if b - a == 1:
            return UpperResult(None, None, res.certified, quick, ub, cells, True)
        mid = (a + b) // 2
        stack.append((mid, b))
        stack.append((a, mid))
    return UpperResult(_to_p(best_upper, draws.denom, add_one), best_upper, certified, quick,
                       ub, cells, False)


def subproblem_or_empty(problem, draws, t_lo, t_hi, ub, node_budget, stop_at=None,
                        prune_below=0) -> SubproblemResult:
    """Like `subproblem_max_coverage` but an empty cell has value 0."""
    try:
        return subproblem_max_coverage(problem, draws, t_lo, t_hi, ub, node_budget,
                                       stop_at=stop_at, prune_below=prune_below)
    except NoFeasibleTable:
        return SubproblemResult(0, None, True, 0, 0, False)


def worst_case_continuous(kind, dataset: Dataset, alpha: float, beta: float,
                          cfg: Optional[ContinuousConfig] = None) -> Decision:
    """Worst-case randomization test for continuous outcomes.

    The pretest removes implausible table sizes at level ``beta``; the
    remaining budget ``alpha - beta`` is spent on the worst-case p-value.
    """
    start = time.perf_counter()
    cfg = cfg or ContinuousConfig()
    kind = StatKind.parse(kind)
    fam = build_family(dataset)
    pr = prune(fam, beta, cfg.side)
    level = as_fraction(alpha) - as_fraction(beta)
    clock = _Clock(cfg.time_budget_s)
    ks = pr.cardinalities(fam.r0)

    per_k = []
    lowers, uppers = [], []
    reject = True
    notes = []
    problems = {}
    heuristics = {}
    try:
        for k in ks:
            if clock.expired():
                raise _OutOfTime
            problem = make_problem(dataset, k, kind)
            draws = exact_draws(problem) if cfg.exact_draws else mc_draws(problem, cfg.n_mc, cfg.seed)
            h = heuristic_p(problem, draws, cfg.tol, cfg.node_budget, cfg.add_one)
            diag = KDiagnostic(k, h.pval, None, h.witness.certified,
                               {"L_k": h.L_k, "t_obs_witness": h.t_obs})
            per_k.append(diag)
            lowers.append(h.pval)
            problems[k], heuristics[k] = problem, h
            if h.count >= _threshold(level, draws.denom, cfg.add_one):
                reject = False
                notes.append(f"heuristic p-value at k={k} is not below alpha - beta")
                break
            if not h.witness.certified:
                reject = False
                notes.append(f"observed-statistic bound at k={k} hit the node budget")
                break
        if reject:
            for diag in per_k:
                problem, h = problems[diag.k], heuristics[diag.k]
                up = p_upper_bound(problem, h.draws, h.L_k, float(level), cfg.grid_step,
                                   cfg.node_budget, cfg.refine_steps, cfg.add_one, clock=clock)
                diag.p_upper = up.p_upper
                diag.certified = diag.certified and up.certified
                diag.extra["quick_upper"] = up.quick
                diag.extra["cells"] = len(up.cells)
                if up.p_upper is None or not up.certified:
                    reject = False
                    notes.append(f"upper bound at k={diag.k} is not certified below alpha - beta")
                    break
                uppers.append(up.p_upper)
    except _OutOfTime:
        reject = False
        notes.append("time budget exhausted")

    if not ks:
        notes.append("pretest removed every cardinality")
    complete = reject and len(uppers) == len(ks)
    runtime = (time.perf_counter() - start) * 1000.0
    return Decision(
        reject=bool(reject), mode="continuous", kind=kind.label, alpha=alpha, beta=beta,
        worst_p_lower=max(lowers) if lowers else None,
        worst_p_upper=(max(uppers) if uppers else 0.0) if complete else None,
        per_k=per_k, seed=cfg.seed, runtime_ms=runtime,
        config={"pretest_side": pr.side.value, "n_mc": cfg.n_mc, "grid_step": cfg.grid_step,
                "node_budget": cfg.node_budget, "tol": cfg.tol, "add_one": cfg.add_one,
                "admissible_k": list(ks)},
        notes=notes,
    )
