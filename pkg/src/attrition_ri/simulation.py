"""Simulation design with principal reporting strata and a study runner.

Units are split into always-, if- and never-reporters with fixed counts,
assignment is completely randomized, and outcomes are Gaussian (or a
thresholded Gaussian for binary outcomes) with a constant additive effect.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.special import ndtri

from . import randomization as rz
from .core import Dataset, ReportingTable, build_family
from .decision import Decision
from .errors import AttritionRIError, InvariantViolation

STRATA = ("AR", "IR", "NR")


@dataclass
class SimulationConfig:
    n: int = 100
    n1: int = 50
    shares: tuple = (0.9, 0.05, 0.05)
    tau: float = 0.0
    n_mc: int = 300
    alpha: float = 0.05
    beta: float = 0.005
    reps: int = 50
    seed: int = 0
    mode: str = "continuous"
    kind: str = "t2"
    outcome: str = "normal"
    pretest_side: str = "two"
    asy_variant: str = "min"
    grid_step: float = 0.01
    node_budget: int = 2_000_000
    tol: float = 1e-4
    max_support: int = 6
    rep_budget_s: Optional[float] = None
    check_consistency: bool = True

    def __post_init__(self):
        self.shares = tuple(float(s) for s in self.shares)
        if len(self.shares) != 3 or any(s < 0 for s in self.shares):
            raise InvariantViolation("shares must be three nonnegative numbers")
        if abs(sum(self.shares) - 1.0) > 1e-12:
            raise InvariantViolation("shares must sum to 1")
        if not 1 <= self.n1 <= self.n - 1:
            raise InvariantViolation("need 1 <= n1 <= n - 1")
        if self.outcome not in ("normal", "binary"):
            raise InvariantViolation("outcome must be 'normal' or 'binary'")
        if self.reps < 0:
            raise InvariantViolation("reps must be nonnegative")

    def to_json(self) -> dict:
        out = asdict(self)
        out["shares"] = list(self.shares)
        return out


@dataclass(frozen=True)
class PotentialTable:
    y1: tuple
    y0: tuple
    r1: tuple
    r0: tuple

    @property
    def always_reporters(self) -> ReportingTable:
        return ReportingTable(tuple(int(a and b) for a, b in zip(self.r1, self.r0)))


def strata_counts(n: int, shares) -> tuple:
    """Largest-remainder rounding of ``n * shares``."""
    raw = [n * s for s in shares]
    base = [math.floor(x) for x in raw]
    short = n - sum(base)
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - base[i]), i))
    for i in order[:short]:
        base[i] += 1
    return tuple(base)


def simulate_dataset(config: SimulationConfig, rep: int):
    """One simulated dataset and its potential outcomes."""
    n, n1 = config.n, config.n1
    counts = strata_counts(n, config.shares)
    strata = np.repeat(np.arange(3), counts)
    base = rz.RngStream(config.seed).child(rep)
    outcome_stream = rz.RngStream(base.seed, 1).generator()
    u = outcome_stream.random(n)
    z = ndtri(u)
    if config.outcome == "normal":
        y0 = z
        y1 = z + config.tau
    else:
        y0 = (z > 0).astype(float)
        y1 = (z + config.tau > 0).astype(float)
    r1 = (strata <= 1).astype(int)
    r0 = (strata == 0).astype(int)
    d = np.array(rz.sample_cr(n, n1, rz.RngStream(base.seed, 2)).bits)
    r = np.where(d == 1, r1, r0)
    y = np.where(d == 1, y1, y0)
    outcomes = tuple(float(v) if rr else None for v, rr in zip(y, r))
    data = Dataset(outcomes, tuple(int(x) for x in d), tuple(int(x) for x in r))
    pot = PotentialTable(tuple(map(float, y1)), tuple(map(float, y0)),
                         tuple(map(int, r1)), tuple(map(int, r0)))
    return data, pot


def check_truth_in_family(data: Dataset, pot: PotentialTable) -> bool:
    return build_family(data).contains(pot.always_reporters)


def run_test(config: SimulationConfig, data: Dataset, seed: int) -> Decision:
    mode = config.mode
    if mode == "exact":
        from .exact import worst_case_small_support
        return worst_case_small_support(config.kind, data, config.alpha, config.beta,
                                        config.pretest_side, max_support=config.max_support,
                                        n_mc=config.n_mc, seed=seed)
    if mode == "continuous":
        from .continuous import ContinuousConfig, worst_case_continuous
        cfg = ContinuousConfig(n_mc=config.n_mc, seed=seed, grid_step=config.grid_step,
                               node_budget=config.node_budget, tol=config.tol,
                               side=config.pretest_side, time_budget_s=config.rep_budget_s)
        return worst_case_continuous(config.kind, data, config.alpha, config.beta, cfg)
    if mode == "asymptotic":
        from .asymptotic import asymptotic_decision
        return asymptotic_decision(config.kind, data, config.alpha, config.beta,
                                   config.asy_variant, side=config.pretest_side,
                                   tol=config.tol, node_budget=config.node_budget, seed=seed)
    raise InvariantViolation(f"unknown mode {mode!r}")


def run_rep(config: SimulationConfig, rep: int) -> dict:
    data, pot = simulate_dataset(config, rep)
    if config.check_consistency and not check_truth_in_family(data, pot):
        raise AssertionError("true always-reporter table is not in the compatible family")
    test_seed = rz.RngStream(config.seed).child(rep, 7).seed
    start = time.perf_counter()
    try:
        dec = run_test(config, data, test_seed)
    except AttritionRIError as exc:
        return {"rep": rep, "reject": False, "error": f"{type(exc).__name__}: {exc}",
                "runtime_ms": (time.perf_counter() - start) * 1000.0}
    timed_out = any("time budget" in note for note in dec.notes)
    return {"rep": rep, "reject": bool(dec.reject), "error": None,
            "worst_p_lower": dec.worst_p_lower, "worst_p_upper": dec.worst_p_upper,
            "timed_out": timed_out, "runtime_ms": dec.runtime_ms}


def _rep_worker(args):
    config, rep = args
    return run_rep(config, rep)


def thread_cap() -> int:
    raw = os.environ.get("ATTRITION_RI_THREADS", "")
    try:
        value = int(raw)
    except ValueError:
        value = 1
    return max(1, value)


def run_study(config: SimulationConfig, workers: Optional[int] = None) -> dict:
    """Run all replications and aggregate them in replication order."""
    workers = thread_cap() if workers is None else max(1, workers)
    tasks = [(config, rep) for rep in range(config.reps)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_rep_worker, tasks))
    else:
        rows = [_rep_worker(t) for t in tasks]
    rows.sort(key=lambda row: row["rep"])
    reps = len(rows)
    rejections = sum(row["reject"] for row in rows)
    rate = rejections / reps if reps else None
    se = math.sqrt(rate * (1 - rate) / reps) if reps else None
    times = np.array([row["runtime_ms"] for row in rows]) if reps else np.zeros(0)
    quantiles = ({"median": float(np.median(times)), "p90": float(np.quantile(times, 0.9)),
                  "max": float(times.max())} if reps else None)
    return {
        "reps": reps,
        "rejection_rate": rate,
        "mc_se": se,
        "runtime_quantiles": quantiles,
        "failed_reps": [row["rep"] for row in rows if row["error"]],
        "timed_out_reps": [row["rep"] for row in rows if row.get("timed_out")],
        "config": config.to_json(),
        "per_rep": rows,
    }
