"""Complete randomization, its exact enumeration and the induced slot law.

Random draws come from counter-based Philox streams keyed by
``(master seed, stream id)``, so a draw never depends on how many other
streams were consumed before it or on which worker consumed them.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .errors import BudgetExceeded, InvariantViolation

_MASK64 = (1 << 64) - 1
INT64_SAFE = (1 << 62)
DEFAULT_ENUMERATION_BUDGET = 2_000_000


@dataclass(frozen=True)
class RngStream:
    """Counter-based stream identified by a master seed and a stream id."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed & _MASK64, self.stream_id & _MASK64], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, *ids: int) -> "RngStream":
        """A new stream whose seed is derived from this one and ``ids``."""
        ss = np.random.SeedSequence([self.seed & _MASK64, self.stream_id & _MASK64,
                                     *[int(i) & _MASK64 for i in ids]])
        derived = int(ss.generate_state(2, dtype=np.uint64)[0])
        return RngStream(derived, 0)


@dataclass(frozen=True)
class AssignmentVector:
    bits: tuple
    n: int
    n1: int


@dataclass(frozen=True)
class InducedAssignment:
    bits: tuple
    k: int
    n: int
    n1: int

    @property
    def n_treated(self) -> int:
        return sum(self.bits)


def _check_design(n: int, n1: int) -> None:
    if n < 2 or not 1 <= n1 <= n - 1:
        raise InvariantViolation(f"invalid design n={n}, n1={n1}: need 1 <= n1 <= n-1")


@lru_cache(maxsize=65536)
def log_comb(n: int, k: int) -> float:
    """``log C(n, k)``, ``-inf`` outside the support."""
    if k < 0 or k > n or n < 0:
        return -math.inf
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def comb(n: int, k: int) -> int:
    """Exact binomial coefficient, 0 outside the support."""
    if k < 0 or k > n or n < 0:
        return 0
    return math.comb(n, k)


def exact_arithmetic_ok(n: int, n1: int) -> bool:
    """Whether assignment counts for the design fit comfortably in int64."""
    return math.comb(n, n1) < INT64_SAFE


def _uniform_choice(gen: np.random.Generator, size: int, n_ones: int) -> np.ndarray:
    """Uniform subset of ``n_ones`` positions out of ``size`` as a 0/1 array."""
    bits = np.zeros(size, dtype=np.uint8)
    if n_ones:
        keys = gen.random(size)
        bits[np.argsort(keys, kind="stable")[:n_ones]] = 1
    return bits


def sample_cr(n: int, n1: int, stream: RngStream) -> AssignmentVector:
    """One draw from complete randomization CR(n, n1)."""
    _check_design(n, n1)
    bits = _uniform_choice(stream.generator(), n, n1)
    return AssignmentVector(tuple(int(b) for b in bits), n, n1)


def enumerate_cr(n: int, n1: int, budget: int = DEFAULT_ENUMERATION_BUDGET) -> Iterator[AssignmentVector]:
    """Every CR(n, n1) assignment once, in lexicographic order of treated sets."""
    _check_design(n, n1)
    if math.comb(n, n1) > budget:
        raise BudgetExceeded(f"C({n},{n1}) = {math.comb(n, n1)} exceeds budget {budget}")
    for treated in itertools.combinations(range(n), n1):
        bits = [0] * n
        for i in treated:
            bits[i] = 1
        yield AssignmentVector(tuple(bits), n, n1)


def nA1_support(n: int, n1: int, nA: int) -> tuple:
    return max(0, n1 - (n - nA)), min(n1, nA)


def nA1_counts(n: int, n1: int, nA: int) -> list:
    """Exact assignment counts ``C(nA, j) C(n - nA, n1 - j)`` for j = 0..nA."""
    return [comb(nA, j) * comb(n - nA, n1 - j) for j in range(nA + 1)]


def nA1_pmf(n: int, n1: int, nA: int, k: int) -> float:
    """Hypergeometric mass of ``k`` treated units among ``nA`` designated ones."""
    if not 0 <= nA <= n or k < 0 or k > nA:
        return 0.0
    lo, hi = nA1_support(n, n1, nA)
    if not lo <= k <= hi:
        return 0.0
    if exact_arithmetic_ok(n, n1):
        return comb(nA, k) * comb(n - nA, n1 - k) / math.comb(n, n1)
    return math.exp(log_comb(nA, k) + log_comb(n - nA, n1 - k) - log_comb(n, n1))


def nA1_pmf_vector(n: int, n1: int, nA: int) -> np.ndarray:
    """The full pmf over j = 0..nA."""
    return np.array([nA1_pmf(n, n1, nA, j) for j in range(nA + 1)])


def _draw_count(u: float, cdf: np.ndarray) -> int:
    j = int(np.searchsorted(cdf, u, side="right"))
    return min(j, len(cdf) - 1)


@lru_cache(maxsize=4096)
def _induced_cdf(n: int, n1: int, k: int) -> np.ndarray:
    pmf = nA1_pmf_vector(n, n1, k)
    cdf = np.cumsum(pmf)
    cdf[-1] = 1.0
    return cdf


def sample_induced(n: int, n1: int, k: int, stream: RngStream) -> InducedAssignment:
    """Treatment bits on ``k`` designated slots, marginal of CR(n, n1).

    The treated count is drawn by inverse CDF from the hypergeometric law and
    then placed uniformly over the slots.
    """
    bits = induced_bits(n, n1, k, stream)
    return InducedAssignment(tuple(int(b) for b in bits), k, n, n1)


def induced_bits(n: int, n1: int, k: int, stream: RngStream) -> np.ndarray:
    _check_design(n, n1)
    if not 1 <= k <= n:
        raise InvariantViolation(f"slot count k={k} must lie in [1, n]")
    gen = stream.generator()
    u = gen.random()
    j = _draw_count(u, _induced_cdf(n, n1, k))
    return _uniform_choice(gen, k, j)


def induced_matrix(n: int, n1: int, k: int, seed: int, stream_ids: Sequence[int]) -> np.ndarray:
    """Stack of induced draws, row ``s`` from stream ``(seed, stream_ids[s])``."""
    out = np.empty((len(stream_ids), k), dtype=np.uint8)
    for row, sid in enumerate(stream_ids):
        out[row] = induced_bits(n, n1, k, RngStream(seed, sid))
    return out


def enumerate_induced(n: int, n1: int, k: int):
    """Exact law on ``k`` slots: every slot pattern with its assignment count.

    Returns ``(patterns, counts)`` where ``counts[s]`` is the number of CR
    assignments that restrict to ``patterns[s]``; the counts sum to C(n, n1).
    """
    _check_design(n, n1)
    rows, counts = [], []
    for j in range(k + 1):
        c = comb(n - k, n1 - j)
        if c == 0:
            continue
        for treated in itertools.combinations(range(k), j):
            bits = [0] * k
            for i in treated:
                bits[i] = 1
            rows.append(bits)
            counts.append(c)
    return np.array(rows, dtype=np.uint8).reshape(len(rows), k), counts
