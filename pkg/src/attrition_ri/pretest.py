"""Pretest on the number of always-reporters.

For a candidate count ``nA = r0 + i`` the indicator balance of the
always-reporters has a hypergeometric randomization law, so each p-value is
evaluated exactly instead of by Monte Carlo.  Counts whose p-value falls
below ``beta`` are pruned.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from . import randomization as rz
from ._exactness import as_fraction
from .core import TableFamily
from .errors import InvariantViolation


class PretestSide(enum.Enum):
    TWO_SIDED = "two"
    PAPER_LOWER = "paper"

    @classmethod
    def parse(cls, value) -> "PretestSide":
        if isinstance(value, PretestSide):
            return value
        aliases = {"two": cls.TWO_SIDED, "two_sided": cls.TWO_SIDED,
                   "paper": cls.PAPER_LOWER, "paper_lower": cls.PAPER_LOWER}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise InvariantViolation(f"unknown pretest side {value!r}") from None


@dataclass(frozen=True)
class PruneResult:
    """Admissible extra treated always-reporter counts and their p-values."""

    admissible: tuple
    pvalues: tuple
    beta: float
    side: PretestSide

    def cardinalities(self, r0: int) -> tuple:
        return tuple(r0 + i for i in self.admissible)


def _balance_key(x: int, n: int, n1: int, nA: int) -> int:
    # n1 * n0 * DIM as an integer, so comparisons are exact
    return x * n - nA * n1


def _qualifying(i: int, n: int, n1: int, nA: int, side: PretestSide):
    ref = _balance_key(i, n, n1, nA)
    lo, hi = rz.nA1_support(n, n1, nA)
    for x in range(lo, hi + 1):
        key = _balance_key(x, n, n1, nA)
        if side is PretestSide.TWO_SIDED:
            yield x, abs(key) >= abs(ref)
        else:
            yield x, key <= ref


def pretest_counts(i: int, n: int, n1: int, r0: int, side) -> tuple:
    """Exact ``(numerator, denominator)`` of the pretest p-value, or ``None``
    when the design is too large for exact integers."""
    side = PretestSide.parse(side)
    nA = r0 + i
    if not rz.exact_arithmetic_ok(n, n1):
        return None
    num = sum(rz.comb(nA, x) * rz.comb(n - nA, n1 - x)
              for x, ok in _qualifying(i, n, n1, nA, side) if ok)
    return num, math.comb(n, n1)


def pretest_p(i: int, family: TableFamily, side="two") -> float:
    side = PretestSide.parse(side)
    if not 0 <= i <= family.n_free:
        raise InvariantViolation(f"extra count {i} outside [0, {family.n_free}]")
    n, n1, r0 = family.n, family.n1, family.r0
    exact = pretest_counts(i, n, n1, r0, side)
    if exact is not None:
        return exact[0] / exact[1]
    nA = r0 + i
    return min(1.0, math.fsum(rz.nA1_pmf(n, n1, nA, x)
                              for x, ok in _qualifying(i, n, n1, nA, side) if ok))


def prune(family: TableFamily, beta: float, side="two") -> PruneResult:
    side = PretestSide.parse(side)
    if not 0 <= beta < 1:
        raise InvariantViolation("beta must lie in [0, 1)")
    level = as_fraction(beta)
    admissible, pvals = [], []
    for i in range(family.n_free + 1):
        exact = pretest_counts(i, family.n, family.n1, family.r0, side)
        if exact is not None:
            p = exact[0] / exact[1]
            keep = exact[0] * level.denominator >= level.numerator * exact[1]
        else:
            p = pretest_p(i, family, side)
            keep = p >= beta
        pvals.append(p)
        if keep:
            admissible.append(i)
    return PruneResult(tuple(admissible), tuple(pvals), float(beta), side)
