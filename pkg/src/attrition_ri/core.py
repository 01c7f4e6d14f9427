"""Observed-data model, strata classification and the compatible-table family.

A dataset is a sequence of ``(Y, D, R)`` triples.  Under monotone attrition a
control unit that reports must be an always-reporter, a unit that does not
report cannot be one, and a treated unit that reports is ambiguous.  The set of
always-reporter indicator vectors consistent with the data is therefore a
hypercube over the treated reporters, stored implicitly by `TableFamily`.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

from .errors import EmptyControlReporters, InvariantViolation


class StratumLabel(enum.Enum):
    KNOWN_ALWAYS_REPORTER = "KnownAlwaysReporter"
    KNOWN_NOT_ALWAYS_REPORTER = "KnownNotAlwaysReporter"
    AMBIGUOUS = "Ambiguous"


def classify_unit(assignment: int, report: int) -> StratumLabel:
    """Label a unit from its assignment and reporting bits."""
    if assignment not in (0, 1) or report not in (0, 1):
        raise InvariantViolation("assignment and report must be 0 or 1")
    if not report:
        return StratumLabel.KNOWN_NOT_ALWAYS_REPORTER
    if assignment:
        return StratumLabel.AMBIGUOUS
    return StratumLabel.KNOWN_ALWAYS_REPORTER


@dataclass(frozen=True)
class Dataset:
    """Observed triples for ``n`` units.

    ``outcomes[i]`` is ``None`` exactly when unit ``i`` did not report.
    """

    outcomes: tuple
    assignments: tuple
    reports: tuple

    def __post_init__(self):
        outcomes = tuple(None if y is None else float(y) for y in self.outcomes)
        assignments = tuple(int(d) for d in self.assignments)
        reports = tuple(int(r) for r in self.reports)
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "assignments", assignments)
        object.__setattr__(self, "reports", reports)

        n = len(outcomes)
        if len(assignments) != n or len(reports) != n:
            raise InvariantViolation("outcomes, assignments and reports differ in length")
        if n < 2:
            raise InvariantViolation("need at least two units")
        for i, (y, d, r) in enumerate(zip(outcomes, assignments, reports)):
            if d not in (0, 1):
                raise InvariantViolation(f"unit {i}: assignment must be 0 or 1")
            if r not in (0, 1):
                raise InvariantViolation(f"unit {i}: report must be 0 or 1")
            if (y is not None) != bool(r):
                raise InvariantViolation(
                    f"unit {i}: outcome must be present iff the unit reports"
                )
            if y is not None and not math.isfinite(y):
                raise InvariantViolation(f"unit {i}: outcome must be finite")
        n1 = sum(assignments)
        if not 1 <= n1 <= n - 1:
            raise InvariantViolation("need at least one treated and one control unit")

    @classmethod
    def from_arrays(cls, outcomes: Sequence[Optional[float]], assignments, reports) -> "Dataset":
        return cls(tuple(outcomes), tuple(assignments), tuple(reports))

    @property
    def n(self) -> int:
        return len(self.outcomes)

    @property
    def n1(self) -> int:
        return sum(self.assignments)

    @property
    def n0(self) -> int:
        return self.n - self.n1

    def labels(self) -> tuple:
        return tuple(classify_unit(d, r) for d, r in zip(self.assignments, self.reports))

    def observed_outcomes(self) -> list:
        return [y for y in self.outcomes if y is not None]


@dataclass(frozen=True)
class ReportingTable:
    """A 0/1 always-reporter indicator vector."""

    indicators: tuple

    def __post_init__(self):
        object.__setattr__(self, "indicators", tuple(int(a) for a in self.indicators))

    @property
    def size(self) -> int:
        return sum(self.indicators)

    def is_compatible(self, dataset: Dataset) -> bool:
        if len(self.indicators) != dataset.n:
            return False
        for a, d, r in zip(self.indicators, dataset.assignments, dataset.reports):
            if a not in (0, 1):
                return False
            if r == 0 and a == 1:
                return False
            if d == 0 and r == 1 and a == 0:
                return False
        return True


@dataclass(frozen=True)
class TableFamily:
    """All reporting tables consistent with an observed ``(D, R)``.

    ``order`` lists the control reporters first and the treated reporters
    after them, which is the slot layout used by the solvers.  User indices
    are never reordered.
    """

    fixed_ones: tuple
    free_indices: tuple
    n: int
    n1: int

    @property
    def r0(self) -> int:
        return len(self.fixed_ones)

    @property
    def n_free(self) -> int:
        return len(self.free_indices)

    @property
    def order(self) -> tuple:
        return self.fixed_ones + self.free_indices

    @property
    def cardinality(self) -> int:
        return 2 ** self.n_free

    def table(self, chosen_free: Sequence[int]) -> ReportingTable:
        """Table with the fixed ones plus the listed free indices."""
        chosen = set(chosen_free)
        if not chosen <= set(self.free_indices):
            raise InvariantViolation("chosen indices must be free treated reporters")
        ind = [0] * self.n
        for i in self.fixed_ones:
            ind[i] = 1
        for i in chosen:
            ind[i] = 1
        return ReportingTable(tuple(ind))

    def members(self, size: Optional[int] = None) -> Iterator[ReportingTable]:
        """Iterate over member tables, optionally only those of a given size."""
        if size is None:
            extras = range(self.n_free + 1)
        else:
            extras = [size - self.r0] if 0 <= size - self.r0 <= self.n_free else []
        for m in extras:
            for chosen in itertools.combinations(self.free_indices, m):
                yield self.table(chosen)

    def contains(self, table: ReportingTable) -> bool:
        if len(table.indicators) != self.n:
            return False
        fixed = set(self.fixed_ones)
        free = set(self.free_indices)
        for i, a in enumerate(table.indicators):
            if i in fixed and a != 1:
                return False
            if i not in fixed and i not in free and a != 0:
                return False
        return True


def build_family(dataset: Dataset) -> TableFamily:
    """Compatible-table family of a dataset.

    Raises
    ------
    EmptyControlReporters
        If no unit is an untreated reporter.
    """
    fixed = tuple(i for i, (d, r) in enumerate(zip(dataset.assignments, dataset.reports))
                  if d == 0 and r == 1)
    free = tuple(i for i, (d, r) in enumerate(zip(dataset.assignments, dataset.reports))
                 if d == 1 and r == 1)
    if not fixed:
        raise EmptyControlReporters("no control reporters: the always-reporter effect is undefined")
    return TableFamily(fixed, free, dataset.n, dataset.n1)


def table_cardinality_range(family: TableFamily) -> tuple:
    return family.r0, family.r0 + family.n_free
