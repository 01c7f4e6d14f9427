"""Test statistics for the always-reporter effect.

Every statistic is stored on the squared scale.  The studentized Hajek term
is ``hajek**2 / hajek_var``; T1 and T2 add a penalty for imbalance in the
treated always-reporter count.  Conventions: an empty arm makes the Hajek
term 0, ``0/0 = 0``, and ``x/0`` with ``x != 0`` is ``+inf`` with the
degenerate flag raised.

Outcomes are shifted by a data-dependent reference value before moments are
formed.  The statistics are shift invariant, and working with centred values
keeps constant or integer-valued outcomes exact.
"""

from __future__ import annotations

import enum
import math
import statistics as _pystats
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _numerics as nx
from .core import Dataset
from .errors import InfeasibleCounts, InvariantViolation, MissingOutcome


class StatKind(enum.Enum):
    T0 = 0
    T1 = 1
    T2 = 2

    @classmethod
    def parse(cls, value) -> "StatKind":
        if isinstance(value, StatKind):
            return value
        try:
            return cls[str(value).upper()]
        except KeyError:
            raise InvariantViolation(f"unknown statistic {value!r}; expected t0, t1 or t2") from None

    @property
    def label(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class StatValue:
    value: float
    degenerate_flag: bool = False


def floor_minus(x: float) -> float:
    return max(0.0, -x)


def outcome_reference(values: Sequence[float]) -> float:
    """Low median of the observed outcomes, the shift used for moments."""
    vals = [v for v in values if v is not None]
    if not vals:
        return 0.0
    return float(_pystats.median_low(vals))


def _bits(x) -> tuple:
    return tuple(int(b) for b in getattr(x, "bits", getattr(x, "indicators", x)))


def dim_ar(D, A, n1: Optional[int] = None) -> float:
    """Balance of always-reporter indicators across arms."""
    d, a = _bits(D), _bits(A)
    if len(d) != len(a):
        raise InvariantViolation("assignment and table lengths differ")
    n = len(d)
    n1 = sum(d) if n1 is None else n1
    nA1 = sum(di * ai for di, ai in zip(d, a))
    nA = sum(a)
    return nx.dim_counts(nA1, n, n1, nA)


def var_dim(n: int, n1: int, nA: int) -> float:
    if n < 2:
        raise InvariantViolation("need n >= 2")
    return nx.var_dim_value(n, n1, nA)


def g(kind, nA1: int, n: int, n1: int, nA: int) -> float:
    kind = StatKind.parse(kind)
    if not 0 <= nA1 <= nA:
        raise InvariantViolation("need 0 <= nA1 <= nA")
    return nx.g_value(kind.value, nA1, n, n1, nA)[0]


def g_vector(kind, n: int, n1: int, nA: int) -> np.ndarray:
    """``g`` evaluated at every treated count 0..nA."""
    kind = StatKind.parse(kind)
    return np.array([nx.g_value(kind.value, j, n, n1, nA)[0] for j in range(nA + 1)])


def arm_moments(dataset: Dataset, D, A, reference: Optional[float] = None):
    """``(nt, st, qt, nc, sc, qc)`` over always-reporters, on shifted outcomes."""
    d, a = _bits(D), _bits(A)
    if len(d) != dataset.n or len(a) != dataset.n:
        raise InvariantViolation("assignment and table must have one entry per unit")
    ref = outcome_reference(dataset.outcomes) if reference is None else reference
    treated, control = [], []
    for i, (di, ai) in enumerate(zip(d, a)):
        if not ai:
            continue
        y = dataset.outcomes[i]
        if y is None:
            raise MissingOutcome(f"unit {i} is marked as an always-reporter but has no outcome")
        (treated if di else control).append(y - ref)
    return (len(treated), math.fsum(treated), math.fsum(y * y for y in treated),
            len(control), math.fsum(control), math.fsum(y * y for y in control))


def hajek(dataset: Dataset, D, A) -> Optional[float]:
    """Difference of always-reporter arm means; ``None`` if an arm is empty."""
    nt, st, qt, nc, sc, qc = arm_moments(dataset, D, A)
    if nt == 0 or nc == 0:
        return None
    return nx.hajek_terms(nt, st, qt, nc, sc, qc)[0]


def hajek_var(dataset: Dataset, D, A) -> Optional[float]:
    nt, st, qt, nc, sc, qc = arm_moments(dataset, D, A)
    if nt == 0 or nc == 0:
        return None
    return nx.hajek_terms(nt, st, qt, nc, sc, qc)[1]


def stat(kind, dataset: Dataset, D, A, reference: Optional[float] = None) -> StatValue:
    """Squared-scale statistic of table ``A`` under assignment ``D``."""
    kind = StatKind.parse(kind)
    n1 = sum(_bits(D))
    mom = arm_moments(dataset, D, A, reference)
    value, flag = nx.stat_moments(kind.value, *mom, dataset.n, n1)
    return StatValue(float(value), bool(flag))


def stat_from_counts(kind, counts: Sequence[int], treated_counts: Sequence[int],
                     support: Sequence[float], n: int, n1: int,
                     reference: Optional[float] = None) -> StatValue:
    """Statistic from per-value always-reporter counts and treated counts.

    ``counts[k]`` always-reporters take value ``support[k]``, of which
    ``treated_counts[k]`` are treated.  Any table and assignment with these
    counts has this statistic.
    """
    kind = StatKind.parse(kind)
    if not (len(counts) == len(treated_counts) == len(support)):
        raise InfeasibleCounts("counts, treated counts and support differ in length")
    for c, t in zip(counts, treated_counts):
        if not 0 <= t <= c:
            raise InfeasibleCounts("need 0 <= treated count <= count for every value")
    ref = 0.0 if reference is None else reference
    vals = [float(v) - ref for v in support]
    nt = int(sum(treated_counts))
    nc = int(sum(counts)) - nt
    st = math.fsum(v * t for v, t in zip(vals, treated_counts))
    qt = math.fsum(v * v * t for v, t in zip(vals, treated_counts))
    sc = math.fsum(v * (c - t) for v, c, t in zip(vals, counts, treated_counts))
    qc = math.fsum(v * v * (c - t) for v, c, t in zip(vals, counts, treated_counts))
    value, flag = nx.stat_moments(kind.value, nt, st, qt, nc, sc, qc, n, n1)
    return StatValue(float(value), bool(flag))
