"""Exact comparisons of probabilities against decimal thresholds.

Probabilities computed from assignment counts are ratios of integers, and
user thresholds such as 0.05 are meant as decimals.  Comparing in rational
arithmetic avoids decisions that flip on the last bit of a float.
"""

from __future__ import annotations

import math
from fractions import Fraction


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(repr(float(x)))


def threshold_count(level, denom: int) -> int:
    """Smallest integer count ``c`` with ``c / denom >= level``."""
    return math.ceil(as_fraction(level) * denom)


def ratio_ge(num: int, den: int, level) -> bool:
    return Fraction(num, den) >= as_fraction(level)


def ratio_le(num: int, den: int, level) -> bool:
    return Fraction(num, den) <= as_fraction(level)


def ratio_lt(num: int, den: int, level) -> bool:
    return Fraction(num, den) < as_fraction(level)
