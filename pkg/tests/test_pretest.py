from fractions import Fraction

import numpy as np
import pytest

from attrition_ri import randomization as rz
from attrition_ri.core import Dataset, build_family
from attrition_ri.pretest import PretestSide, pretest_counts, pretest_p, prune
from attrition_ri.statistics import dim_ar
from oracles import random_dataset


def enumeration_p(data, i, side):
    fam = build_family(data)
    table = next(iter(fam.members(fam.r0 + i)))
    obs = dim_ar(data.assignments, table.indicators)
    hits = total = 0
    for D in rz.enumerate_cr(data.n, data.n1):
        v = dim_ar(D.bits, table.indicators)
        total += 1
        if side == "two":
            # compare with the exact integer form to avoid rounding ties
            hits += abs(round(v * 1e9)) >= abs(round(obs * 1e9))
        else:
            hits += round(obs * 1e9) >= round(v * 1e9)
    return Fraction(hits, total)


def test_balanced_observation_has_p_one():
    data = Dataset((1.0, 2.0, 0.0, None), (1, 1, 0, 0), (1, 1, 1, 0))
    fam = build_family(data)
    assert pretest_p(1, fam, "two") == 1.0
    assert enumeration_p(data, 1, "two") == 1


def test_small_design_against_enumeration():
    data = Dataset((1.0, 2.0, 0.0, None), (1, 1, 0, 0), (1, 1, 1, 0))
    fam = build_family(data)
    for i in range(fam.n_free + 1):
        for side in ("two", "paper"):
            num, den = pretest_counts(i, 4, 2, fam.r0, side)
            assert Fraction(num, den) == enumeration_p(data, i, side)


def test_full_table_has_p_one():
    data = Dataset((1.0, 2.0, 0.0, 3.0), (1, 1, 0, 0), (1, 1, 1, 1))
    fam = build_family(data)
    assert fam.r0 + fam.n_free == data.n
    assert pretest_p(fam.n_free, fam, "two") == 1.0


@pytest.mark.parametrize("seed", range(12))
def test_pretest_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    data = random_dataset(rng, int(rng.integers(3, 9)))
    fam = build_family(data)
    for i in range(fam.n_free + 1):
        for side in ("two", "paper"):
            num, den = pretest_counts(i, data.n, data.n1, fam.r0, side)
            assert Fraction(num, den) == enumeration_p(data, i, side)


def test_beta_zero_keeps_everything():
    rng = np.random.default_rng(1)
    data = random_dataset(rng, 12)
    fam = build_family(data)
    pr = prune(fam, 0.0)
    assert pr.admissible == tuple(range(fam.n_free + 1))
    assert pr.cardinalities(fam.r0) == tuple(range(fam.r0, fam.r0 + fam.n_free + 1))


def test_unbalanced_reporting_is_pruned():
    # 10 treated all reporting, 10 controls with 2 reporting
    n = 20
    d = (1,) * 10 + (0,) * 10
    r = (1,) * 10 + (1, 1) + (0,) * 8
    data = Dataset(tuple(float(i) if ri else None for i, ri in enumerate(r)), d, r)
    fam = build_family(data)
    pr = prune(fam, 0.2)
    assert set(pr.admissible) < set(range(fam.n_free + 1))
    assert 10 not in pr.admissible
    assert all(p >= 0.2 for i, p in enumerate(pr.pvalues) if i in pr.admissible)
    assert all(p < 0.2 for i, p in enumerate(pr.pvalues) if i not in pr.admissible)


def test_side_parsing():
    assert PretestSide.parse("two_sided") is PretestSide.TWO_SIDED
    assert PretestSide.parse("paper_lower") is PretestSide.PAPER_LOWER


def test_large_design_float_path():
    n, n1 = 200, 100
    d = (1,) * 100 + (0,) * 100
    r = (1,) * 90 + (0,) * 10 + (1,) * 85 + (0,) * 15
    data = Dataset(tuple(0.0 if ri else None for ri in r), d, r)
    fam = build_family(data)
    assert pretest_counts(0, n, n1, fam.r0, "two") is None
    pr = prune(fam, 0.01)
    assert 0 < len(pr.admissible) < fam.n_free + 1
    assert all(0.0 <= p <= 1.0 for p in pr.pvalues)
