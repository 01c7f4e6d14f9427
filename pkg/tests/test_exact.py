import collections
import math
from fractions import Fraction

import numpy as np
import pytest

from attrition_ri import randomization as rz
from attrition_ri.core import Dataset, build_family
from attrition_ri.errors import SupportTooLarge
from attrition_ri.exact import (CountVector, TreatedSplit, count_vectors, exact_p_counts, layout,
                                split_pmf, worst_case_small_support)
from attrition_ri.pretest import prune
from oracles import random_dataset, table_p_fraction, worst_p_fraction


def brute_count_vectors(data, sizes=None):
    lay = layout(data)
    out = set()
    for t in build_family(data).members():
        if sizes is not None and t.size not in sizes:
            continue
        c = [0] * lay.support.K
        for y, a in zip(data.outcomes, t.indicators):
            if a:
                c[lay.support.index(y)] += 1
        out.add(tuple(c))
    return out


def test_count_vectors_two_free_binary():
    data = Dataset((1.0, 0.0, 1.0, None), (1, 1, 0, 0), (1, 1, 1, 0))
    vecs = count_vectors(data)
    assert len(vecs) == 4
    assert {c.counts for c in vecs} == brute_count_vectors(data)
    assert [c.counts for c in vecs] == sorted(c.counts for c in vecs)


def test_count_vectors_no_free_units():
    data = Dataset((None, None, 1.0, 0.0), (1, 1, 0, 0), (0, 0, 1, 1))
    assert [c.counts for c in count_vectors(data)] == [(1, 1)]


@pytest.mark.parametrize("seed", range(10))
def test_count_vectors_match_brute_force_with_pruning(seed):
    rng = np.random.default_rng(seed)
    data = random_dataset(rng, int(rng.integers(4, 11)), support=[0.0, 1.0, 2.5])
    fam = build_family(data)
    pr = prune(fam, 0.3)
    vecs = count_vectors(data, pr)
    sizes = set(pr.cardinalities(fam.r0))
    assert {c.counts for c in vecs} == brute_count_vectors(data, sizes)
    assert len(vecs) == len({c.counts for c in vecs})
    assert all(c.nA in sizes for c in vecs)


def test_support_too_large():
    data = Dataset(tuple(float(i) for i in range(8)), (1, 0) * 4, (1,) * 8)
    with pytest.raises(SupportTooLarge):
        count_vectors(data, max_support=6)


def test_split_pmf_normalises():
    c = CountVector((2, 1))
    total = math.fsum(split_pmf(c, TreatedSplit((a, b)), 6, 3) for a in range(3) for b in range(2))
    assert total == pytest.approx(1.0, abs=1e-15)


def test_split_pmf_single_value_is_hypergeometric():
    for t in range(5):
        assert split_pmf(CountVector((4,)), TreatedSplit((t,)), 9, 4) == pytest.approx(
            rz.nA1_pmf(9, 4, 4, t), abs=1e-15)


def test_split_pmf_enumeration():
    # units 0 and 1 carry values v1 and v2; split (1, 0) treats unit 0 only
    freq = Fraction(sum(D.bits[0] == 1 and D.bits[1] == 0 for D in rz.enumerate_cr(4, 2)), 6)
    assert split_pmf(CountVector((1, 1)), TreatedSplit((1, 0)), 4, 2) == pytest.approx(float(freq))
    assert split_pmf(CountVector((1, 1)), TreatedSplit((2, 0)), 4, 2) == 0.0


@pytest.mark.parametrize("n, n1, c", [(7, 3, (2, 2, 1)), (8, 4, (3, 3)), (10, 2, (1, 4, 2))])
def test_split_pmf_normalises_generally(n, n1, c):
    splits = [TreatedSplit(t) for t in np.ndindex(*[k + 1 for k in c])]
    assert math.fsum(split_pmf(CountVector(c), s, n, n1) for s in splits) == pytest.approx(1.0)


def test_constant_outcomes_p_one():
    data = Dataset((2.0, 2.0, 2.0, 2.0, None), (1, 1, 0, 0, 0), (1, 1, 1, 1, 0))
    for c in count_vectors(data):
        assert exact_p_counts("t0", c, data).p == 1.0


@pytest.mark.parametrize("seed", range(15))
def test_exact_p_matches_enumeration(seed):
    rng = np.random.default_rng(100 + seed)
    data = random_dataset(rng, int(rng.integers(3, 9)), support=[-1.0, 0.0, 2.0])
    lay = layout(data)
    fam = build_family(data)
    for kind in ("t0", "t1", "t2"):
        for t in fam.members():
            c = [0] * lay.support.K
            for y, a in zip(data.outcomes, t.indicators):
                if a:
                    c[lay.support.index(y)] += 1
            res = exact_p_counts(kind, CountVector(tuple(c)), data, lay=lay)
            oracle = table_p_fraction(kind, data, t)
            assert Fraction(res.num, res.den) == oracle
            obs = tuple(ci - ctl for ci, ctl in zip(c, lay.control))
            assert res.p >= split_pmf(CountVector(tuple(c)), TreatedSplit(obs), data.n, data.n1) - 1e-15


def test_any_p_one_vector_fails_to_reject():
    data = Dataset((2.0, 2.0, 2.0, 2.0, None), (1, 1, 0, 0, 0), (1, 1, 1, 1, 0))
    dec = worst_case_small_support("t0", data, 0.1, 0.01)
    assert not dec.reject
    assert dec.worst_p_lower == 1.0


def test_strong_effect_rejects():
    n = 30
    d = (1,) * 15 + (0,) * 15
    y = tuple([1.0] * 15 + [0.0] * 15)
    data = Dataset(y, d, (1,) * n)
    dec = worst_case_small_support("t1", data, 0.1, 0.01)
    assert dec.reject
    assert dec.worst_p_upper is not None and dec.worst_p_upper <= 0.09


@pytest.mark.parametrize("seed", range(6))
def test_reduction_sound_up_to_ten_units(seed):
    rng = np.random.default_rng(500 + seed)
    data = random_dataset(rng, 10, binary=True, p_report=0.6)
    dec = worst_case_small_support("t1", data, 0.5, 0.0, early_exit=False)
    # both sides are correctly rounded ratios of the same integers
    assert dec.worst_p_upper == float(worst_p_fraction("t1", data))


@pytest.mark.parametrize("seed", range(30))
def test_early_exit_keeps_decision(seed):
    rng = np.random.default_rng(900 + seed)
    data = random_dataset(rng, int(rng.integers(6, 16)), binary=True)
    for alpha in (0.1, 0.3, 0.6):
        a = worst_case_small_support("t2", data, alpha, 0.01, early_exit=True)
        b = worst_case_small_support("t2", data, alpha, 0.01, early_exit=False)
        assert a.reject == b.reject
        assert a.worst_p_lower <= b.worst_p_upper


def test_monte_carlo_fallback():
    rng = np.random.default_rng(4)
    data = random_dataset(rng, 12, support=[0.0, 1.0, 2.0])
    c = count_vectors(data)[-1]
    exact = exact_p_counts("t1", c, data)
    mc = exact_p_counts("t1", c, data, lattice_limit=1, n_mc=20_000, seed=3)
    assert exact.exact and not mc.exact
    assert abs(mc.p - exact.p) < 4 * math.sqrt(exact.p * (1 - exact.p) / 20_000) + 1e-3


def test_large_design_uses_float_weights():
    n = 80
    rng = np.random.default_rng(8)
    data = random_dataset(rng, n, binary=True, p_report=0.9)
    dec = worst_case_small_support("t1", data, 0.1, 0.01)
    assert dec.worst_p_lower is None or 0.0 <= dec.worst_p_lower <= 1.0
