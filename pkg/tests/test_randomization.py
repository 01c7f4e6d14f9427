import collections
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attrition_ri import randomization as rz
from attrition_ri.errors import BudgetExceeded, InvariantViolation
from oracles import hypergeom_oracle


def test_sample_cr_cardinality():
    a = rz.sample_cr(4, 2, rz.RngStream(1, 0))
    assert sum(a.bits) == 2 and len(a.bits) == 4


def test_sample_cr_uniform():
    counts = collections.Counter(rz.sample_cr(4, 2, rz.RngStream(11, s)).bits for s in range(60_000))
    assert len(counts) == 6
    for c in counts.values():
        assert abs(c / 60_000 - 1 / 6) < 0.01


@pytest.mark.parametrize("n, n1", [(4, 4), (4, 0), (1, 1)])
def test_sample_cr_invalid(n, n1):
    with pytest.raises(InvariantViolation):
        rz.sample_cr(n, n1, rz.RngStream(0))


def test_enumerate_cr_counts():
    assert len(list(rz.enumerate_cr(4, 2))) == 6
    assert len(set(a.bits for a in rz.enumerate_cr(6, 3))) == 20
    with pytest.raises(BudgetExceeded):
        next(rz.enumerate_cr(40, 20))


def test_nA1_pmf_examples():
    assert Fraction(rz.nA1_pmf(4, 2, 2, 1)).limit_denominator(100) == Fraction(2, 3)
    assert rz.nA1_pmf(4, 2, 2, 1) == pytest.approx(float(hypergeom_oracle(4, 2, 2, 1)), abs=1e-15)
    assert rz.nA1_pmf(9, 3, 0, 0) == 1.0
    assert math.fsum(rz.nA1_pmf(10, 4, 7, k) for k in range(8)) == pytest.approx(1.0, abs=1e-15)
    assert rz.nA1_pmf(10, 4, 7, 9) == 0.0


@pytest.mark.parametrize("n, n1, nA", [(6, 3, 2), (7, 2, 4), (8, 5, 6)])
def test_nA1_pmf_matches_enumeration(n, n1, nA):
    for k in range(nA + 1):
        assert rz.nA1_pmf(n, n1, nA, k) == pytest.approx(float(hypergeom_oracle(n, n1, nA, k)),
                                                          abs=1e-14)


def test_log_space_matches_exact():
    assert rz.log_comb(100, 37) == pytest.approx(math.log(math.comb(100, 37)), rel=1e-12)
    big = rz.nA1_pmf(2000, 1000, 300, 150)
    assert 0.0 < big < 1.0


def test_sample_induced_full_slots_is_cr():
    counts = collections.Counter(rz.sample_induced(4, 2, 4, rz.RngStream(5, s)).bits
                                 for s in range(30_000))
    assert set(counts) == {a.bits for a in rz.enumerate_cr(4, 2)}
    for c in counts.values():
        assert abs(c / 30_000 - 1 / 6) < 0.012


def test_induced_two_slots_both_treated():
    # enumeration oracle: fraction of CR(6,3) assignments treating units 0 and 1
    exact = Fraction(sum(a.bits[0] and a.bits[1] for a in rz.enumerate_cr(6, 3)), 20)
    assert exact == Fraction(math.comb(4, 1), math.comb(6, 3))
    draws = rz.induced_matrix(6, 3, 2, 3, range(40_000))
    assert abs(draws.all(axis=1).mean() - float(exact)) < 0.01


def test_single_slot_marginal():
    draws = rz.induced_matrix(10, 3, 1, 8, range(40_000))
    assert abs(draws.mean() - 0.3) < 0.01


@pytest.mark.parametrize("n, n1, k", [(5, 2, 3), (6, 3, 4), (8, 4, 5), (7, 6, 3)])
def test_enumerate_induced_is_marginal_of_cr(n, n1, k):
    # exact marginal equivalence: counts of each slot pattern agree
    pats, counts = rz.enumerate_induced(n, n1, k)
    law = {tuple(p): c for p, c in zip(pats.tolist(), counts)}
    oracle = collections.Counter(a.bits[:k] for a in rz.enumerate_cr(n, n1))
    assert law == dict(oracle)
    assert sum(counts) == math.comb(n, n1)


def test_streams_reproducible_and_independent_of_order():
    a = rz.induced_matrix(30, 15, 20, 42, [3, 1, 2])
    b = rz.induced_matrix(30, 15, 20, 42, [1, 2, 3])
    assert np.array_equal(a[0], b[2]) and np.array_equal(a[1], b[0])
    assert np.array_equal(rz.induced_matrix(30, 15, 20, 42, [5]),
                          rz.induced_matrix(30, 15, 20, 42, [5]))
    assert not np.array_equal(rz.induced_matrix(30, 15, 20, 42, [5]),
                              rz.induced_matrix(30, 15, 20, 43, [5]))


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 40).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n - 1),
                                                      st.integers(1, n))),
       st.integers(0, 2 ** 32))
def test_induced_count_in_support(dims, seed):
    n, n1, k = dims
    bits = rz.induced_bits(n, n1, k, rz.RngStream(seed))
    lo, hi = rz.nA1_support(n, n1, k)
    assert lo <= int(bits.sum()) <= hi


def test_child_streams_differ():
    s = rz.RngStream(7)
    assert s.child(1).seed != s.child(2).seed
    assert s.child(1) == s.child(1)
