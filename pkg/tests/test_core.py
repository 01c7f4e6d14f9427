import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attrition_ri.core import (Dataset, ReportingTable, StratumLabel, build_family,
                               classify_unit, table_cardinality_range)
from attrition_ri.errors import EmptyControlReporters, InvariantViolation


def toy():
    # units 1..6 of the strata table, here 0-based: two treated reporters,
    # one treated non-reporter, one control reporter, two control non-reporters
    return Dataset((1.0, 2.0, None, 0.5, None, None), (1, 1, 1, 0, 0, 0), (1, 1, 0, 1, 0, 0))


def test_classify_unit_cases():
    assert classify_unit(0, 1) is StratumLabel.KNOWN_ALWAYS_REPORTER
    assert classify_unit(1, 0) is StratumLabel.KNOWN_NOT_ALWAYS_REPORTER
    assert classify_unit(0, 0) is StratumLabel.KNOWN_NOT_ALWAYS_REPORTER
    assert classify_unit(1, 1) is StratumLabel.AMBIGUOUS


def test_classify_unit_rejects_non_bits():
    with pytest.raises(InvariantViolation):
        classify_unit(2, 1)


def test_toy_family():
    fam = build_family(toy())
    assert fam.fixed_ones == (3,)
    assert fam.free_indices == (0, 1)
    assert fam.cardinality == 4
    assert table_cardinality_range(fam) == (1, 3)


def test_no_ambiguous_units_single_member():
    data = Dataset((None, None, 2.0, None), (1, 1, 0, 0), (0, 0, 1, 0))
    fam = build_family(data)
    members = list(fam.members())
    assert members == [ReportingTable((0, 0, 1, 0))]
    assert table_cardinality_range(fam) == (1, 1)


def test_all_treated_reporters_but_one():
    n = 7
    data = Dataset(tuple(float(i) for i in range(n)), (1,) * (n - 1) + (0,), (1,) * n)
    fam = build_family(data)
    assert fam.cardinality == 2 ** (n - 1)
    assert len(list(fam.members())) == 2 ** (n - 1)


def test_empty_control_reporters():
    data = Dataset((1.0, None, None), (1, 0, 0), (1, 0, 0))
    with pytest.raises(EmptyControlReporters):
        build_family(data)


@pytest.mark.parametrize("outcomes, d, r", [
    ((1.0, None), (1, 0), (1, 1)),       # reporter without outcome
    ((1.0, 2.0), (1, 0), (1, 0)),        # outcome without report
    ((1.0, 2.0), (1, 1), (1, 1)),        # no control unit
    ((1.0, 2.0), (2, 0), (1, 1)),        # non-binary assignment
    ((1.0,), (1,), (1,)),                # too small
])
def test_dataset_invariants(outcomes, d, r):
    with pytest.raises(InvariantViolation):
        Dataset(outcomes, d, r)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=2, max_size=10))
def test_family_enumeration_matches_filter(units):
    d = tuple(u[0] for u in units)
    r = tuple(u[1] for u in units)
    if not 1 <= sum(d) <= len(d) - 1 or not any(a == 0 and b == 1 for a, b in units):
        return
    data = Dataset(tuple(1.0 if b else None for b in r), d, r)
    fam = build_family(data)
    # brute force over all 0/1 vectors, filtered by the compatibility rules
    compatible = {bits for bits in itertools.product((0, 1), repeat=len(d))
                  if ReportingTable(bits).is_compatible(data)}
    members = {t.indicators for t in fam.members()}
    assert members == compatible
    assert len(members) == 2 ** fam.n_free
    assert all(fam.contains(ReportingTable(b)) for b in members)
    lo, hi = table_cardinality_range(fam)
    assert {sum(b) for b in members} == set(range(lo, hi + 1))


def test_family_members_by_size():
    fam = build_family(toy())
    assert [t.indicators for t in fam.members(2)] == [(1, 0, 0, 1, 0, 0), (0, 1, 0, 1, 0, 0)]
    assert list(fam.members(5)) == []


def test_contains_rejects_incompatible():
    fam = build_family(toy())
    assert not fam.contains(ReportingTable((1, 1, 0, 0, 0, 0)))
    assert not fam.contains(ReportingTable((1, 1, 1, 1, 0, 0)))
