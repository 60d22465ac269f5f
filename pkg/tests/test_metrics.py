from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from bagchain.metrics import ZERO_METRIC, MetricValue

counts = st.integers(min_value=1, max_value=10_000).flatmap(
    lambda t: st.tuples(st.integers(min_value=0, max_value=t), st.just(t))
)


def test_bounds_enforced():
    with pytest.raises(ValueError):
        MetricValue(-1, 10)
    with pytest.raises(ValueError):
        MetricValue(11, 10)
    with pytest.raises(ValueError):
        MetricValue(0, 0)


def test_equal_ratios_compare_equal():
    assert MetricValue(1, 2) == MetricValue(50, 100)
    assert hash(MetricValue(1, 2)) == hash(MetricValue(50, 100))
    assert MetricValue(1, 2) != MetricValue(51, 100)


@given(counts, counts)
def test_ordering_matches_fraction_oracle(a, b):
    x, y = MetricValue(*a), MetricValue(*b)
    fx, fy = Fraction(*a), Fraction(*b)
    assert (x < y) == (fx < fy)
    assert (x <= y) == (fx <= fy)
    assert (x == y) == (fx == fy)
    assert (x > y) == (fx > fy)


def test_exceeds_is_strict():
    assert not MetricValue(1, 2).exceeds(0.5)
    assert MetricValue(51, 100).exceeds(0.5)
    assert MetricValue(1, 10).exceeds(0.0)
    assert not ZERO_METRIC.exceeds(0.0)


def test_exceeds_uses_exact_float_value():
    # 0.1 as a double is slightly above 1/10, so 1/10 does not exceed it
    assert not MetricValue(1, 10).exceeds(0.1)
    assert MetricValue(11, 100).exceeds(0.1)


def test_value_and_canonical_bytes():
    m = MetricValue(3, 4)
    assert m.value == 0.75
    assert m.canonical_bytes() != MetricValue(3, 5).canonical_bytes()
    # canonical bytes keep the raw counts, not the reduced ratio
    assert MetricValue(1, 2).canonical_bytes() != MetricValue(2, 4).canonical_bytes()
