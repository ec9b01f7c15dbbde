import pytest
from hypothesis import given, settings, strategies as st

from hsmuce.errors import DomainError
from hsmuce.intervals import build, dyadic_depth, next_power_of_two
from oracles import dyadic_members


def spans(system, k):
    return [tuple(p) for p in system.members(k)]


def test_n8_partition():
    s = build(8, "dyadic")
    assert s.d == 3
    assert spans(s, 1) == [(1, 2), (3, 4), (5, 6), (7, 8)]
    assert spans(s, 2) == [(1, 4), (5, 8)]
    assert spans(s, 3) == [(1, 8)]


def test_n2_partition():
    s = build(2, "dyadic-partition")
    assert s.labels == (1,)
    assert spans(s, 1) == [(1, 2)]


def test_n10_partition_leaves_tail_to_scale_one():
    s = build(10, "dyadic")
    assert len(spans(s, 1)) == 5 and spans(s, 1)[-1] == (9, 10)
    assert spans(s, 2) == [(1, 4), (5, 8)]
    assert spans(s, 3) == [(1, 8)]
    covered = [(a, b) for k in (2, 3) for a, b in spans(s, k)]
    assert all(b <= 8 for _, b in covered)


def test_intervals_on():
    s = build(8, "dyadic")
    assert sorted(map(tuple, s.intervals_on(1, 4))) == [(1, 2), (1, 4), (3, 4)]
    assert list(s.intervals_on(2, 3)) == []
    assert len(list(s.intervals_on(1, 8))) == s.size


def test_errors():
    with pytest.raises(DomainError):
        build(1, "dyadic")
    with pytest.raises(DomainError):
        build(8, "triangles")


def test_all_intervals_labels_are_lengths():
    s = build(6, "all")
    assert s.labels == (2, 3, 4, 5, 6)
    assert s.size == sum(6 - l + 1 for l in range(2, 7))


def test_helpers():
    assert dyadic_depth(1023) == 9 and dyadic_depth(1024) == 10
    assert next_power_of_two(100) == 128 and next_power_of_two(64) == 64


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 300), st.sampled_from(["dyadic-partition", "dyadic-length", "all-intervals"]))
def test_matches_enumeration(n, kind):
    if kind == "all-intervals" and n > 60:
        n = 60
    s = build(n, kind)
    ref = sorted((a, b) for a, b, _ in dyadic_members(n, kind))
    assert sorted(zip(s.starts.tolist(), s.ends.tolist())) == ref


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 5000))
def test_partition_counting(n):
    s = build(n, "dyadic")
    assert s.size < n
    for k in s.labels:
        m = spans(s, k)
        assert len(m) == n // 2 ** k
        assert all(b - a + 1 == 2 ** k for a, b in m)
        assert all(m[i][1] + 1 == m[i + 1][0] for i in range(len(m) - 1))
        assert m[0][0] == 1


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 40), st.data())
def test_intervals_on_property(n, data):
    s = build(n, "dyadic-length")
    i = data.draw(st.integers(1, n - 1))
    j = data.draw(st.integers(i + 1, n))
    got = sorted(map(tuple, s.intervals_on(i, j)))
    want = sorted((a, b) for k in s.labels for a, b in spans(s, k) if i <= a and b <= j)
    assert got == want
