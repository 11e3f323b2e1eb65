"""Bounded stash: capacity, lookup, removal, draw fairness."""

import pytest

from emoma.hashing import SplitMix64
from emoma.stash import Stash


def test_put_lookup_remove_roundtrip():
    s = Stash(capacity=4)
    assert s.put(10, 100)
    assert s.put(20, 200)
    assert s.size == 2
    assert s.lookup(10) == 100
    assert s.lookup(20) == 200
    assert s.lookup(30) is None
    assert s.remove(10)
    assert not s.remove(10)
    assert s.lookup(10) is None
    assert s.size == 1
    assert 20 in s and 10 not in s


def test_overflow_returns_false_and_keeps_contents():
    s = Stash(capacity=2)
    assert s.put(1, 1)
    assert s.put(2, 2)
    assert not s.put(3, 3)
    assert s.size == 2
    assert s.lookup(3) is None
    assert s.lookup(1) == 1


def test_duplicate_put_rejected():
    s = Stash(capacity=4)
    s.put(5, 50)
    with pytest.raises(ValueError):
        s.put(5, 51)


def test_watermark_tracks_peak_size():
    s = Stash(capacity=8)
    for i in range(5):
        s.put(i, i)
    for i in range(5):
        s.remove(i)
    assert s.size == 0
    assert s.watermark == 5
    s.put(100, 1)
    assert s.watermark == 5


def test_swap_pop_keeps_index_consistent():
    s = Stash(capacity=8)
    for i in range(6):
        s.put(i, i * 10)
    s.remove(2)  # last entry backfills slot 2
    for i in (0, 1, 3, 4, 5):
        assert s.lookup(i) == i * 10
    assert s.lookup(2) is None
    assert len(s.entries()) == 5


def test_take_random_removes_and_returns():
    s = Stash(capacity=8)
    for i in range(4):
        s.put(i, i)
    rng = SplitMix64(3)
    taken = set()
    for _ in range(4):
        key, value = s.take_random(rng)
        assert key == value
        taken.add(key)
    assert taken == {0, 1, 2, 3}
    assert s.size == 0
    assert s.take_random(rng) is None


def test_peek_random_leaves_entry_in_place():
    s = Stash(capacity=8)
    s.put(7, 70)
    rng = SplitMix64(4)
    assert s.peek_random(rng) == (7, 70)
    assert s.size == 1
    assert Stash(2).peek_random(rng) is None


def test_peek_random_is_roughly_uniform():
    s = Stash(capacity=8)
    for i in range(4):
        s.put(i, i)
    rng = SplitMix64(5)
    counts = [0, 0, 0, 0]
    n = 10_000
    for _ in range(n):
        counts[s.peek_random(rng)[0]] += 1
    # binomial(10^4, 1/4): 3 percentage points is about a 7 sigma band
    for c in counts:
        assert abs(c / n - 0.25) < 0.03


def test_capacity_validation():
    with pytest.raises(ValueError):
        Stash(0)
