"""Counting block Bloom filter: exact counters, residuals, what-ifs."""

from collections import Counter
from itertools import combinations

import pytest

from emoma.cbbf import Cbbf
from emoma.errors import FilterCorruptionError
from emoma.hashing import HasherSet, SplitMix64
from emoma.store import AccessStats

from helpers import find_key, find_keys


def make_filter(seed=11, buckets=64, k=3, bb=16):
    hashers = HasherSet(seed, "single", buckets, k, bb)
    stats = AccessStats()
    return Cbbf(hashers, stats), hashers, stats


def test_fresh_filter_is_all_negative():
    f, hashers, _ = make_filter()
    rng = SplitMix64(1)
    assert all(not f.query(rng.next_u64()) for _ in range(2000))
    assert f.dump_nonempty() == []


def test_add_makes_query_positive_and_sets_exact_counters():
    f, hashers, _ = make_filter()
    key = find_key(lambda x: len(set(hashers.bit_positions(x))) == 3)
    f.add(key)
    assert f.query(key)
    block = hashers.block_index(key)
    counters = f.counters_of_block(block)
    expected = Counter(hashers.bit_positions(key))
    for pos in range(16):
        assert counters[pos] == expected.get(pos, 0)
    mask = f.bits_of_block(block)
    assert mask == sum(1 << pos for pos in expected)


def test_duplicate_positions_bump_one_counter_twice():
    f, hashers, _ = make_filter()
    key = find_key(lambda x: len(set(hashers.bit_positions(x))) == 2)
    f.add(key)
    block = hashers.block_index(key)
    counters = f.counters_of_block(block)
    assert sorted(c for c in counters if c) == [1, 2]
    assert f.counter_watermark == 2


def test_add_twice_remove_twice_is_multiset_balanced():
    f, hashers, _ = make_filter()
    key = 424242
    f.add(key)
    f.add(key)
    block = hashers.block_index(key)
    assert all(c in (0, 2, 4) for c in f.counters_of_block(block))
    f.remove(key)
    assert f.query(key)  # one add still recorded
    f.remove(key)
    assert not f.query(key)
    assert f.dump_nonempty() == []


def test_remove_restores_prior_state():
    f, hashers, _ = make_filter()
    x, y = 1001, 2002
    f.add(x)
    before_bits = [f.bits_of_block(b) for b in range(f.num_blocks)]
    before_counters = [f.counters_of_block(b) for b in range(f.num_blocks)]
    f.add(y)
    f.remove(y)
    assert [f.bits_of_block(b) for b in range(f.num_blocks)] == before_bits
    assert [f.counters_of_block(b)
            for b in range(f.num_blocks)] == before_counters


def test_remove_unrecorded_raises():
    f, _, _ = make_filter()
    with pytest.raises(FilterCorruptionError):
        f.remove(12345)


def test_false_positive_by_construction():
    f, hashers, _ = make_filter(buckets=8)
    x = find_key(lambda a: len(set(hashers.bit_positions(a))) == 3)
    xpos = set(hashers.bit_positions(x))
    xblock = hashers.block_index(x)
    y = find_key(lambda b: b != x
                 and hashers.block_index(b) == xblock
                 and set(hashers.bit_positions(b)) <= xpos)
    f.add(x)
    assert f.query(y)  # never added: a false positive by construction


def test_residual_positive_false_for_lone_key():
    f, _, _ = make_filter()
    f.add(777)
    assert not f.residual_positive(777)


def test_residual_positive_true_when_fully_covered():
    f, hashers, _ = make_filter(buckets=8)
    x = 31337
    xpos = set(hashers.bit_positions(x))
    xblock = hashers.block_index(x)
    y = find_key(lambda b: b != x
                 and hashers.block_index(b) == xblock
                 and set(hashers.bit_positions(b)) >= xpos)
    f.add(x)
    f.add(y)
    assert f.residual_positive(x)
    f.remove(y)
    assert not f.residual_positive(x)


def test_residual_positive_unrecorded_raises():
    f, _, _ = make_filter()
    with pytest.raises(ValueError):
        f.residual_positive(55)
    f.add(55)
    f.remove(55)
    with pytest.raises(ValueError):
        f.residual_positive(55)


def test_would_create_positive_cases():
    f, hashers, _ = make_filter(buckets=8)
    a = find_key(lambda x: len(set(hashers.bit_positions(x))) == 3)
    ablock = hashers.block_index(a)
    apos = set(hashers.bit_positions(a))
    covered = find_key(lambda b: b != a
                       and hashers.block_index(b) == ablock
                       and set(hashers.bit_positions(b)) <= apos)
    uncovered = find_key(lambda b: b != a
                         and hashers.block_index(b) == ablock
                         and not set(hashers.bit_positions(b)) <= apos)
    assert f.would_create_positive(a, covered)
    assert not f.would_create_positive(a, uncovered)
    f.add(covered)
    # probe already positive: nothing new would be created
    assert not f.would_create_positive(a, covered)
    other_block = find_key(lambda b: hashers.block_index(b) != ablock)
    with pytest.raises(ValueError):
        f.would_create_positive(a, other_block)


def test_counter_access_accounting():
    f, hashers, stats = make_filter(k=3)
    key = 909
    f.query(key)
    f.would_create_positive(key, find_key(
        lambda b: hashers.block_index(b) == hashers.block_index(key)))
    assert stats.cbbf_counter_accesses == 0  # bit-plane ops are on-chip
    f.add(key)
    assert stats.cbbf_counter_accesses == 3
    f.residual_positive(key)
    assert stats.cbbf_counter_accesses == 6
    f.remove(key)
    assert stats.cbbf_counter_accesses == 9


def test_clone_equivalence_exhaustive_small():
    """residual_positive and would_create_positive agree with literally
    cloning the filter and replaying remove/add, over every subset of a
    small same-block key pool."""
    hashers = HasherSet(13, "single", 2, 2, 4)
    stats = AccessStats()
    pool = find_keys(lambda x: hashers.block_index(x) == 0, 6)
    probes = pool + find_keys(lambda x: hashers.block_index(x) == 0, 4,
                              start=pool[-1] + 1)
    for r in range(4):
        for subset in combinations(pool, r):
            f = Cbbf(hashers, stats)
            for key in subset:
                f.add(key)
            for key in subset:
                twin = f.clone()
                twin.remove(key)
                assert f.residual_positive(key) == twin.query(key)
            for added in pool:
                for probe in probes:
                    twin = f.clone()
                    already = twin.query(probe)
                    twin.add(added)
                    expect = (not already) and twin.query(probe)
                    assert f.would_create_positive(added, probe) == expect


def test_random_ops_match_multiset_oracle():
    f, hashers, _ = make_filter(buckets=16)
    rng = SplitMix64(77)
    pool = list(range(4000, 4040))
    recorded = []
    for step in range(2500):
        if recorded and rng.coin(0.45):
            key = recorded.pop(rng.next_below(len(recorded)))
            f.remove(key)
        else:
            key = pool[rng.next_below(len(pool))]
            f.add(key)
            recorded.append(key)
        if step % 50 == 0:
            oracle = Counter()
            for key in recorded:
                block = hashers.block_index(key)
                for pos in hashers.bit_positions(key):
                    oracle[(block, pos)] += 1
            for block in range(f.num_blocks):
                counters = f.counters_of_block(block)
                mask = f.bits_of_block(block)
                for pos in range(f.block_bits):
                    assert counters[pos] == oracle.get((block, pos), 0)
                    assert bool((mask >> pos) & 1) == (counters[pos] > 0)
            for key in recorded:
                assert f.query(key)
    assert f.counter_watermark >= 1


def test_dump_format():
    hashers = HasherSet(13, "single", 4, 2, 4)
    f = Cbbf(hashers, AccessStats())
    key = find_key(lambda x: hashers.block_index(x) == 2
                   and len(set(hashers.bit_positions(x))) == 2)
    f.add(key)
    lines = f.dump_nonempty()
    assert len(lines) == 1
    pos = sorted(set(hashers.bit_positions(key)))
    mask = sum(1 << p for p in pos)
    counters = ",".join("1" if i in pos else "0" for i in range(4))
    assert lines[0] == f"2: {mask:01x} {counters}"
