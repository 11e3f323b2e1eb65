"""Shared test utilities."""

from emoma.hashing import SplitMix64
from emoma.store import AccessStats


def find_key(pred, limit=5_000_000, start=0):
    """First integer key satisfying pred; sequential keys hash like
    random ones, so predicate searches converge quickly."""
    for key in range(start, start + limit):
        if pred(key):
            return key
    raise AssertionError("no key satisfying predicate within search limit")


def find_keys(pred, count, limit=5_000_000, start=0):
    out = []
    key = start
    end = start + limit
    while len(out) < count and key < end:
        if pred(key):
            out.append(key)
        key += 1
    if len(out) < count:
        raise AssertionError("too few keys satisfying predicate")
    return out


def key_stream(seed):
    """Infinite distinct-key generator (see hashing.SplitMix64 notes)."""
    rng = SplitMix64(seed)
    while True:
        yield rng.next_u64()


def run_model_sequence(d, ops, seed, max_load=0.85, block_whitelist=None,
                       verify_every=2000):
    """Drive a dictionary with a random op mix and shadow it with a plain
    dict; asserts agreement throughout and clean invariants at the end.

    block_whitelist restricts generated keys to the given filter blocks,
    which concentrates pressure on a few buckets (the adversarial mode).
    """
    model = {}
    live = []
    rng = SplitMix64(seed)
    stream = key_stream(seed ^ 0xD1CE)
    cap = int(max_load * d.store.capacity)

    def fresh_key():
        while True:
            key = next(stream)
            if key in model:
                continue
            if block_whitelist is None:
                return key
            if d.hashers.block_index(key) in block_whitelist:
                return key

    for step in range(ops):
        r = rng.next_float()
        if live and (len(model) >= cap or r < 0.30):
            pos = rng.next_below(len(live))
            key = live[pos]
            live[pos] = live[-1]
            live.pop()
            expected = model.pop(key)
            assert d.search(key) == expected
            assert d.remove(key)
            assert d.search(key) is None
        elif live and r < 0.40:
            pos = rng.next_below(len(live))
            key = live[pos]
            assert d.search(key) == model[key]
        elif r < 0.45:
            probe = next(stream)
            if probe not in model:
                assert d.search(probe) is None
        else:
            key = fresh_key()
            value = next(stream)
            out = d.insert(key, value)
            assert not out.failed, f"insert failed at step {step}"
            model[key] = value
            live.append(key)
        if verify_every and step % verify_every == verify_every - 1:
            report = d.verify_invariants()
            assert report.ok, report.violations[:5]
    assert d.store.occupied_count + d.stash.size == len(model)
    for key, value in model.items():
        assert d.search(key) == value
    report = d.verify_invariants()
    assert report.ok, report.violations[:5]
    return model


__all__ = ["AccessStats", "find_key", "find_keys", "key_stream",
           "run_model_sequence"]
