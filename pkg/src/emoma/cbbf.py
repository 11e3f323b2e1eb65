"""Counting block Bloom filter keyed by the first bucket hash.

One block per first-table bucket; a key's block is h1(key), so the
filter and the table agree about where a key's metadata lives.  The
filter records exactly the multiset of bit positions of the elements
currently placed in their second bucket.

Two storage planes model the hardware split: the per-block bit masks
are on-chip (query and would_create_positive touch only them, for
free), while the counters are off-chip and every add / remove /
residual_positive costs k counter accesses in the shared AccessStats.
"""

from __future__ import annotations

from collections import Counter

from .errors import FilterCorruptionError
from .hashing import HasherSet


class Cbbf:

    def __init__(self, hashers: HasherSet, stats):
        self.hashers = hashers
        self.stats = stats
        self.num_blocks = hashers.num_buckets_h1
        self.block_bits = hashers.block_bits
        self.k = hashers.k
        self._bits = [0] * self.num_blocks
        self._counters = [0] * (self.num_blocks * self.block_bits)
        self.counter_watermark = 0

    def query(self, key: int) -> bool:
        """True iff all k bits of key are set in its block (on-chip)."""
        mask = self._bits[self.hashers.block_index(key)]
        for pos in self.hashers.bit_positions(key):
            if not (mask >> pos) & 1:
                return False
        return True

    def add(self, key: int) -> None:
        """Record key: bump its counters (duplicates bump twice) and set
        its bits; costs k counter accesses."""
        block = self.hashers.block_index(key)
        base = block * self.block_bits
        for pos in self.hashers.bit_positions(key):
            c = self._counters[base + pos] + 1
            self._counters[base + pos] = c
            if c > self.counter_watermark:
                self.counter_watermark = c
            self._bits[block] |= 1 << pos
        self.stats.cbbf_counter_accesses += self.k

    def remove(self, key: int) -> None:
        """Undo one add of key, clearing bits whose counter reaches zero.
        Raises FilterCorruptionError if a counter would go negative."""
        block = self.hashers.block_index(key)
        base = block * self.block_bits
        for pos in self.hashers.bit_positions(key):
            c = self._counters[base + pos]
            if c == 0:
                raise FilterCorruptionError(
                    f"counter underflow at block {block} bit {pos}")
            c -= 1
            self._counters[base + pos] = c
            if c == 0:
                self._bits[block] &= ~(1 << pos)
        self.stats.cbbf_counter_accesses += self.k

    def residual_positive(self, key: int) -> bool:
        """Would key still test positive after removing its own add?

        Pre: key is currently recorded; detected violations (a counter
        below key's own multiplicity) raise ValueError.  Reads counters,
        so costs k counter accesses.
        """
        base = self.hashers.block_index(key) * self.block_bits
        self.stats.cbbf_counter_accesses += self.k
        for pos, mult in Counter(self.hashers.bit_positions(key)).items():
            c = self._counters[base + pos]
            if c < mult:
                raise ValueError(f"key {key} is not recorded in the filter")
            if c == mult:
                return False
        return True

    def would_create_positive(self, added_key: int, probe_key: int) -> bool:
        """Would adding added_key flip probe_key from negative to positive?

        Both keys must share a block (ValueError otherwise).  Uses only
        the on-chip bit masks, so it is free in the access accounting.
        """
        block = self.hashers.block_index(added_key)
        if self.hashers.block_index(probe_key) != block:
            raise ValueError("keys hash to different blocks")
        mask = self._bits[block]
        probe_positions = self.hashers.bit_positions(probe_key)
        for pos in probe_positions:
            if not (mask >> pos) & 1:
                break
        else:
            return False  # already positive
        for pos in self.hashers.bit_positions(added_key):
            mask |= 1 << pos
        for pos in probe_positions:
            if not (mask >> pos) & 1:
                return False
        return True

    def clone(self, stats=None) -> "Cbbf":
        """Deep copy sharing the hashers; handy for what-if checks."""
        twin = Cbbf(self.hashers, stats if stats is not None else
                    _NullStats())
        twin._bits = list(self._bits)
        twin._counters = list(self._counters)
        twin.counter_watermark = self.counter_watermark
        return twin

    def bits_of_block(self, block: int) -> int:
        return self._bits[block]

    def counters_of_block(self, block: int) -> list[int]:
        base = block * self.block_bits
        return self._counters[base:base + self.block_bits]

    def dump_nonempty(self) -> list[str]:
        """Debug lines 'block: bitmask_hex c0,c1,...' for touched blocks."""
        width = (self.block_bits + 3) // 4
        lines = []
        for block in range(self.num_blocks):
            counters = self.counters_of_block(block)
            if self._bits[block] or any(counters):
                lines.append(f"{block}: {self._bits[block]:0{width}x} "
                             + ",".join(str(c) for c in counters))
        return lines


class _NullStats:
    """Stats sink for clones so what-if probes do not pollute accounting."""

    def __init__(self):
        self.offchip_reads = 0
        self.offchip_writes = 0
        self.cbbf_counter_accesses = 0
