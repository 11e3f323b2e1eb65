"""Small bounded key/value stash held in on-chip memory.

Entries live in insertion order in a list with a key index on the side;
removal swap-pops, so draw order is a documented function of the put and
remove history.  The watermark records the highest size ever reached.
"""

from __future__ import annotations

from .hashing import SplitMix64


class Stash:

    def __init__(self, capacity: int = 64):
        if capacity < 1:
            raise ValueError("stash capacity must be >= 1")
        self.capacity = capacity
        self._entries: list[tuple[int, int]] = []
        self._index: dict[int, int] = {}
        self._watermark = 0

    @property
    def size(self) -> int:
        return len(self._entries)

    @property
    def watermark(self) -> int:
        return self._watermark

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: int) -> bool:
        return key in self._index

    def put(self, key: int, value: int) -> bool:
        """Add an entry; returns False (overflow) iff the stash is full."""
        if key in self._index:
            raise ValueError(f"key {key} already in stash")
        if len(self._entries) == self.capacity:
            return False
        self._index[key] = len(self._entries)
        self._entries.append((key, value))
        if len(self._entries) > self._watermark:
            self._watermark = len(self._entries)
        return True

    def lookup(self, key: int):
        """Value stored under key, or None when absent."""
        pos = self._index.get(key)
        if pos is None:
            return None
        return self._entries[pos][1]

    def remove(self, key: int) -> bool:
        """Drop the entry for key; the last entry backfills its slot."""
        pos = self._index.pop(key, None)
        if pos is None:
            return False
        last = self._entries.pop()
        if pos < len(self._entries):
            self._entries[pos] = last
            self._index[last[0]] = pos
        return True

    def peek_random(self, rng: SplitMix64):
        """Uniformly drawn entry, left in place; None when empty."""
        if not self._entries:
            return None
        return self._entries[rng.next_below(len(self._entries))]

    def take_random(self, rng: SplitMix64):
        """Uniformly drawn entry, removed; None when empty."""
        if not self._entries:
            return None
        entry = self._entries[rng.next_below(len(self._entries))]
        self.remove(entry[0])
        return entry

    def entries(self) -> list[tuple[int, int]]:
        """Snapshot of the current entries in storage order."""
        return list(self._entries)
