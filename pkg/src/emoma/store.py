"""Off-chip bucket array with strict access accounting.

The store is the only component that models off-chip memory.  Every
inspection or mutation of bucket contents goes through read_bucket /
write_cell, each of which bumps the shared AccessStats, so "one memory
access per search" is measurable rather than asserted.

Buckets hold 4 cells; a cell is either None or a (key, value) pair of
64-bit ints.  In double mode the first table occupies flat buckets
[0, half) and the second table [half, total); in single mode both sides
address the same flat space and the side argument is informational.

Snapshot format (to_bytes): version byte 0x01, mode byte (0 single,
1 double), u64 LE total bucket count, then buckets in flat order, 4
cells each: u8 flag (0 empty, 1 occupied) followed by u64 LE key and
u64 LE value when the flag is 1.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum

from .hashing import HasherSet

CELLS_PER_BUCKET = 4
SNAPSHOT_VERSION = 1


class Side(IntEnum):
    FIRST = 0
    SECOND = 1


class Placement(IntEnum):
    VIA_H1 = 0
    VIA_H2 = 1


@dataclass(frozen=True)
class StatsSnapshot:
    offchip_reads: int
    offchip_writes: int
    cbbf_counter_accesses: int

    def __sub__(self, other: "StatsSnapshot") -> "StatsSnapshot":
        return StatsSnapshot(
            self.offchip_reads - other.offchip_reads,
            self.offchip_writes - other.offchip_writes,
            self.cbbf_counter_accesses - other.cbbf_counter_accesses,
        )


class AccessStats:
    """Running counters of simulated off-chip traffic."""

    __slots__ = ("offchip_reads", "offchip_writes", "cbbf_counter_accesses")

    def __init__(self):
        self.reset()

    def reset(self) -> None:
        self.offchip_reads = 0
        self.offchip_writes = 0
        self.cbbf_counter_accesses = 0

    def snapshot(self) -> StatsSnapshot:
        return StatsSnapshot(self.offchip_reads, self.offchip_writes,
                             self.cbbf_counter_accesses)


def check_value(value: int) -> None:
    if not isinstance(value, int) or value < 0 or value >= (1 << 64):
        raise ValueError(f"value must be an int in [0, 2^64), got {value!r}")


class CuckooStore:
    """Bucket array addressed by (side, index) with access accounting.

    placement_of classifies a resident without touching off-chip state:
    it trusts that the caller actually observed the key at the given
    location (it validates only that the location is one of the key's
    two legal buckets) and resolves the single-mode h1 == h2 degenerate
    case through the filter, whose bit queries are on-chip.
    """

    def __init__(self, hashers: HasherSet, stats: AccessStats, cbbf=None):
        self.hashers = hashers
        self.stats = stats
        self.cbbf = cbbf
        self.mode = hashers.mode
        self.total_buckets = hashers.total_buckets
        self.half = hashers.total_buckets // 2
        self._cells: list = [None] * (self.total_buckets * CELLS_PER_BUCKET)
        self._occupied = 0

    def attach_filter(self, cbbf) -> None:
        self.cbbf = cbbf

    @property
    def capacity(self) -> int:
        return self.total_buckets * CELLS_PER_BUCKET

    @property
    def occupied_count(self) -> int:
        return self._occupied

    def flat_index(self, side: Side, index: int) -> int:
        if self.mode == "single":
            if not 0 <= index < self.total_buckets:
                raise IndexError(f"bucket index {index} out of range")
            return index
        if not 0 <= index < self.half:
            raise IndexError(f"bucket index {index} out of range")
        return index if side == Side.FIRST else self.half + index

    def side_of_flat(self, flat: int) -> tuple[Side, int]:
        """Inverse of flat_index for scans; single mode reports FIRST."""
        if self.mode == "single" or flat < self.half:
            return Side.FIRST, flat
        return Side.SECOND, flat - self.half

    def read_bucket(self, side: Side, index: int) -> list:
        """Copy of the 4 cells of one bucket; costs one off-chip read."""
        base = self.flat_index(side, index) * CELLS_PER_BUCKET
        self.stats.offchip_reads += 1
        return self._cells[base:base + CELLS_PER_BUCKET]

    def write_cell(self, side: Side, index: int, cell_no: int,
                   content) -> None:
        """Set one cell to (key, value) or None; costs one off-chip write."""
        if not 0 <= cell_no < CELLS_PER_BUCKET:
            raise IndexError(f"cell number {cell_no} out of range")
        if content is not None:
            key, value = content
            HasherSet.check_key(key)
            check_value(value)
            content = (key, value)
        pos = self.flat_index(side, index) * CELLS_PER_BUCKET + cell_no
        was = self._cells[pos]
        self._cells[pos] = content
        self._occupied += (content is not None) - (was is not None)
        self.stats.offchip_writes += 1

    def placement_of(self, key: int, side: Side, index: int) -> Placement:
        """Whether the key residing at (side, index) sits in its first or
        second bucket.  Raises KeyError when the location is not one of
        the key's two buckets."""
        h1, h2 = self.hashers.bucket_hashes(key)
        flat = self.flat_index(side, index)
        at_h1 = flat == self.flat_index(Side.FIRST, h1)
        at_h2 = flat == self.flat_index(Side.SECOND, h2)
        if at_h1 and at_h2:
            if self.cbbf is None:
                return Placement.VIA_H1
            return Placement.VIA_H2 if self.cbbf.query(key) else Placement.VIA_H1
        if at_h1:
            return Placement.VIA_H1
        if at_h2:
            return Placement.VIA_H2
        raise KeyError(f"key {key} cannot reside in bucket {index} "
                       f"(side {int(side)})")

    def scan(self):
        """Yield (flat_index, bucket copy) for every bucket, accounted."""
        for flat in range(self.total_buckets):
            side, index = self.side_of_flat(flat)
            yield flat, self.read_bucket(side, index)

    def to_bytes(self) -> bytes:
        out = [struct.pack("<BBQ", SNAPSHOT_VERSION,
                           0 if self.mode == "single" else 1,
                           self.total_buckets)]
        for _, bucket in self.scan():
            for cell in bucket:
                if cell is None:
                    out.append(b"\x00")
                else:
                    out.append(struct.pack("<BQQ", 1, cell[0], cell[1]))
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes, hashers: HasherSet, stats: AccessStats,
                   cbbf=None) -> "CuckooStore":
        version, mode_byte, total = struct.unpack_from("<BBQ", data, 0)
        if version != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        mode = "single" if mode_byte == 0 else "double"
        if mode != hashers.mode or total != hashers.total_buckets:
            raise ValueError("snapshot geometry does not match hashers")
        store = cls(hashers, stats, cbbf)
        offset = 10
        for flat in range(total):
            side, index = store.side_of_flat(flat)
            for cell_no in range(CELLS_PER_BUCKET):
                flag = data[offset]
                offset += 1
                if flag:
                    key, value = struct.unpack_from("<QQ", data, offset)
                    offset += 16
                    store.write_cell(side, index, cell_no, (key, value))
        if offset != len(data):
            raise ValueError("trailing bytes in snapshot")
        return store
