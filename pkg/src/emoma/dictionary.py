"""Cuckoo dictionary with a one-memory-access search guarantee.

EmomaDict pairs a 2-choice, 4-cell-per-bucket cuckoo table with a
counting block Bloom filter that shares the first bucket hash.  The
filter records exactly the elements placed in their second bucket, so
a search probes the stash, asks the filter, and reads one bucket:
h2(x) on a positive, h1(x) on a negative.  The insertion policy keeps
that guarantee invariant:

* an element whose filter query is already positive must go to its
  second bucket (a negative lookup would read the wrong bucket);
* whenever adding an element to the filter sets new bits, any
  first-bucket resident of that block that turns positive is evicted
  to the stash and reinserted later;
* cell victims are chosen to avoid "locked" second-bucket residents
  (elements that would stay positive even after their own removal and
  so can never move back to their first bucket) and, with probability
  p, to minimize how many co-residents a move would turn positive.

CuckooDict is the plain cuckoo baseline: same table and stash, no
filter, searches read up to two buckets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .cbbf import Cbbf
from .errors import DuplicateKeyError, StructureFailedError
from .hashing import MASK64, HasherSet, SplitMix64, fmix64
from .stash import Stash
from .store import (AccessStats, CELLS_PER_BUCKET, CuckooStore, Placement,
                    Side, check_value)

# Domain separation tag for the dictionary's internal RNG stream.
TAG_DICT_RNG = 0x452821E638D01377

DEFAULT_K = {"single": 3, "double": 4}


@dataclass
class EmomaConfig:
    """Geometry and policy knobs; defaults follow the evaluated setup."""

    mode: str = "single"
    total_buckets: int = 8192
    k: int = 0  # 0 means the per-mode default (3 single, 4 double)
    p: float = 0.99
    t: int = 100
    bpe: int = 4
    stash_capacity: int = 64
    seed: int = 1

    def __post_init__(self):
        if self.mode not in ("single", "double"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.total_buckets < 2 or self.total_buckets & (self.total_buckets - 1):
            raise ValueError("total_buckets must be a power of two >= 2")
        if self.mode == "double" and self.total_buckets < 4:
            raise ValueError("double mode needs at least 4 buckets")
        if self.k == 0:
            self.k = DEFAULT_K[self.mode]
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must be in [0, 1]")
        if self.t < 1:
            raise ValueError("t must be >= 1")
        if self.bpe < 1:
            raise ValueError("bpe must be >= 1")
        if self.stash_capacity < 1:
            raise ValueError("stash_capacity must be >= 1")
        if not 0 <= self.seed <= MASK64:
            raise ValueError("seed must be a 64-bit int")

    @property
    def capacity(self) -> int:
        return self.total_buckets * CELLS_PER_BUCKET

    @property
    def num_blocks(self) -> int:
        if self.mode == "single":
            return self.total_buckets
        return self.total_buckets // 2

    @property
    def block_bits(self) -> int:
        # bpe bits per element of block capacity: 16 single, 32 double
        # at the default bpe = 4.
        return self.bpe * (self.capacity // self.num_blocks)

    @classmethod
    def from_capacity(cls, capacity: int, **kwargs) -> "EmomaConfig":
        if capacity < 8 or capacity % CELLS_PER_BUCKET:
            raise ValueError("capacity must be a multiple of 4, >= 8")
        return cls(total_buckets=capacity // CELLS_PER_BUCKET, **kwargs)


@dataclass(frozen=True)
class BucketChoice:
    """Outcome of the five-way bucket selection for one element."""

    case_id: int  # 1..5
    side: Side


@dataclass(frozen=True)
class InsertOutcome:
    placed_immediately: bool
    iterations_used: int
    stash_residue_after: int
    failed: bool


@dataclass
class InvariantReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _build_hashers(config: EmomaConfig) -> HasherSet:
    return HasherSet(config.seed, config.mode, config.total_buckets,
                     config.k, config.block_bits)


class EmomaDict:
    """The filtered cuckoo dictionary; see the module docstring."""

    uses_filter = True

    def __init__(self, config: EmomaConfig):
        self.config = config
        self.hashers = _build_hashers(config)
        self.stats = AccessStats()
        self.cbbf = Cbbf(self.hashers, self.stats)
        self.store = CuckooStore(self.hashers, self.stats, self.cbbf)
        self.stash = Stash(config.stash_capacity)
        self.rng = SplitMix64(fmix64(config.seed ^ TAG_DICT_RNG))
        self.failed = False
        self.iterations_total = 0
        self.inserts_total = 0

    # -- queries ---------------------------------------------------------

    def search(self, key: int):
        """Value for key or None; reads at most one bucket (zero when the
        key is answered from the stash)."""
        HasherSet.check_key(key)
        hit = self.stash.lookup(key)
        if hit is not None:
            return hit
        h1, h2 = self.hashers.bucket_hashes(key)
        if self.cbbf.query(key):
            side, index = Side.SECOND, h2
        else:
            side, index = Side.FIRST, h1
        for cell in self.store.read_bucket(side, index):
            if cell is not None and cell[0] == key:
                return cell[1]
        return None

    def remove(self, key: int) -> bool:
        """Delete key; True when it was present.  Reads at most one
        bucket, and unrecords second-bucket residents from the filter."""
        HasherSet.check_key(key)
        if self.stash.remove(key):
            return True
        h1, h2 = self.hashers.bucket_hashes(key)
        if self.cbbf.query(key):
            side, index = Side.SECOND, h2
        else:
            side, index = Side.FIRST, h1
        for cell_no, cell in enumerate(self.store.read_bucket(side, index)):
            if cell is not None and cell[0] == key:
                placement = self.store.placement_of(key, side, index)
                self.store.write_cell(side, index, cell_no, None)
                if placement == Placement.VIA_H2:
                    self.cbbf.remove(key)
                return True
        return False

    # -- insertion -------------------------------------------------------

    def insert(self, key: int, value: int) -> InsertOutcome:
        """Add (key, value).  The new element always gets one placement
        attempt first; afterwards the loop keeps drawing uniformly from
        the stash until it drains or t iterations are spent.  A stash
        overflow permanently fails the structure."""
        if self.failed:
            raise StructureFailedError("structure failed earlier")
        HasherSet.check_key(key)
        check_value(value)
        if self.search(key) is not None:
            raise DuplicateKeyError(f"key {key} already present")
        if not self.stash.put(key, value):
            self.failed = True
            return InsertOutcome(False, 0, self.stash.size, True)
        iterations = 0
        current = (key, value)
        while self.stash.size > 0 and iterations < self.config.t:
            if current is None:
                current = self.stash.peek_random(self.rng)
            ok = self._place_one(current[0], current[1])
            iterations += 1
            current = None
            if not ok:
                self.failed = True
                self.iterations_total += iterations
                self.inserts_total += 1
                return InsertOutcome(False, iterations, self.stash.size, True)
        self.iterations_total += iterations
        self.inserts_total += 1
        return InsertOutcome(iterations == 1 and self.stash.size == 0,
                             iterations, self.stash.size, False)

    def _place_one(self, key: int, value: int) -> bool:
        """One placement iteration for a stash-resident element.  Returns
        False when an eviction overflowed the stash."""
        h1, h2 = self.hashers.bucket_hashes(key)
        bucket1 = self.store.read_bucket(Side.FIRST, h1)
        bucket2 = self.store.read_bucket(Side.SECOND, h2)
        choice = self.select_bucket(key, bucket1, bucket2)
        if choice.side == Side.FIRST:
            bucket, index = bucket1, h1
        else:
            bucket, index = bucket2, h2
        cell_no = self.select_cell(choice, bucket, index)
        victim = bucket[cell_no]
        if victim is not None:
            placement = self.store.placement_of(victim[0], choice.side, index)
            self.store.write_cell(choice.side, index, cell_no, None)
            if not self.stash.put(victim[0], victim[1]):
                return False
            if placement == Placement.VIA_H2:
                self.cbbf.remove(victim[0])
        if choice.side == Side.SECOND:
            if not self._record_and_sweep(key, h1, h2, bucket1, cell_no):
                return False
        self.store.write_cell(choice.side, index, cell_no, (key, value))
        self.stash.remove(key)
        return True

    def _record_and_sweep(self, key: int, h1: int, h2: int, bucket1: list,
                          target_cell: int) -> bool:
        """Record key in the filter, then evict any first-bucket resident
        of block h1(key) that the new bits turned positive.

        Residents are classified before the add (so a degenerate
        h1 == h2 key is judged by its pre-add query) and re-queried
        after it; only a negative-to-positive flip evicts.
        """
        same_bucket = (self.store.flat_index(Side.SECOND, h2)
                       == self.store.flat_index(Side.FIRST, h1))
        candidates = []
        for cell_no, cell in enumerate(bucket1):
            if cell is None or (same_bucket and cell_no == target_cell):
                continue
            if (self.store.placement_of(cell[0], Side.FIRST, h1)
                    == Placement.VIA_H1):
                candidates.append((cell_no, cell))
        self.cbbf.add(key)
        for cell_no, cell in candidates:
            if self.cbbf.query(cell[0]):
                self.store.write_cell(Side.FIRST, h1, cell_no, None)
                if not self.stash.put(cell[0], cell[1]):
                    return False
        return True

    def select_bucket(self, key: int, bucket1: list, bucket2: list) -> BucketChoice:
        """Five-way selection.  Case 1: key already tests positive, so it
        must live in its second bucket.  Case 2: room in the first
        bucket.  Case 4: recording key would turn some first-bucket
        resident positive, so prefer displacing from the first bucket
        even though it is full.  Case 3: harmless to record, room in
        the second bucket.  Case 5: both full, fair coin.

        The case 4 preference is applied greedily only with probability
        p.  Applying it always can live-lock: two first-bucket residents
        that each flip the other bounce through case 4 forever, because
        a first-bucket placement never changes the filter.  Skipping the
        check once in a while sends a trapped element down the second
        bucket path, where recording it flips its partners into case 1
        and the clique disperses."""
        h1, _h2 = self.hashers.bucket_hashes(key)
        if self.cbbf.query(key):
            return BucketChoice(1, Side.SECOND)
        if any(cell is None for cell in bucket1):
            return BucketChoice(2, Side.FIRST)
        creates = False
        for cell in bucket1:
            if (self.store.placement_of(cell[0], Side.FIRST, h1)
                    == Placement.VIA_H1
                    and self.cbbf.would_create_positive(key, cell[0])):
                creates = True
                break
        if creates and self.rng.coin(self.config.p):
            return BucketChoice(4, Side.FIRST)
        if any(cell is None for cell in bucket2):
            return BucketChoice(3, Side.SECOND)
        side = Side.FIRST if self.rng.coin(0.5) else Side.SECOND
        return BucketChoice(5, side)

    def select_cell(self, choice: BucketChoice, bucket: list,
                    index: int, rng=None) -> int:
        """Cell to take in the chosen bucket for the incoming key.  Empty
        cells win a uniform draw.  In a full bucket, locked residents are
        never picked; with probability p the draw is restricted to victims
        whose move would create the fewest new positives (second-bucket
        residents cost 0, they only clear bits when moved).  If all four
        are locked the draw is uniform over the whole bucket."""
        if rng is None:
            rng = self.rng
        empties = [i for i in range(CELLS_PER_BUCKET) if bucket[i] is None]
        if empties:
            return empties[rng.next_below(len(empties))]
        locked = [False] * CELLS_PER_BUCKET
        costs = [0] * CELLS_PER_BUCKET
        for i in range(CELLS_PER_BUCKET):
            zkey = bucket[i][0]
            if (self.store.placement_of(zkey, choice.side, index)
                    == Placement.VIA_H2):
                locked[i] = self.cbbf.residual_positive(zkey)
            else:
                costs[i] = self._move_cost(zkey, i, bucket, choice.side,
                                           index)
        unlocked = [i for i in range(CELLS_PER_BUCKET) if not locked[i]]
        if not unlocked:
            return rng.next_below(CELLS_PER_BUCKET)
        if rng.coin(self.config.p):
            best = min(costs[i] for i in unlocked)
            pool = [i for i in unlocked if costs[i] == best]
        else:
            pool = unlocked
        return pool[rng.next_below(len(pool))]

    def _move_cost(self, zkey: int, zcell: int, bucket: list, side: Side,
                   index: int) -> int:
        """How many first-bucket residents would turn positive if the
        first-bucket resident zkey moved to its second bucket."""
        cost = 0
        for j in range(CELLS_PER_BUCKET):
            if j == zcell or bucket[j] is None:
                continue
            wkey = bucket[j][0]
            if (self.store.placement_of(wkey, side, index) == Placement.VIA_H1
                    and self.cbbf.would_create_positive(zkey, wkey)):
                cost += 1
        return cost

    # -- diagnostics -----------------------------------------------------

    def verify_invariants(self) -> InvariantReport:
        """Full scan checking searchability and filter exactness."""
        report = InvariantReport()
        seen: dict = {}
        expected_counters = [0] * (self.cbbf.num_blocks * self.cbbf.block_bits)
        occupied = 0
        for flat, bucket in self.store.scan():
            side, index = self.store.side_of_flat(flat)
            for cell_no, cell in enumerate(bucket):
                if cell is None:
                    continue
                occupied += 1
                key = cell[0]
                if key in seen:
                    report.violations.append(
                        f"duplicate key {key} at flat buckets "
                        f"{seen[key]} and {flat}")
                    continue
                seen[key] = flat
                try:
                    placement = self.store.placement_of(key, side, index)
                except KeyError:
                    report.violations.append(
                        f"key {key} stored at illegal bucket {flat}")
                    continue
                if placement == Placement.VIA_H1:
                    if self.cbbf.query(key):
                        report.violations.append(
                            f"first-bucket key {key} tests positive")
                else:
                    if not self.cbbf.query(key):
                        report.violations.append(
                            f"second-bucket key {key} tests negative")
                    base = self.hashers.block_index(key) * self.cbbf.block_bits
                    for pos in self.hashers.bit_positions(key):
                        expected_counters[base + pos] += 1
        if occupied != self.store.occupied_count:
            report.violations.append(
                f"occupied_count {self.store.occupied_count} != scan {occupied}")
        for key, _ in self.stash.entries():
            if key in seen:
                report.violations.append(f"key {key} in both table and stash")
        for block in range(self.cbbf.num_blocks):
            base = block * self.cbbf.block_bits
            mask = self.cbbf.bits_of_block(block)
            for pos, actual in enumerate(self.cbbf.counters_of_block(block)):
                if actual != expected_counters[base + pos]:
                    report.violations.append(
                        f"counter mismatch block {block} bit {pos}: "
                        f"{actual} != {expected_counters[base + pos]}")
                if bool((mask >> pos) & 1) != (actual > 0):
                    report.violations.append(
                        f"bit/counter disagreement block {block} bit {pos}")
        return report

    def placement_fractions(self) -> tuple[float, float]:
        """(first-bucket, second-bucket) fractions of table residents."""
        via_h1 = 0
        total = 0
        for flat, bucket in self.store.scan():
            side, index = self.store.side_of_flat(flat)
            for cell in bucket:
                if cell is None:
                    continue
                total += 1
                if (self.store.placement_of(cell[0], side, index)
                        == Placement.VIA_H1):
                    via_h1 += 1
        if total == 0:
            return 0.0, 0.0
        return via_h1 / total, (total - via_h1) / total

    def metrics(self) -> dict:
        h1_frac, h2_frac = self.placement_fractions()
        return {
            "occupied": self.store.occupied_count,
            "load": self.store.occupied_count / self.store.capacity,
            "stash_size": self.stash.size,
            "stash_watermark": self.stash.watermark,
            "h1_fraction": h1_frac,
            "h2_fraction": h2_frac,
            "filter_counter_watermark": self.cbbf.counter_watermark,
            "offchip_reads": self.stats.offchip_reads,
            "offchip_writes": self.stats.offchip_writes,
            "cbbf_counter_accesses": self.stats.cbbf_counter_accesses,
            "mean_insert_iterations": (self.iterations_total / self.inserts_total
                                       if self.inserts_total else 0.0),
        }


class CuckooDict:
    """Plain cuckoo dictionary baseline: no filter, up to two bucket
    reads per search, empty-cell-first insertion with uniform victims."""

    uses_filter = False

    def __init__(self, config: EmomaConfig):
        self.config = config
        self.hashers = _build_hashers(config)
        self.stats = AccessStats()
        self.store = CuckooStore(self.hashers, self.stats, None)
        self.stash = Stash(config.stash_capacity)
        self.rng = SplitMix64(fmix64(config.seed ^ TAG_DICT_RNG))
        self.failed = False
        self.iterations_total = 0
        self.inserts_total = 0

    def search(self, key: int):
        HasherSet.check_key(key)
        hit = self.stash.lookup(key)
        if hit is not None:
            return hit
        h1, h2 = self.hashers.bucket_hashes(key)
        for cell in self.store.read_bucket(Side.FIRST, h1):
            if cell is not None and cell[0] == key:
                return cell[1]
        for cell in self.store.read_bucket(Side.SECOND, h2):
            if cell is not None and cell[0] == key:
                return cell[1]
        return None

    def remove(self, key: int) -> bool:
        HasherSet.check_key(key)
        if self.stash.remove(key):
            return True
        h1, h2 = self.hashers.bucket_hashes(key)
        for side, index in ((Side.FIRST, h1), (Side.SECOND, h2)):
            for cell_no, cell in enumerate(self.store.read_bucket(side, index)):
                if cell is not None and cell[0] == key:
                    self.store.write_cell(side, index, cell_no, None)
                    return True
        return False

    def insert(self, key: int, value: int) -> InsertOutcome:
        if self.failed:
            raise StructureFailedError("structure failed earlier")
        HasherSet.check_key(key)
        check_value(value)
        if self.search(key) is not None:
            raise DuplicateKeyError(f"key {key} already present")
        if not self.stash.put(key, value):
            self.failed = True
            return InsertOutcome(False, 0, self.stash.size, True)
        iterations = 0
        current = (key, value)
        while self.stash.size > 0 and iterations < self.config.t:
            if current is None:
                current = self.stash.peek_random(self.rng)
            ok = self._place_one(current[0], current[1])
            iterations += 1
            current = None
            if not ok:
                self.failed = True
                self.iterations_total += iterations
                self.inserts_total += 1
                return InsertOutcome(False, iterations, self.stash.size, True)
        self.iterations_total += iterations
        self.inserts_total += 1
        return InsertOutcome(iterations == 1 and self.stash.size == 0,
                             iterations, self.stash.size, False)

    def _place_one(self, key: int, value: int) -> bool:
        h1, h2 = self.hashers.bucket_hashes(key)
        bucket1 = self.store.read_bucket(Side.FIRST, h1)
        bucket2 = self.store.read_bucket(Side.SECOND, h2)
        empties = ([(Side.FIRST, h1, i) for i in range(CELLS_PER_BUCKET)
                    if bucket1[i] is None]
                   + [(Side.SECOND, h2, i) for i in range(CELLS_PER_BUCKET)
                      if bucket2[i] is None])
        if empties:
            side, index, cell_no = empties[self.rng.next_below(len(empties))]
        else:
            if self.rng.next_below(2) == 0:
                side, index, bucket = Side.FIRST, h1, bucket1
            else:
                side, index, bucket = Side.SECOND, h2, bucket2
            cell_no = self.rng.next_below(CELLS_PER_BUCKET)
            victim = bucket[cell_no]
            self.store.write_cell(side, index, cell_no, None)
            if not self.stash.put(victim[0], victim[1]):
                return False
        self.store.write_cell(side, index, cell_no, (key, value))
        self.stash.remove(key)
        return True

    def verify_invariants(self) -> InvariantReport:
        report = InvariantReport()
        seen: dict = {}
        occupied = 0
        for flat, bucket in self.store.scan():
            side, index = self.store.side_of_flat(flat)
            for cell in bucket:
                if cell is None:
                    continue
                occupied += 1
                key = cell[0]
                if key in seen:
                    report.violations.append(
                        f"duplicate key {key} at flat buckets "
                        f"{seen[key]} and {flat}")
                    continue
                seen[key] = flat
                try:
                    self.store.placement_of(key, side, index)
                except KeyError:
                    report.violations.append(
                        f"key {key} stored at illegal bucket {flat}")
        if occupied != self.store.occupied_count:
            report.violations.append(
                f"occupied_count {self.store.occupied_count} != scan {occupied}")
        for key, _ in self.stash.entries():
            if key in seen:
                report.violations.append(f"key {key} in both table and stash")
        return report

    def placement_fractions(self) -> tuple[float, float]:
        via_h1 = 0
        total = 0
        for flat, bucket in self.store.scan():
            side, index = self.store.side_of_flat(flat)
            for cell in bucket:
                if cell is None:
                    continue
                total += 1
                if (self.store.placement_of(cell[0], side, index)
                        == Placement.VIA_H1):
                    via_h1 += 1
        if total == 0:
            return 0.0, 0.0
        return via_h1 / total, (total - via_h1) / total

    def metrics(self) -> dict:
        h1_frac, h2_frac = self.placement_fractions()
        return {
            "occupied": self.store.occupied_count,
            "load": self.store.occupied_count / self.store.capacity,
            "stash_size": self.stash.size,
            "stash_watermark": self.stash.watermark,
            "h1_fraction": h1_frac,
            "h2_fraction": h2_frac,
            "offchip_reads": self.stats.offchip_reads,
            "offchip_writes": self.stats.offchip_writes,
            "mean_insert_iterations": (self.iterations_total / self.inserts_total
                                       if self.inserts_total else 0.0),
        }
