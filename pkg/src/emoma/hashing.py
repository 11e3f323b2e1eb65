"""Seeded hash family and deterministic RNG shared by every component.

All hash functions are derived from one 64-bit seed through domain
separation tags, so a structure is fully reproducible from (seed,
geometry) alone.  The same derivation is replicated verbatim by the
compiled batch engine, which is why the exact constants and the draw
order below are load-bearing: changing any of them breaks bit-exact
equivalence between the two implementations.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB

# Domain separation tag for deriving the per-function tweaks of a HasherSet.
TAG_STREAM = 0x243F6A8885A308D3


def fmix64(x: int) -> int:
    """64-bit finalizer (splitmix64 variant); bijective on [0, 2^64)."""
    x &= MASK64
    x ^= x >> 30
    x = (x * MIX1) & MASK64
    x ^= x >> 27
    x = (x * MIX2) & MASK64
    x ^= x >> 31
    return x


def mulhi64(x: int, n: int) -> int:
    """floor(x * n / 2^64): maps a uniform 64-bit value into [0, n)."""
    return (x * n) >> 64


class SplitMix64:
    """Deterministic RNG with a single 64-bit state word.

    next_u64 advances the state by the golden-ratio increment and
    finalizes it with fmix64.  Both steps are bijections, so outputs
    at distinct stream positions are distinct 64-bit values.
    """

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return fmix64(self.state)

    def next_below(self, n: int) -> int:
        """Uniform draw in [0, n) for n < 2^32 (multiply-shift reduction)."""
        return mulhi64(self.next_u64(), n)

    def next_float(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 1.1102230246251565e-16

    def coin(self, p: float) -> bool:
        return self.next_float() < p


class HasherSet:
    """The hash functions of one structure: h1, h2 and the k block hashes.

    h1 plays a double role: it selects the first candidate bucket and it
    selects the filter block, which is what ties the filter to the table.
    Every function is fmix64 of the key xored with a per-function tweak,
    reduced into its range by multiply-shift; the tweaks come from a
    SplitMix64 stream seeded with fmix64(seed ^ TAG_STREAM) in the fixed
    order h1, h2, g_0 .. g_{k-1}.
    """

    def __init__(self, seed: int, mode: str, total_buckets: int, k: int,
                 block_bits: int):
        if mode not in ("single", "double"):
            raise ValueError(f"unknown mode {mode!r}")
        if total_buckets < 2 or total_buckets & (total_buckets - 1):
            raise ValueError("total_buckets must be a power of two >= 2")
        if mode == "double" and total_buckets < 4:
            raise ValueError("double mode needs at least 4 buckets")
        if k < 1:
            raise ValueError("k must be >= 1")
        if block_bits < 1:
            raise ValueError("block_bits must be >= 1")
        self.seed = seed & MASK64
        self.mode = mode
        self.total_buckets = total_buckets
        if mode == "single":
            self.num_buckets_h1 = total_buckets
            self.num_buckets_h2 = total_buckets
        else:
            self.num_buckets_h1 = total_buckets // 2
            self.num_buckets_h2 = total_buckets // 2
        self.k = k
        self.block_bits = block_bits
        stream = SplitMix64(fmix64(self.seed ^ TAG_STREAM))
        self.tweak_h1 = stream.next_u64()
        self.tweak_h2 = stream.next_u64()
        self.tweaks_g = tuple(stream.next_u64() for _ in range(k))

    @staticmethod
    def check_key(key: int) -> None:
        if not isinstance(key, int) or key < 0 or key > MASK64:
            raise ValueError(f"key must be an int in [0, 2^64), got {key!r}")

    def bucket_hashes(self, key: int) -> tuple[int, int]:
        """(first-bucket index, second-bucket index) for key."""
        self.check_key(key)
        h1 = mulhi64(fmix64(key ^ self.tweak_h1), self.num_buckets_h1)
        h2 = mulhi64(fmix64(key ^ self.tweak_h2), self.num_buckets_h2)
        return h1, h2

    def block_index(self, key: int) -> int:
        """Filter block of key; identical to the first bucket hash."""
        self.check_key(key)
        return mulhi64(fmix64(key ^ self.tweak_h1), self.num_buckets_h1)

    def bit_positions(self, key: int) -> tuple[int, ...]:
        """The k in-block bit positions of key (duplicates allowed)."""
        self.check_key(key)
        return tuple(mulhi64(fmix64(key ^ t), self.block_bits)
                     for t in self.tweaks_g)
