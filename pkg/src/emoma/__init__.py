"""Cuckoo dictionary with one off-chip memory access per lookup."""

from .cbbf import Cbbf
from .dictionary import (BucketChoice, CuckooDict, EmomaConfig, EmomaDict,
                         InsertOutcome, InvariantReport)
from .errors import (DuplicateKeyError, EmomaError, FilterCorruptionError,
                     StructureFailedError)
from .hashing import HasherSet, SplitMix64, fmix64
from .stash import Stash
from .store import (AccessStats, CuckooStore, Placement, Side, StatsSnapshot)

__all__ = [
    "AccessStats",
    "BucketChoice",
    "Cbbf",
    "CuckooDict",
    "CuckooStore",
    "DuplicateKeyError",
    "EmomaConfig",
    "EmomaDict",
    "EmomaError",
    "FilterCorruptionError",
    "HasherSet",
    "InsertOutcome",
    "InvariantReport",
    "Placement",
    "Side",
    "SplitMix64",
    "StatsSnapshot",
    "Stash",
    "StructureFailedError",
    "fmix64",
]
