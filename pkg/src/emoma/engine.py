"""Compiled batch engine mirroring the reference dictionary bit for bit.

The pure-Python structures in dictionary.py define the semantics; this
module reimplements the identical algorithm (same hash derivation, same
RNG stream and draw order, same stash mechanics, same access
accounting) with numba kernels over flat numpy arrays, so that
experiments needing 10^8..10^9 placement iterations finish in minutes
on one core.  tests/test_engine.py locks the two implementations
together: after identical operation streams, every array, counter,
stash slot and RNG state must match the reference exactly.

Layout: cell i of bucket b lives at flat index b * 4 + i; in double
mode the second table occupies flat buckets [half, total).  The filter
has one uint64 bit mask per block plus a uint32 counter per block bit.
"""

from __future__ import annotations

import numpy as np
from numba import njit, uint64

from .dictionary import (CuckooDict, EmomaConfig, EmomaDict, InsertOutcome,
                         TAG_DICT_RNG)
from .errors import DuplicateKeyError, StructureFailedError
from .hashing import MASK64, fmix64

U64 = np.uint64
GOLD = U64(0x9E3779B97F4A7C15)
MIX1 = U64(0xBF58476D1CE4E5B9)
MIX2 = U64(0x94D049BB133111EB)
ONE = U64(1)
ZERO = U64(0)
FLOAT_SCALE = 1.1102230246251565e-16  # 2^-53

# indices into the scalar state vector
ST_STASH_SIZE = 0
ST_OCCUPIED = 1
ST_FAILED = 2
ST_WATERMARK = 3
ST_COUNTER_WATERMARK = 4
ST_ITER_TOTAL = 5
ST_INSERTS = 6
STATE_LEN = 7

# indices into the stats vector
SV_READS = 0
SV_WRITES = 1
SV_COUNTERS = 2
STATS_LEN = 3


@njit(cache=True, inline="always")
def _fmix(x):
    x = uint64(x)
    x ^= x >> uint64(30)
    x = uint64(x * MIX1)
    x ^= x >> uint64(27)
    x = uint64(x * MIX2)
    x ^= x >> uint64(31)
    return x


@njit(cache=True, inline="always")
def _mulhi(x, n):
    # floor(x * n / 2^64) for n < 2^32, via 32-bit limbs
    lo = uint64(x & uint64(0xFFFFFFFF)) * uint64(n)
    hi = uint64(x >> uint64(32)) * uint64(n)
    return uint64((hi + (lo >> uint64(32))) >> uint64(32))


@njit(cache=True, inline="always")
def _rng_next(rng):
    rng[0] = uint64(rng[0] + GOLD)
    return _fmix(rng[0])


@njit(cache=True, inline="always")
def _rng_below(rng, n):
    return np.int64(_mulhi(_rng_next(rng), uint64(n)))


@njit(cache=True, inline="always")
def _rng_float(rng):
    return (_rng_next(rng) >> uint64(11)) * FLOAT_SCALE


@njit(cache=True, inline="always")
def _h1(key, tweaks, nb1):
    return np.int64(_mulhi(_fmix(uint64(key) ^ tweaks[0]), uint64(nb1)))


@njit(cache=True, inline="always")
def _h2(key, tweaks, nb2):
    return np.int64(_mulhi(_fmix(uint64(key) ^ tweaks[1]), uint64(nb2)))


@njit(cache=True, inline="always")
def _gpos(key, tweaks, j, bb):
    return np.int64(_mulhi(_fmix(uint64(key) ^ tweaks[2 + j]), uint64(bb)))


@njit(cache=True, inline="always")
def _flat(side, index, double_mode, half):
    if double_mode and side == 1:
        return index + half
    return index


# -- filter primitives -------------------------------------------------------


@njit(cache=True, inline="always")
def _query(key, bits, tweaks, nb1, k, bb):
    mask = bits[_h1(key, tweaks, nb1)]
    for j in range(k):
        if (mask >> uint64(_gpos(key, tweaks, j, bb))) & ONE == ZERO:
            return False
    return True


@njit(cache=True)
def _cbbf_add(key, bits, counters, tweaks, nb1, k, bb, state, stats):
    block = _h1(key, tweaks, nb1)
    base = block * bb
    for j in range(k):
        pos = _gpos(key, tweaks, j, bb)
        c = counters[base + pos] + np.uint32(1)
        counters[base + pos] = c
        if c > state[ST_COUNTER_WATERMARK]:
            state[ST_COUNTER_WATERMARK] = c
        bits[block] |= ONE << uint64(pos)
    stats[SV_COUNTERS] += k


@njit(cache=True)
def _cbbf_remove(key, bits, counters, tweaks, nb1, k, bb, stats):
    block = _h1(key, tweaks, nb1)
    base = block * bb
    for j in range(k):
        pos = _gpos(key, tweaks, j, bb)
        c = counters[base + pos] - np.uint32(1)
        counters[base + pos] = c
        if c == np.uint32(0):
            bits[block] &= ~(ONE << uint64(pos))
    stats[SV_COUNTERS] += k


@njit(cache=True)
def _residual_positive(key, counters, tweaks, nb1, k, bb, stats):
    base = _h1(key, tweaks, nb1) * bb
    stats[SV_COUNTERS] += k
    for j in range(k):
        pos = _gpos(key, tweaks, j, bb)
        mult = 0
        for i in range(k):
            if _gpos(key, tweaks, i, bb) == pos:
                mult += 1
        if np.int64(counters[base + pos]) - mult <= 0:
            return False
    return True


@njit(cache=True, inline="always")
def _would_create(added, probe, bits, tweaks, nb1, k, bb):
    block = _h1(added, tweaks, nb1)
    mask = bits[block]
    positive = True
    for j in range(k):
        if (mask >> uint64(_gpos(probe, tweaks, j, bb))) & ONE == ZERO:
            positive = False
            break
    if positive:
        return False
    for j in range(k):
        mask |= ONE << uint64(_gpos(added, tweaks, j, bb))
    for j in range(k):
        if (mask >> uint64(_gpos(probe, tweaks, j, bb))) & ONE == ZERO:
            return False
    return True


@njit(cache=True, inline="always")
def _placement(key, side, index, bits, tweaks, nb1, nb2, k, bb,
               double_mode, half):
    # 0 = first bucket, 1 = second bucket
    h1 = _h1(key, tweaks, nb1)
    h2 = _h2(key, tweaks, nb2)
    flat = _flat(side, index, double_mode, half)
    f1 = _flat(0, h1, double_mode, half)
    f2 = _flat(1, h2, double_mode, half)
    if flat == f1 and flat == f2:
        if _query(key, bits, tweaks, nb1, k, bb):
            return 1
        return 0
    if flat == f1:
        return 0
    return 1


# -- stash -------------------------------------------------------------------


@njit(cache=True, inline="always")
def _stash_put(key, value, skeys, svals, state, scap):
    size = state[ST_STASH_SIZE]
    if size == scap:
        return False
    skeys[size] = key
    svals[size] = value
    state[ST_STASH_SIZE] = size + 1
    if size + 1 > state[ST_WATERMARK]:
        state[ST_WATERMARK] = size + 1
    return True


@njit(cache=True, inline="always")
def _stash_remove(key, skeys, svals, state):
    size = state[ST_STASH_SIZE]
    for i in range(size):
        if skeys[i] == uint64(key):
            skeys[i] = skeys[size - 1]
            svals[i] = svals[size - 1]
            state[ST_STASH_SIZE] = size - 1
            return True
    return False


@njit(cache=True, inline="always")
def _stash_lookup(key, skeys, svals, state):
    for i in range(state[ST_STASH_SIZE]):
        if skeys[i] == uint64(key):
            return i
    return -1


# -- dictionary with filter ----------------------------------------------


@njit(cache=True)
def _search(key, tkeys, tvals, occ, bits, skeys, svals, state, stats,
            tweaks, nb1, nb2, k, bb, double_mode, half):
    i = _stash_lookup(key, skeys, svals, state)
    if i >= 0:
        return True, svals[i]
    if _query(key, bits, tweaks, nb1, k, bb):
        flat = _flat(1, _h2(key, tweaks, nb2), double_mode, half)
    else:
        flat = _flat(0, _h1(key, tweaks, nb1), double_mode, half)
    stats[SV_READS] += 1
    base = flat * 4
    for c in range(4):
        if occ[base + c] == 1 and tkeys[base + c] == uint64(key):
            return True, tvals[base + c]
    return False, ZERO


@njit(cache=True)
def _remove(key, tkeys, tvals, occ, bits, counters, skeys, svals, state,
            stats, tweaks, nb1, nb2, k, bb, double_mode, half):
    if _stash_remove(key, skeys, svals, state):
        return True
    positive = _query(key, bits, tweaks, nb1, k, bb)
    h1 = _h1(key, tweaks, nb1)
    h2 = _h2(key, tweaks, nb2)
    if positive:
        side, index = 1, h2
    else:
        side, index = 0, h1
    flat = _flat(side, index, double_mode, half)
    stats[SV_READS] += 1
    base = flat * 4
    for c in range(4):
        if occ[base + c] == 1 and tkeys[base + c] == uint64(key):
            placement = _placement(key, side, index, bits, tweaks, nb1,
                                   nb2, k, bb, double_mode, half)
            occ[base + c] = 0
            state[ST_OCCUPIED] -= 1
            stats[SV_WRITES] += 1
            if placement == 1:
                _cbbf_remove(key, bits, counters, tweaks, nb1, k, bb, stats)
            return True
    return False


@njit(cache=True)
def _select_bucket(key, tkeys, occ, bits, rng, tweaks, nb1, nb2, k, bb,
                   double_mode, half, p):
    # returns (case_id, side)
    h1 = _h1(key, tweaks, nb1)
    h2 = _h2(key, tweaks, nb2)
    if _query(key, bits, tweaks, nb1, k, bb):
        return 1, 1
    base1 = _flat(0, h1, double_mode, half) * 4
    empty1 = False
    for c in range(4):
        if occ[base1 + c] == 0:
            empty1 = True
            break
    if empty1:
        return 2, 0
    creates = False
    for c in range(4):
        zkey = tkeys[base1 + c]
        if _placement(zkey, 0, h1, bits, tweaks, nb1, nb2, k, bb,
                      double_mode, half) == 0:
            if _would_create(key, zkey, bits, tweaks, nb1, k, bb):
                creates = True
                break
    # honored only with probability p: mutual flippers otherwise bounce
    # through case 4 forever without ever touching the filter
    if creates and _rng_float(rng) < p:
        return 4, 0
    base2 = _flat(1, h2, double_mode, half) * 4
    for c in range(4):
        if occ[base2 + c] == 0:
            return 3, 1
    if _rng_float(rng) < 0.5:
        return 5, 0
    return 5, 1


@njit(cache=True)
def _select_cell(side, index, tkeys, occ, bits, counters, rng, tweaks,
                 nb1, nb2, k, bb, double_mode, half, p, stats):
    base = _flat(side, index, double_mode, half) * 4
    pool = np.empty(4, np.int64)
    npool = 0
    for c in range(4):
        if occ[base + c] == 0:
            pool[npool] = c
            npool += 1
    if npool > 0:
        return pool[_rng_below(rng, npool)]
    costs = np.zeros(4, np.int64)
    locked = np.zeros(4, np.int64)
    for c in range(4):
        zkey = tkeys[base + c]
        if _placement(zkey, side, index, bits, tweaks, nb1, nb2, k, bb,
                      double_mode, half) == 1:
            if _residual_positive(zkey, counters, tweaks, nb1, k, bb, stats):
                locked[c] = 1
        else:
            cost = 0
            for j in range(4):
                if j == c or occ[base + j] == 0:
                    continue
                wkey = tkeys[base + j]
                if _placement(wkey, side, index, bits, tweaks, nb1, nb2,
                              k, bb, double_mode, half) == 0:
                    if _would_create(zkey, wkey, bits, tweaks, nb1, k, bb):
                        cost += 1
            costs[c] = cost
    npool = 0
    for c in range(4):
        if locked[c] == 0:
            pool[npool] = c
            npool += 1
    if npool == 0:
        return _rng_below(rng, 4)
    if _rng_float(rng) < p:
        best = costs[pool[0]]
        for i in range(1, npool):
            if costs[pool[i]] < best:
                best = costs[pool[i]]
        nbest = 0
        for i in range(npool):
            if costs[pool[i]] == best:
                pool[nbest] = pool[i]
                nbest += 1
        npool = nbest
    return pool[_rng_below(rng, npool)]


@njit(cache=True)
def _place_one(key, value, tkeys, tvals, occ, bits, counters, skeys, svals,
               state, stats, rng, tweaks, nb1, nb2, k, bb, double_mode,
               half, p, scap):
    h1 = _h1(key, tweaks, nb1)
    h2 = _h2(key, tweaks, nb2)
    stats[SV_READS] += 2
    case_id, side = _select_bucket(key, tkeys, occ, bits, rng, tweaks, nb1,
                                   nb2, k, bb, double_mode, half, p)
    index = h1 if side == 0 else h2
    cell = _select_cell(side, index, tkeys, occ, bits, counters, rng,
                        tweaks, nb1, nb2, k, bb, double_mode, half, p, stats)
    base = _flat(side, index, double_mode, half) * 4
    if occ[base + cell] == 1:
        vkey = tkeys[base + cell]
        vval = tvals[base + cell]
        placement = _placement(vkey, side, index, bits, tweaks, nb1, nb2,
                               k, bb, double_mode, half)
        occ[base + cell] = 0
        state[ST_OCCUPIED] -= 1
        stats[SV_WRITES] += 1
        if not _stash_put(vkey, vval, skeys, svals, state, scap):
            return False
        if placement == 1:
            _cbbf_remove(vkey, bits, counters, tweaks, nb1, k, bb, stats)
    if side == 1:
        # record in the filter, then evict any first-bucket resident of
        # block h1 that the new bits flipped positive
        base1 = _flat(0, h1, double_mode, half) * 4
        same_bucket = base1 == base
        cand = np.empty(4, np.int64)
        ncand = 0
        for c in range(4):
            if occ[base1 + c] == 0:
                continue
            if same_bucket and c == cell:
                continue
            if _placement(tkeys[base1 + c], 0, h1, bits, tweaks, nb1,
                          nb2, k, bb, double_mode, half) == 0:
                cand[ncand] = c
                ncand += 1
        _cbbf_add(key, bits, counters, tweaks, nb1, k, bb, state, stats)
        for i in range(ncand):
            c = cand[i]
            zkey = tkeys[base1 + c]
            if _query(zkey, bits, tweaks, nb1, k, bb):
                zval = tvals[base1 + c]
                occ[base1 + c] = 0
                state[ST_OCCUPIED] -= 1
                stats[SV_WRITES] += 1
                if not _stash_put(zkey, zval, skeys, svals, state, scap):
                    return False
    tkeys[base + cell] = key
    tvals[base + cell] = value
    occ[base + cell] = 1
    state[ST_OCCUPIED] += 1
    stats[SV_WRITES] += 1
    _stash_remove(key, skeys, svals, state)
    return True


@njit(cache=True)
def _insert(key, value, tkeys, tvals, occ, bits, counters, skeys, svals,
            state, stats, rng, tweaks, nb1, nb2, k, bb, double_mode, half,
            p, t, scap):
    # duplicate check mirrors the reference: one search, one read unless
    # answered by the stash
    found, _v = _search(key, tkeys, tvals, occ, bits, skeys, svals, state,
                        stats, tweaks, nb1, nb2, k, bb, double_mode, half)
    if found:
        return -1, 0  # duplicate sentinel
    if not _stash_put(key, value, skeys, svals, state, scap):
        state[ST_FAILED] = 1
        return 0, 1
    iterations = 0
    ekey = uint64(key)
    evalue = uint64(value)
    have_current = True
    while state[ST_STASH_SIZE] > 0 and iterations < t:
        if not have_current:
            i = _rng_below(rng, state[ST_STASH_SIZE])
            ekey = skeys[i]
            evalue = svals[i]
        ok = _place_one(ekey, evalue, tkeys, tvals, occ, bits, counters,
                        skeys, svals, state, stats, rng, tweaks, nb1, nb2,
                        k, bb, double_mode, half, p, scap)
        iterations += 1
        have_current = False
        if not ok:
            state[ST_FAILED] = 1
            state[ST_ITER_TOTAL] += iterations
            state[ST_INSERTS] += 1
            return iterations, 1
    state[ST_ITER_TOTAL] += iterations
    state[ST_INSERTS] += 1
    return iterations, 0


# -- baseline (no filter) ------------------------------------------------


@njit(cache=True)
def _bl_search(key, tkeys, tvals, occ, skeys, svals, state, stats, tweaks,
               nb1, nb2, double_mode, half):
    i = _stash_lookup(key, skeys, svals, state)
    if i >= 0:
        return True, svals[i]
    base = _flat(0, _h1(key, tweaks, nb1), double_mode, half) * 4
    stats[SV_READS] += 1
    for c in range(4):
        if occ[base + c] == 1 and tkeys[base + c] == uint64(key):
            return True, tvals[base + c]
    base = _flat(1, _h2(key, tweaks, nb2), double_mode, half) * 4
    stats[SV_READS] += 1
    for c in range(4):
        if occ[base + c] == 1 and tkeys[base + c] == uint64(key):
            return True, tvals[base + c]
    return False, ZERO


@njit(cache=True)
def _bl_remove(key, tkeys, tvals, occ, skeys, svals, state, stats, tweaks,
               nb1, nb2, double_mode, half):
    if _stash_remove(key, skeys, svals, state):
        return True
    h1 = _h1(key, tweaks, nb1)
    h2 = _h2(key, tweaks, nb2)
    for side in range(2):
        index = h1 if side == 0 else h2
        base = _flat(side, index, double_mode, half) * 4
        stats[SV_READS] += 1
        for c in range(4):
            if occ[base + c] == 1 and tkeys[base + c] == uint64(key):
                occ[base + c] = 0
                state[ST_OCCUPIED] -= 1
                stats[SV_WRITES] += 1
                return True
    return False


@njit(cache=True)
def _bl_place_one(key, value, tkeys, tvals, occ, skeys, svals, state,
                  stats, rng, tweaks, nb1, nb2, double_mode, half, scap):
    h1 = _h1(key, tweaks, nb1)
    h2 = _h2(key, tweaks, nb2)
    stats[SV_READS] += 2
    base1 = _flat(0, h1, double_mode, half) * 4
    base2 = _flat(1, h2, double_mode, half) * 4
    empt_base = np.empty(8, np.int64)
    empt_cell = np.empty(8, np.int64)
    nempty = 0
    for c in range(4):
        if occ[base1 + c] == 0:
            empt_base[nempty] = base1
            empt_cell[nempty] = c
            nempty += 1
    for c in range(4):
        if occ[base2 + c] == 0:
            empt_base[nempty] = base2
            empt_cell[nempty] = c
            nempty += 1
    if nempty > 0:
        pick = _rng_below(rng, nempty)
        base = empt_base[pick]
        cell = empt_cell[pick]
    else:
        base = base1 if _rng_below(rng, 2) == 0 else base2
        cell = _rng_below(rng, 4)
        vkey = tkeys[base + cell]
        vval = tvals[base + cell]
        occ[base + cell] = 0
        state[ST_OCCUPIED] -= 1
        stats[SV_WRITES] += 1
        if not _stash_put(vkey, vval, skeys, svals, state, scap):
            return False
    tkeys[base + cell] = key
    tvals[base + cell] = value
    occ[base + cell] = 1
    state[ST_OCCUPIED] += 1
    stats[SV_WRITES] += 1
    _stash_remove(key, skeys, svals, state)
    return True


@njit(cache=True)
def _bl_insert(key, value, tkeys, tvals, occ, skeys, svals, state, stats,
               rng, tweaks, nb1, nb2, double_mode, half, t, scap):
    found, _v = _bl_search(key, tkeys, tvals, occ, skeys, svals, state,
                           stats, tweaks, nb1, nb2, double_mode, half)
    if found:
        return -1, 0
    if not _stash_put(key, value, skeys, svals, state, scap):
        state[ST_FAILED] = 1
        return 0, 1
    iterations = 0
    ekey = uint64(key)
    evalue = uint64(value)
    have_current = True
    while state[ST_STASH_SIZE] > 0 and iterations < t:
        if not have_current:
            i = _rng_below(rng, state[ST_STASH_SIZE])
            ekey = skeys[i]
            evalue = svals[i]
        ok = _bl_place_one(ekey, evalue, tkeys, tvals, occ, skeys, svals,
                           state, stats, rng, tweaks, nb1, nb2, double_mode,
                           half, scap)
        iterations += 1
        have_current = False
        if not ok:
            state[ST_FAILED] = 1
            state[ST_ITER_TOTAL] += iterations
            state[ST_INSERTS] += 1
            return iterations, 1
    state[ST_ITER_TOTAL] += iterations
    state[ST_INSERTS] += 1
    return iterations, 0


# -- batch drivers -----------------------------------------------------------


@njit(cache=True)
def _fill(target, filtered, stream, live_keys, live_size_io, tkeys, tvals,
          occ, bits, counters, skeys, svals, state, stats, rng, tweaks,
          nb1, nb2, k, bb, double_mode, half, p, t, scap):
    """Insert fresh stream keys until target table-resident elements or
    failure; stash residue does not count toward the target.  Returns the
    number of insert calls."""
    inserts = 0
    live = live_size_io[0]
    while state[ST_OCCUPIED] < target:
        key = _rng_next(stream)
        value = _rng_next(stream)
        if filtered:
            it, failed = _insert(key, value, tkeys, tvals, occ, bits,
                                 counters, skeys, svals, state, stats, rng,
                                 tweaks, nb1, nb2, k, bb, double_mode, half,
                                 p, t, scap)
        else:
            it, failed = _bl_insert(key, value, tkeys, tvals, occ, skeys,
                                    svals, state, stats, rng, tweaks, nb1,
                                    nb2, double_mode, half, t, scap)
        inserts += 1
        live_keys[live] = key
        live += 1
        if failed == 1:
            break
    live_size_io[0] = live
    return inserts


@njit(cache=True)
def _churn(replacements, filtered, stream, victim_rng, live_keys,
           live_size_io, tkeys, tvals, occ, bits, counters, skeys, svals,
           state, stats, rng, tweaks, nb1, nb2, k, bb, double_mode, half,
           p, t, scap):
    """Remove a uniform stored element then insert a fresh one, repeated;
    returns (completed replacements, stash watermark within the window,
    sum of insert iterations)."""
    window_max = state[ST_STASH_SIZE]
    iter_sum = 0
    live = live_size_io[0]
    done = 0
    for _ in range(replacements):
        vic = _rng_below(victim_rng, live)
        vkey = live_keys[vic]
        live_keys[vic] = live_keys[live - 1]
        live -= 1
        if filtered:
            _remove(vkey, tkeys, tvals, occ, bits, counters, skeys, svals,
                    state, stats, tweaks, nb1, nb2, k, bb, double_mode, half)
        else:
            _bl_remove(vkey, tkeys, tvals, occ, skeys, svals, state, stats,
                       tweaks, nb1, nb2, double_mode, half)
        key = _rng_next(stream)
        value = _rng_next(stream)
        if filtered:
            it, failed = _insert(key, value, tkeys, tvals, occ, bits,
                                 counters, skeys, svals, state, stats, rng,
                                 tweaks, nb1, nb2, k, bb, double_mode, half,
                                 p, t, scap)
        else:
            it, failed = _bl_insert(key, value, tkeys, tvals, occ, skeys,
                                    svals, state, stats, rng, tweaks, nb1,
                                    nb2, double_mode, half, t, scap)
        live_keys[live] = key
        live += 1
        iter_sum += it
        done += 1
        if state[ST_STASH_SIZE] > window_max:
            window_max = state[ST_STASH_SIZE]
        if failed == 1:
            break
    live_size_io[0] = live
    return done, window_max, iter_sum


@njit(cache=True)
def _itertime(ops, filtered, stream, victim_rng, live_keys, live_size_io,
              tkeys, tvals, occ, bits, counters, skeys, svals, state, stats,
              rng, tweaks, nb1, nb2, k, bb, double_mode, half, p, t, scap):
    """Insert a fresh element at the current load, then remove a uniform
    pre-existing one so the load holds; the insert happens with the table
    full, unlike _churn where removal opens a hole first.  Returns
    (completed pairs, stash watermark within the window, sum of insert
    iterations)."""
    window_max = state[ST_STASH_SIZE]
    iter_sum = 0
    live = live_size_io[0]
    done = 0
    for _ in range(ops):
        key = _rng_next(stream)
        value = _rng_next(stream)
        if filtered:
            it, failed = _insert(key, value, tkeys, tvals, occ, bits,
                                 counters, skeys, svals, state, stats, rng,
                                 tweaks, nb1, nb2, k, bb, double_mode, half,
                                 p, t, scap)
        else:
            it, failed = _bl_insert(key, value, tkeys, tvals, occ, skeys,
                                    svals, state, stats, rng, tweaks, nb1,
                                    nb2, double_mode, half, t, scap)
        iter_sum += it
        done += 1
        if state[ST_STASH_SIZE] > window_max:
            window_max = state[ST_STASH_SIZE]
        if failed == 1:
            break
        vic = _rng_below(victim_rng, live)
        vkey = live_keys[vic]
        live_keys[vic] = live_keys[live - 1]
        live_keys[live - 1] = key
        if filtered:
            _remove(vkey, tkeys, tvals, occ, bits, counters, skeys, svals,
                    state, stats, tweaks, nb1, nb2, k, bb, double_mode, half)
        else:
            _bl_remove(vkey, tkeys, tvals, occ, skeys, svals, state, stats,
                       tweaks, nb1, nb2, double_mode, half)
    live_size_io[0] = live
    return done, window_max, iter_sum


@njit(cache=True)
def _count_via_h1(tkeys, occ, bits, tweaks, nb1, nb2, k, bb, double_mode,
                  half, total_buckets):
    via1 = 0
    total = 0
    for flat in range(total_buckets):
        side = 1 if (double_mode and flat >= half) else 0
        index = flat - half if (double_mode and flat >= half) else flat
        base = flat * 4
        for c in range(4):
            if occ[base + c] == 1:
                total += 1
                if _placement(tkeys[base + c], side, index, bits, tweaks,
                              nb1, nb2, k, bb, double_mode, half) == 0:
                    via1 += 1
    return via1, total


@njit(cache=True)
def _verify(filtered, tkeys, occ, bits, counters, skeys, state, tweaks,
            nb1, nb2, k, bb, double_mode, half, total_buckets,
            expected_counters):
    """Invariant scan; returns a violation count (0 is clean)."""
    violations = 0
    occupied = 0
    for i in range(expected_counters.shape[0]):
        expected_counters[i] = 0
    for flat in range(total_buckets):
        side = 1 if (double_mode and flat >= half) else 0
        index = flat - half if (double_mode and flat >= half) else flat
        base = flat * 4
        for c in range(4):
            if occ[base + c] == 0:
                continue
            occupied += 1
            key = tkeys[base + c]
            h1 = _h1(key, tweaks, nb1)
            h2 = _h2(key, tweaks, nb2)
            f1 = _flat(0, h1, double_mode, half)
            f2 = _flat(1, h2, double_mode, half)
            if flat != f1 and flat != f2:
                violations += 1
                continue
            if filtered:
                placement = _placement(key, side, index, bits, tweaks,
                                       nb1, nb2, k, bb, double_mode, half)
                positive = _query(key, bits, tweaks, nb1, k, bb)
                if placement == 0 and positive:
                    violations += 1
                if placement == 1 and not positive:
                    violations += 1
                if placement == 1:
                    bbase = h1 * bb
                    for j in range(k):
                        expected_counters[bbase + _gpos(key, tweaks, j, bb)] \
                            += np.uint32(1)
    if occupied != state[ST_OCCUPIED]:
        violations += 1
    if filtered:
        for block in range(nb1):
            mask = bits[block]
            for pos in range(bb):
                actual = counters[block * bb + pos]
                if actual != expected_counters[block * bb + pos]:
                    violations += 1
                bit = (mask >> uint64(pos)) & ONE
                if (bit == ONE) != (actual > np.uint32(0)):
                    violations += 1
    # duplicate keys between table and stash
    for i in range(state[ST_STASH_SIZE]):
        key = skeys[i]
        h1 = _h1(key, tweaks, nb1)
        h2 = _h2(key, tweaks, nb2)
        for fl in (_flat(0, h1, double_mode, half),
                   _flat(1, h2, double_mode, half)):
            base = fl * 4
            for c in range(4):
                if occ[base + c] == 1 and tkeys[base + c] == key:
                    violations += 1
    return violations


@njit(cache=True)
def _search_batch(keys, expect_found, tkeys, tvals, occ, bits, skeys, svals,
                  state, stats, tweaks, nb1, nb2, k, bb, double_mode, half):
    """Bulk search; returns (mismatches, reads actually spent)."""
    bad = 0
    r0 = stats[SV_READS]
    for i in range(keys.shape[0]):
        found, _value = _search(keys[i], tkeys, tvals, occ, bits, skeys,
                                svals, state, stats, tweaks, nb1, nb2, k,
                                bb, double_mode, half)
        if found != (expect_found[i] == 1):
            bad += 1
    return bad, stats[SV_READS] - r0


class Engine:
    """Array-backed twin of EmomaDict / CuckooDict (baseline=True)."""

    def __init__(self, config: EmomaConfig, baseline: bool = False):
        self.config = config
        self.baseline = baseline
        # reuse the reference hasher derivation so tweaks match exactly
        ref = CuckooDict(config) if baseline else EmomaDict(config)
        hashers = ref.hashers
        self.nb1 = hashers.num_buckets_h1
        self.nb2 = hashers.num_buckets_h2
        self.k = config.k
        self.bb = config.block_bits
        if self.bb > 64:
            raise ValueError("engine supports at most 64 bits per block")
        self.double_mode = config.mode == "double"
        self.half = config.total_buckets // 2
        self.total_buckets = config.total_buckets
        self.tweaks = np.array((hashers.tweak_h1, hashers.tweak_h2)
                               + hashers.tweaks_g, dtype=np.uint64)
        n = config.total_buckets * 4
        self.tkeys = np.zeros(n, dtype=np.uint64)
        self.tvals = np.zeros(n, dtype=np.uint64)
        self.occ = np.zeros(n, dtype=np.uint8)
        self.bits = np.zeros(self.nb1, dtype=np.uint64)
        self.counters = np.zeros(self.nb1 * self.bb, dtype=np.uint32)
        self.skeys = np.zeros(config.stash_capacity, dtype=np.uint64)
        self.svals = np.zeros(config.stash_capacity, dtype=np.uint64)
        self.state = np.zeros(STATE_LEN, dtype=np.int64)
        self.stats = np.zeros(STATS_LEN, dtype=np.int64)
        self.rng = np.array([fmix64(config.seed ^ TAG_DICT_RNG)],
                            dtype=np.uint64)

    # properties mirroring the reference dictionary surface the harness uses

    @property
    def failed(self) -> bool:
        return bool(self.state[ST_FAILED])

    @property
    def occupied_count(self) -> int:
        return int(self.state[ST_OCCUPIED])

    @property
    def stash_size(self) -> int:
        return int(self.state[ST_STASH_SIZE])

    @property
    def stash_watermark(self) -> int:
        return int(self.state[ST_WATERMARK])

    @property
    def iterations_total(self) -> int:
        return int(self.state[ST_ITER_TOTAL])

    @property
    def inserts_total(self) -> int:
        return int(self.state[ST_INSERTS])

    def insert(self, key: int, value: int) -> InsertOutcome:
        if self.failed:
            raise StructureFailedError("structure failed earlier")
        if self.baseline:
            it, failed = _bl_insert(
                U64(key), U64(value), self.tkeys, self.tvals, self.occ,
                self.skeys, self.svals, self.state, self.stats, self.rng,
                self.tweaks, self.nb1, self.nb2, self.double_mode, self.half,
                self.config.t, self.config.stash_capacity)
        else:
            it, failed = _insert(
                U64(key), U64(value), self.tkeys, self.tvals, self.occ,
                self.bits, self.counters, self.skeys, self.svals, self.state,
                self.stats, self.rng, self.tweaks, self.nb1, self.nb2,
                self.k, self.bb, self.double_mode, self.half, self.config.p,
                self.config.t, self.config.stash_capacity)
        if it < 0:
            raise DuplicateKeyError(f"key {key} already present")
        residue = self.stash_size
        return InsertOutcome(it == 1 and residue == 0, int(it), residue,
                             bool(failed))

    def search(self, key: int):
        if self.baseline:
            found, value = _bl_search(
                U64(key), self.tkeys, self.tvals, self.occ, self.skeys,
                self.svals, self.state, self.stats, self.tweaks, self.nb1,
                self.nb2, self.double_mode, self.half)
        else:
            found, value = _search(
                U64(key), self.tkeys, self.tvals, self.occ, self.bits,
                self.skeys, self.svals, self.state, self.stats, self.tweaks,
                self.nb1, self.nb2, self.k, self.bb, self.double_mode,
                self.half)
        return int(value) if found else None

    def remove(self, key: int) -> bool:
        if self.baseline:
            return bool(_bl_remove(
                U64(key), self.tkeys, self.tvals, self.occ, self.skeys,
                self.svals, self.state, self.stats, self.tweaks, self.nb1,
                self.nb2, self.double_mode, self.half))
        return bool(_remove(
            U64(key), self.tkeys, self.tvals, self.occ, self.bits,
            self.counters, self.skeys, self.svals, self.state, self.stats,
            self.tweaks, self.nb1, self.nb2, self.k, self.bb,
            self.double_mode, self.half))

    def fill(self, target: int, stream_state, live_keys, live_size) -> int:
        return int(_fill(
            target, not self.baseline, stream_state, live_keys, live_size,
            self.tkeys, self.tvals, self.occ, self.bits, self.counters,
            self.skeys, self.svals, self.state, self.stats, self.rng,
            self.tweaks, self.nb1, self.nb2, self.k, self.bb,
            self.double_mode, self.half, self.config.p, self.config.t,
            self.config.stash_capacity))

    def churn(self, replacements: int, stream_state, victim_rng, live_keys,
              live_size):
        return _churn(
            replacements, not self.baseline, stream_state, victim_rng,
            live_keys, live_size, self.tkeys, self.tvals, self.occ,
            self.bits, self.counters, self.skeys, self.svals, self.state,
            self.stats, self.rng, self.tweaks, self.nb1, self.nb2, self.k,
            self.bb, self.double_mode, self.half, self.config.p,
            self.config.t, self.config.stash_capacity)

    def itertime(self, ops: int, stream_state, victim_rng, live_keys,
                 live_size):
        return _itertime(
            ops, not self.baseline, stream_state, victim_rng,
            live_keys, live_size, self.tkeys, self.tvals, self.occ,
            self.bits, self.counters, self.skeys, self.svals, self.state,
            self.stats, self.rng, self.tweaks, self.nb1, self.nb2, self.k,
            self.bb, self.double_mode, self.half, self.config.p,
            self.config.t, self.config.stash_capacity)

    def placement_fractions(self):
        via1, total = _count_via_h1(
            self.tkeys, self.occ, self.bits, self.tweaks, self.nb1,
            self.nb2, self.k, self.bb, self.double_mode, self.half,
            self.total_buckets)
        if total == 0:
            return 0.0, 0.0
        return via1 / total, (total - via1) / total

    def verify_violations(self) -> int:
        scratch = np.zeros(self.nb1 * self.bb, dtype=np.uint32)
        return int(_verify(
            not self.baseline, self.tkeys, self.occ, self.bits,
            self.counters, self.skeys, self.state, self.tweaks, self.nb1,
            self.nb2, self.k, self.bb, self.double_mode, self.half,
            self.total_buckets, scratch))

    def search_batch(self, keys, expect_found):
        return _search_batch(
            keys, expect_found, self.tkeys, self.tvals, self.occ, self.bits,
            self.skeys, self.svals, self.state, self.stats, self.tweaks,
            self.nb1, self.nb2, self.k, self.bb, self.double_mode, self.half)

    def to_reference(self):
        """Materialize an equivalent pure-Python dictionary (used to run
        reference-implementation measurements on engine-built states)."""
        d = CuckooDict(self.config) if self.baseline else EmomaDict(self.config)
        cells = d.store._cells
        for i in range(self.tkeys.shape[0]):
            if self.occ[i]:
                cells[i] = (int(self.tkeys[i]), int(self.tvals[i]))
        d.store._occupied = self.occupied_count
        if not self.baseline:
            d.cbbf._bits = [int(b) for b in self.bits]
            d.cbbf._counters = [int(c) for c in self.counters]
            d.cbbf.counter_watermark = int(self.state[ST_COUNTER_WATERMARK])
        for i in range(self.stash_size):
            d.stash.put(int(self.skeys[i]), int(self.svals[i]))
        d.stash._watermark = self.stash_watermark
        d.rng.state = int(self.rng[0])
        d.stats.offchip_reads = int(self.stats[SV_READS])
        d.stats.offchip_writes = int(self.stats[SV_WRITES])
        d.stats.cbbf_counter_accesses = int(self.stats[SV_COUNTERS])
        d.failed = self.failed
        d.iterations_total = self.iterations_total
        d.inserts_total = self.inserts_total
        return d


def make_stream(seed: int):
    """Engine-side key/value stream state (same draws as key_stream)."""
    return np.array([seed & MASK64], dtype=np.uint64)
