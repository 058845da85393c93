"""Numba nogil kernels: one bulk-synchronous round per call batch.

Every kernel operates on flat int64 arrays only and is safe to run from
several Python threads at once (the GIL is released); shared mutation
goes through the atomic intrinsics. A table is addressed as the tuple
returned by CountTableSet.kernel_args() plus a table index.

Status codes: 0 ok, 1 retry (entry lock busy, non-blocking mode),
2 node capacity exhausted.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ._atomics import atomic_add, atomic_cas, atomic_load, atomic_xchg

# Indices into the CountTableSet.kernel_args() tuple.
E_, L_, K_, V_, N_, G_, C_, EO_, EM_, NO_, NC_ = range(11)

OK = 0
RETRY = 1
FULL = 2

_JIT = dict(nogil=True, cache=True)


@njit(**_JIT)
def _mix64(z):
    z = np.uint64(z)
    z ^= z >> np.uint64(30)
    z = z * np.uint64(0xBF58476D1CE4E5B9)
    z ^= z >> np.uint64(27)
    z = z * np.uint64(0x94D049BB133111EB)
    z ^= z >> np.uint64(31)
    return z


@njit(**_JIT)
def _bucket(key, mask):
    return np.int64(_mix64(np.uint64(key)) & np.uint64(mask))


@njit(**_JIT)
def _fingerprint(words, start, width):
    h = np.uint64(0x9E3779B97F4A7C15)
    for j in range(width):
        h = _mix64(h ^ np.uint64(words[start + j] + 0x100000001B3))
    return np.int64(h & np.uint64(0x7FFFFFFFFFFFFFFF))


@njit(**_JIT)
def _pack(words, start, width, wbits):
    key = np.int64(0)
    for j in range(width):
        key = (key << wbits) | words[start + j]
    return key


@njit(**_JIT)
def table_add(ts, t, key, delta, gsrc, gstart, gw, blocking):
    """Per-entry-locked chained insert-or-add.

    Existing keys are bumped with a plain atomic add, no lock taken.
    New keys link a node at the bucket head under the entry lock; in
    non-blocking mode a busy lock returns RETRY instead of waiting.
    """
    b = ts[EO_][t] + _bucket(key, ts[EM_][t])
    node = atomic_load(ts[E_], b)
    while node != -1:
        if ts[K_][node] == key:
            same = True
            for j in range(gw):
                if ts[G_][node * gw + j] != gsrc[gstart + j]:
                    same = False
                    break
            if same:
                atomic_add(ts[V_], node, delta)
                return OK
        node = ts[N_][node]
    if blocking:
        while atomic_cas(ts[L_], b, 0, 1) != 0:
            pass
    elif atomic_cas(ts[L_], b, 0, 1) != 0:
        return RETRY
    # Re-scan: the key may have been linked while we waited.
    head = atomic_load(ts[E_], b)
    node = head
    while node != -1:
        if ts[K_][node] == key:
            same = True
            for j in range(gw):
                if ts[G_][node * gw + j] != gsrc[gstart + j]:
                    same = False
                    break
            if same:
                atomic_add(ts[V_], node, delta)
                atomic_xchg(ts[L_], b, 0)
                return OK
        node = ts[N_][node]
    n = atomic_add(ts[C_], t, 1)
    if n >= ts[NC_][t]:
        atomic_xchg(ts[L_], b, 0)
        return FULL
    abs_n = ts[NO_][t] + n
    ts[K_][abs_n] = key
    ts[V_][abs_n] = delta
    ts[N_][abs_n] = head
    for j in range(gw):
        ts[G_][abs_n * gw + j] = gsrc[gstart + j]
    atomic_xchg(ts[E_], b, abs_n)  # publish after the node is complete
    atomic_xchg(ts[L_], b, 0)
    return OK


@njit(**_JIT)
def add_batch(ts, t, keys, deltas, start, end):
    """Blocking adds for a contiguous slice of (key, delta) pairs."""
    empty = np.empty(0, dtype=np.int64)
    worst = OK
    for i in range(start, end):
        st = table_add(ts, t, keys[i], deltas[i], empty, 0, 0, 1)
        if st > worst:
            worst = st
    return worst


@njit(**_JIT)
def topdown_round(sub_ids, sub_freqs, sub_off, wmat, nfiles, cur_in, num_in,
                  mask, changes, u_rule, u_start, u_end, lo, hi):
    """Visit ready rules: push weights to children, count arrived in-edges.

    A child whose in-edges complete is masked for the next round; exactly
    one add observes the completing transition, so the mask write is
    single-writer.
    """
    for ui in range(lo, hi):
        r = u_rule[ui]
        base = sub_off[r]
        for j in range(u_start[ui], u_end[ui]):
            c = sub_ids[base + j]
            f = sub_freqs[base + j]
            for k in range(nfiles):
                w = wmat[r * nfiles + k]
                if w != 0:
                    atomic_add(wmat, c * nfiles + k, f * w)
            old = atomic_add(cur_in, c, f)
            if old + f == num_in[c]:
                mask[c] = 1
                atomic_add(changes, 0, 1)


@njit(**_JIT)
def reduce_words_round(own_ids, own_freqs, own_off, wmat, nfiles, ts,
                       u_rule, u_start, u_end, lo, hi):
    """Add own-word frequencies times rule weight into per-file tables."""
    empty = np.empty(0, dtype=np.int64)
    worst = OK
    for ui in range(lo, hi):
        r = u_rule[ui]
        base = own_off[r]
        for j in range(u_start[ui], u_end[ui]):
            k = own_ids[base + j]
            fr = own_freqs[base + j]
            for f in range(nfiles):
                w = wmat[r * nfiles + f]
                if w > 0:
                    st = table_add(ts, f, k, fr * w, empty, 0, 0, 1)
                    if st > worst:
                        worst = st
    return worst


@njit(**_JIT)
def root_words_round(body_sym, num_words, ts, u_dst, u_start, u_end, lo, hi):
    """Insert plain words of root body ranges (weight 1) into dst tables."""
    empty = np.empty(0, dtype=np.int64)
    worst = OK
    for ui in range(lo, hi):
        t = u_dst[ui]
        for p in range(u_start[ui], u_end[ui]):
            s = body_sym[p]
            if s < num_words:
                st = table_add(ts, t, s, 1, empty, 0, 0, 1)
                if st > worst:
                    worst = st
    return worst


@njit(**_JIT)
def bounds_round(own_distinct, cap, sub_ids, sub_freqs, sub_off, bound,
                 ready, lo, hi):
    """Local-table size limits: own distinct words plus children's bounds."""
    for ri in range(lo, hi):
        r = ready[ri]
        b = own_distinct[r]
        for j in range(sub_off[r], sub_off[r + 1]):
            b += bound[sub_ids[j]]
        if b > cap[r]:
            b = cap[r]
        bound[r] = b


@njit(**_JIT)
def finalize_round(par_ids, par_freqs, par_off, num_out, cur_out, mask,
                   changes, ready, lo, hi):
    """After a bottom-up round: report finished out-edges to parents."""
    for ri in range(lo, hi):
        r = ready[ri]
        for j in range(par_off[r], par_off[r + 1]):
            p = par_ids[j]
            old = atomic_add(cur_out, p, par_freqs[j])
            if p != 0 and old + par_freqs[j] == num_out[p]:
                mask[p] = 1
                atomic_add(changes, 0, 1)


@njit(**_JIT)
def own_insert_round(own_ids, own_freqs, own_off, ts, u_rule, u_start, u_end,
                     lo, hi):
    """Seed each ready rule's own table with its own word frequencies."""
    empty = np.empty(0, dtype=np.int64)
    worst = OK
    for ui in range(lo, hi):
        r = u_rule[ui]
        base = own_off[r]
        for j in range(u_start[ui], u_end[ui]):
            st = table_add(ts, r, own_ids[base + j], own_freqs[base + j],
                           empty, 0, 0, 1)
            if st > worst:
                worst = st
    return worst


@njit(**_JIT)
def merge_round(dst, src, gw, u_dst, u_src, u_scale, u_start, u_end, lo, hi):
    """Scaled table merges: dst[k] += src[k] * scale over node ranges."""
    worst = OK
    for ui in range(lo, hi):
        d = u_dst[ui]
        sbase = src[NO_][u_src[ui]]
        scale = u_scale[ui]
        for i in range(u_start[ui], u_end[ui]):
            n = sbase + i
            st = table_add(dst, d, src[K_][n], src[V_][n] * scale,
                           src[G_], n * gw, gw, 1)
            if st > worst:
                worst = st
    return worst


@njit(**_JIT)
def merge_try_round(dst, src, gw, u_dst, u_src, u_scale, u_start, u_end,
                    u_done, done, pending, lo, hi):
    """Non-blocking merge: items that lose the entry lock stay pending
    and are retried by the next launch (round stop-flag protocol)."""
    worst = OK
    for ui in range(lo, hi):
        d = u_dst[ui]
        sbase = src[NO_][u_src[ui]]
        scale = u_scale[ui]
        dbase = u_done[ui] - u_start[ui]
        for i in range(u_start[ui], u_end[ui]):
            if done[dbase + i]:
                continue
            n = sbase + i
            st = table_add(dst, d, src[K_][n], src[V_][n] * scale,
                           src[G_], n * gw, gw, 0)
            if st == RETRY:
                atomic_add(pending, 0, 1)
            elif st == FULL:
                worst = FULL
            else:
                done[dbase + i] = 1
    return worst


@njit(**_JIT)
def window_count_round(words, region, seq_len, wbits, gw, ts,
                       u_dst, u_scale, u_start, u_end, lo, hi):
    """Count sliding windows of a local stream into a table.

    A window is skipped when it crosses a gap (region -2) or lies
    entirely inside one inlined-child span (non-negative region id at
    both ends), which that child counts itself.
    """
    worst = OK
    for ui in range(lo, hi):
        t = u_dst[ui]
        scale = u_scale[ui]
        for p in range(u_start[ui], u_end[ui]):
            blocked = False
            for j in range(seq_len):
                if region[p + j] == -2:
                    blocked = True
                    break
            if blocked:
                continue
            if region[p] >= 0 and region[p] == region[p + seq_len - 1]:
                continue
            if gw == 0:
                key = _pack(words, p, seq_len, wbits)
            else:
                key = _fingerprint(words, p, seq_len)
            st = table_add(ts, t, key, scale, words, p, gw, 1)
            if st > worst:
                worst = st
    return worst


def warmup() -> None:
    """Force-compile every kernel with representative small inputs."""
    ts = (
        np.full(4, -1, dtype=np.int64), np.zeros(4, dtype=np.int64),
        np.zeros(4, dtype=np.int64), np.zeros(4, dtype=np.int64),
        np.full(4, -1, dtype=np.int64), np.zeros(8, dtype=np.int64),
        np.zeros(1, dtype=np.int64), np.zeros(1, dtype=np.int64),
        np.asarray([3], dtype=np.int64), np.zeros(1, dtype=np.int64),
        np.asarray([4], dtype=np.int64),
    )
    z = np.zeros(1, dtype=np.int64)
    o = np.ones(1, dtype=np.int64)
    two = np.asarray([2], dtype=np.int64)
    table_add(ts, 0, 7, 1, z, 0, 0, 1)
    add_batch(ts, 0, o, o, 0, 1)
    topdown_round(z, o, np.asarray([0, 1], dtype=np.int64), np.zeros(2, dtype=np.int64),
                  1, z.copy(), o.copy(), z.copy(), z.copy(), z, z, o, 0, 1)
    reduce_words_round(z, o, np.asarray([0, 1], dtype=np.int64),
                       o, 1, ts, z, z, o, 0, 1)
    root_words_round(z, 1, ts, z, z, o, 0, 1)
    bounds_round(o, two, z, o, np.asarray([0, 1], dtype=np.int64), z.copy(), z, 0, 1)
    finalize_round(z, o, np.asarray([0, 1], dtype=np.int64), o.copy(), z.copy(),
                   z.copy(), z.copy(), z, 0, 1)
    own_insert_round(z, o, np.asarray([0, 1], dtype=np.int64), ts, z, z, o, 0, 1)
    merge_round(ts, ts, 0, z, z, o, z, o, 0, 1)
    merge_try_round(ts, ts, 0, z, z, o, z, o, z, z.copy(), z.copy(), 0, 1)
    window_count_round(np.zeros(3, dtype=np.int64), np.full(3, -1, dtype=np.int64),
                       2, 1, 0, ts, z, o, z, two, 0, 1)
