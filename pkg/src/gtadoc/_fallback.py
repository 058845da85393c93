"""Pure Python/numpy twins of the numba kernels.

Selected when the accelerated backend is unavailable or explicitly
disabled (GTADOC_BACKEND=python). Rounds run their work units on the
calling thread, so no atomics are needed; the table state machine and
every result are identical to the kernel path. The non-blocking merge
variant never observes a busy lock here and simply completes.
"""

from __future__ import annotations

import numpy as np

from .table import bucket_of, gram_fingerprint

E_, L_, K_, V_, N_, G_, C_, EO_, EM_, NO_, NC_ = range(11)

OK = 0
RETRY = 1
FULL = 2


def table_add(ts, t, key, delta, gsrc, gstart, gw, blocking):
    b = int(ts[EO_][t]) + bucket_of(int(key), int(ts[EM_][t]))
    keys, vals, nxt, grams = ts[K_], ts[V_], ts[N_], ts[G_]
    head = int(ts[E_][b])
    node = head
    while node != -1:
        if keys[node] == key:
            same = True
            for j in range(gw):
                if grams[node * gw + j] != gsrc[gstart + j]:
                    same = False
                    break
            if same:
                vals[node] += delta
                return OK
        node = int(nxt[node])
    n = int(ts[C_][t])
    ts[C_][t] = n + 1
    if n >= int(ts[NC_][t]):
        return FULL
    abs_n = int(ts[NO_][t]) + n
    keys[abs_n] = key
    vals[abs_n] = delta
    nxt[abs_n] = head
    for j in range(gw):
        grams[abs_n * gw + j] = gsrc[gstart + j]
    ts[E_][b] = abs_n
    return OK


def add_batch(ts, t, keys, deltas, start, end):
    empty = np.empty(0, dtype=np.int64)
    worst = OK
    for i in range(start, end):
        st = table_add(ts, t, int(keys[i]), int(deltas[i]), empty, 0, 0, 1)
        worst = max(worst, st)
    return worst


def topdown_round(sub_ids, sub_freqs, sub_off, wmat, nfiles, cur_in, num_in,
                  mask, changes, u_rule, u_start, u_end, lo, hi):
    w = wmat.reshape(-1, nfiles)
    for ui in range(lo, hi):
        r = int(u_rule[ui])
        base = int(sub_off[r])
        for j in range(int(u_start[ui]), int(u_end[ui])):
            c = int(sub_ids[base + j])
            f = int(sub_freqs[base + j])
            w[c] += f * w[r]
            cur_in[c] += f
            if cur_in[c] == num_in[c]:
                mask[c] = 1
                changes[0] += 1


def reduce_words_round(own_ids, own_freqs, own_off, wmat, nfiles, ts,
                       u_rule, u_start, u_end, lo, hi):
    empty = np.empty(0, dtype=np.int64)
    worst = OK
    for ui in range(lo, hi):
        r = int(u_rule[ui])
        base = int(own_off[r])
        for j in range(int(u_start[ui]), int(u_end[ui])):
            k = int(own_ids[base + j])
            fr = int(own_freqs[base + j])
            for f in range(nfiles):
                w = int(wmat[r * nfiles + f])
                if w > 0:
                    st = table_add(ts, f, k, fr * w, empty, 0, 0, 1)
                    worst = max(worst, st)
    return worst


def root_words_round(body_sym, num_words, ts, u_dst, u_start, u_end, lo, hi):
    empty = np.empty(0, dtype=np.int64)
    worst = OK
    for ui in range(lo, hi):
        t = int(u_dst[ui])
        for p in range(int(u_start[ui]), int(u_end[ui])):
            s = int(body_sym[p])
            if s < num_words:
                st = table_add(ts, t, s, 1, empty, 0, 0, 1)
                worst = max(worst, st)
    return worst


def bounds_round(own_distinct, cap, sub_ids, sub_freqs, sub_off, bound,
                 ready, lo, hi):
    for ri in range(lo, hi):
        r = int(ready[ri])
        b = int(own_distinct[r])
        for j in range(int(sub_off[r]), int(sub_off[r + 1])):
            b += int(bound[sub_ids[j]])
        bound[r] = min(b, int(cap[r]))


def finalize_round(par_ids, par_freqs, par_off, num_out, cur_out, mask,
                   changes, ready, lo, hi):
    for ri in range(lo, hi):
        r = int(ready[ri])
        for j in range(int(par_off[r]), int(par_off[r + 1])):
            p = int(par_ids[j])
            cur_out[p] += par_freqs[j]
            if p != 0 and cur_out[p] == num_out[p]:
                mask[p] = 1
                changes[0] += 1


def own_insert_round(own_ids, own_freqs, own_off, ts, u_rule, u_start, u_end,
                     lo, hi):
    empty = np.empty(0, dtype=np.int64)
    worst = OK
    for ui in range(lo, hi):
        r = int(u_rule[ui])
        base = int(own_off[r])
        for j in range(int(u_start[ui]), int(u_end[ui])):
            st = table_add(ts, r, int(own_ids[base + j]),
                           int(own_freqs[base + j]), empty, 0, 0, 1)
            worst = max(worst, st)
    return worst


def merge_round(dst, src, gw, u_dst, u_src, u_scale, u_start, u_end, lo, hi):
    worst = OK
    for ui in range(lo, hi):
        d = int(u_dst[ui])
        sbase = int(src[NO_][u_src[ui]])
        scale = int(u_scale[ui])
        for i in range(int(u_start[ui]), int(u_end[ui])):
            n = sbase + i
            st = table_add(dst, d, int(src[K_][n]), int(src[V_][n]) * scale,
                           src[G_], n * gw, gw, 1)
            worst = max(worst, st)
    return worst


def merge_try_round(dst, src, gw, u_dst, u_src, u_scale, u_start, u_end,
                    u_done, done, pending, lo, hi):
    worst = OK
    for ui in range(lo, hi):
        d = int(u_dst[ui])
        sbase = int(src[NO_][u_src[ui]])
        scale = int(u_scale[ui])
        dbase = int(u_done[ui]) - int(u_start[ui])
        for i in range(int(u_start[ui]), int(u_end[ui])):
            if done[dbase + i]:
                continue
            n = sbase + i
            st = table_add(dst, d, int(src[K_][n]), int(src[V_][n]) * scale,
                           src[G_], n * gw, gw, 0)
            if st == FULL:
                worst = FULL
            elif st == OK:
                done[dbase + i] = 1
    return worst


def window_count_round(words, region, seq_len, wbits, gw, ts,
                       u_dst, u_scale, u_start, u_end, lo, hi):
    worst = OK
    for ui in range(lo, hi):
        t = int(u_dst[ui])
        scale = int(u_scale[ui])
        for p in range(int(u_start[ui]), int(u_end[ui])):
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
                key = 0
                for j in range(seq_len):
                    key = (key << wbits) | int(words[p + j])
            else:
                key = gram_fingerprint(words[p : p + seq_len])
            st = table_add(ts, t, key, scale, words, p, gw, 1)
            worst = max(worst, st)
    return worst


def warmup() -> None:
    """Nothing to compile in the pure path."""
