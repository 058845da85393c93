"""Word-sequence (l-gram) counting on the compressed DAG.

Phase 1 fills per-rule head and tail buffers: the first and last
min(l-1, expansion) words of every rule, computed in rounds that retry a
rule until the sub-rules its prefix (suffix) touches are ready.

Phase 2 scans a local stream per rule: body words plus inlined child
material. A child expanding shorter than l is absorbed as own material;
up to 2(l-1) words it is inlined whole as a span owned by the child;
longer children contribute head, an impassable gap, then tail, all owned
by the child. Windows that cross a gap are never counted, and windows
falling entirely inside an owned span are left to that child, so every
window of the decompressed corpus is attributed to exactly one rule.
Counts scale by per-file rule occurrences; file splitters never appear
inside a segment stream, so no window crosses a file boundary.

Window keys pack the l word ids into one integer when they fit in 63
bits; otherwise tables run in gram mode (fingerprint key plus stored
word ids, compared in full on lookup).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dag import Dag
from .engine import (
    Runner,
    TraversalConfig,
    TraversalState,
    _bottom_up_rounds,
    _merge_units,
    _split_merge_units,
    init_bottom_up_masks,
    init_top_down_masks,
    local_table_bounds,
    merge_with_retries,
    partition_work,
    top_down_traverse,
)
from .errors import CorruptionError, ResourceError, UsageError
from .table import FULL, CountTableSet

GAP = -2
OWN = -1


def head_tail_bound(word_size: int, seq_len: int, sub_rule_size: int) -> int:
    """Window-capacity limit of a body under head-only child inlining:
    wordSize + (l-1) * subRuleSize - (l-1), floored at zero."""
    if seq_len < 1:
        raise UsageError("sequence length must be >= 1")
    return max(0, word_size + (seq_len - 1) * sub_rule_size - (seq_len - 1))


@dataclass
class HeadTail:
    heads: list
    tails: list
    ready: np.ndarray
    rounds: int

    def head(self, r: int) -> list[int]:
        return self.heads[r]

    def tail(self, r: int) -> list[int]:
        return self.tails[r]


def _prefix(dag: Dag, heads, ready, r: int, target: int):
    """First `target` expansion words of rule r, or None if an unready
    sub-rule blocks the walk."""
    num_words = dag.grammar.dictionary.num_words
    base = dag.grammar.rule_base
    acc: list[int] = []
    for sym in dag.body(r):
        if len(acc) >= target:
            break
        sym = int(sym)
        if sym < num_words:
            acc.append(sym)
        elif sym >= base:
            c = sym - base
            if not ready[c]:
                return None
            acc.extend(heads[c])
    return acc[:target]


def _suffix(dag: Dag, tails, ready, r: int, target: int):
    num_words = dag.grammar.dictionary.num_words
    base = dag.grammar.rule_base
    acc: list[int] = []
    for sym in dag.body(r)[::-1]:
        if len(acc) >= target:
            break
        sym = int(sym)
        if sym < num_words:
            acc.append(sym)
        elif sym >= base:
            c = sym - base
            if not ready[c]:
                return None
            acc.extend(tails[c][::-1])
    return acc[:target][::-1]


def init_head_tail(dag: Dag, seq_len: int) -> HeadTail:
    """Round protocol: every round tries the rules still missing buffers;
    a rule fails when a needed sub-rule is not yet ready and retries next
    round. All rules are ready within depth rounds."""
    if seq_len < 1:
        raise UsageError("sequence length must be >= 1")
    R = dag.num_rules
    heads: list = [None] * R
    tails: list = [None] * R
    ready = np.zeros(R, dtype=bool)
    ready[0] = True  # the root is never inlined anywhere
    heads[0] = tails[0] = []
    pending = list(range(1, R))
    rounds = 0
    while pending:
        rounds += 1
        if rounds > dag.depth + 1:
            raise CorruptionError("head/tail initialization exceeded depth bound")
        still = []
        for r in pending:
            target = int(min(seq_len - 1, dag.exp_len[r]))
            if heads[r] is None:
                heads[r] = _prefix(dag, heads, ready, r, target)
            if tails[r] is None:
                tails[r] = _suffix(dag, tails, ready, r, target)
            if heads[r] is not None and tails[r] is not None:
                ready[r] = True
            else:
                still.append(r)
        pending = still
    return HeadTail(heads=heads, tails=tails, ready=ready, rounds=rounds)


@dataclass
class LocalStream:
    """Inlined view of one rule body (or root segment) for window scans.

    region[i] marks ownership: OWN (-1) for this rule's material, GAP
    (-2) for impassable breaks, and a span id >= 0 for material whose
    fully-interior windows belong to the inlined child."""

    words: np.ndarray
    region: np.ndarray

    @property
    def candidates(self) -> int:
        return len(self.words)

    def window_starts(self, seq_len: int) -> int:
        return max(0, len(self.words) - (seq_len - 1))


def _stream_of(dag: Dag, ht: HeadTail, body, seq_len: int) -> LocalStream:
    num_words = dag.grammar.dictionary.num_words
    base = dag.grammar.rule_base
    words: list[int] = []
    region: list[int] = []
    span = 0
    for sym in body:
        sym = int(sym)
        if sym < num_words:
            words.append(sym)
            region.append(OWN)
        elif sym < base:  # splitter: hard break (defensive; segments skip them)
            words.append(0)
            region.append(GAP)
        else:
            c = sym - base
            el = int(dag.exp_len[c])
            if el < seq_len:
                # Shorter than a window: absorbed as own material. The
                # head buffer holds the whole expansion here.
                words.extend(ht.heads[c])
                region.extend([OWN] * el)
            elif el <= 2 * (seq_len - 1):
                overlap = 2 * (seq_len - 1) - el
                full = list(ht.heads[c]) + list(ht.tails[c][overlap:])
                words.extend(full)
                region.extend([span] * el)
                span += 1
            else:
                words.extend(ht.heads[c])
                region.extend([span] * len(ht.heads[c]))
                words.append(0)
                region.append(GAP)
                words.extend(ht.tails[c])
                region.extend([span] * len(ht.tails[c]))
                span += 1
    return LocalStream(
        words=np.asarray(words, dtype=np.int64),
        region=np.asarray(region, dtype=np.int64),
    )


def build_local_stream(dag: Dag, ht: HeadTail, r: int, seq_len: int) -> LocalStream:
    return _stream_of(dag, ht, dag.body(r), seq_len)


def build_segment_stream(dag: Dag, ht: HeadTail, f: int, seq_len: int) -> LocalStream:
    s, e = dag.segments[f]
    return _stream_of(dag, ht, dag.body(0)[s:e], seq_len)


def head_only_window_count(dag: Dag, ht: HeadTail, r: int, seq_len: int) -> int:
    """Window positions of the head-only-inlined stream (children always
    contribute exactly their heads). This is what the capacity formula
    bounds."""
    num_words = dag.grammar.dictionary.num_words
    base = dag.grammar.rule_base
    n = 0
    for sym in dag.body(r):
        sym = int(sym)
        if sym < num_words:
            n += 1
        elif sym >= base:
            n += len(ht.heads[sym - base])
    return max(0, n - (seq_len - 1))


def pack_width(dag: Dag) -> int:
    num_words = dag.grammar.dictionary.num_words
    return max(1, int(num_words - 1).bit_length())


@dataclass
class WindowTables:
    """Per-file window tables plus the key encoding needed to read them."""

    tables: CountTableSet
    base: int
    num_files: int
    seq_len: int
    wbits: int  # > 0: packed integer keys; 0: gram-mode tables

    def file_dict(self, f: int) -> dict[tuple[int, ...], int]:
        t = self.base + f
        if self.wbits == 0:
            return dict(self.tables.gram_items(t))
        mask = (1 << self.wbits) - 1
        out = {}
        for key, val in self.tables.items(t):
            gram = []
            for j in range(self.seq_len):
                shift = (self.seq_len - 1 - j) * self.wbits
                gram.append((key >> shift) & mask)
            out[tuple(gram)] = val
        return out


def _concat_streams(streams: dict[int, LocalStream]):
    """Concatenate streams into flat arrays; returns (words, region, start)
    with start[key] the absolute offset of each stream."""
    words = []
    region = []
    start = {}
    pos = 0
    for key, st in streams.items():
        start[key] = pos
        words.append(st.words)
        region.append(st.region)
        pos += len(st.words)
    if words:
        return np.concatenate(words), np.concatenate(region), start
    empty = np.empty(0, dtype=np.int64)
    return empty, empty.copy(), start


def _window_units(streams, start, dsts, scales, seq_len, cfg):
    """Partition window-start ranges of each stream into work units."""
    ids, lengths = [], []
    for key in streams:
        ids.append(key)
        lengths.append(streams[key].window_starts(seq_len))
    ids = np.asarray(ids, dtype=np.int64)
    lengths = np.asarray(lengths, dtype=np.int64)
    u_id, u_start, u_end = partition_work(ids, lengths, int(lengths.sum()), cfg)
    u_dst = np.asarray([dsts[int(i)] for i in u_id], dtype=np.int64)
    u_scale = np.asarray([scales[int(i)] for i in u_id], dtype=np.int64)
    abs_start = np.asarray([start[int(i)] for i in u_id], dtype=np.int64)
    return u_dst, u_scale, abs_start + u_start, abs_start + u_end


def count_sequences(dag: Dag, cfg: TraversalConfig, seq_len: int,
                    strategy: str) -> WindowTables:
    """Count l-word windows per file directly on the DAG.

    topdown: every rule counts its attributed windows once into its own
    table, then the tables merge into per-file outputs scaled by the
    rule's per-file occurrence counts (weights propagated top-down).
    bottomup: per-rule tables accumulate leaves-first exactly like word
    counting (children scaled by body frequency) and the root segments
    reduce them per file.
    """
    if seq_len < 1:
        raise UsageError("sequence length must be >= 1")
    if strategy not in ("topdown", "bottomup"):
        raise UsageError(f"sequence counting needs a concrete strategy, got {strategy!r}")
    F = dag.num_files
    ht = init_head_tail(dag, seq_len)
    wbits = pack_width(dag)
    packed = seq_len * wbits <= 63
    gw = 0 if packed else seq_len
    kernel_wbits = wbits if packed else 0

    rule_streams = {
        r: build_local_stream(dag, ht, r, seq_len) for r in range(1, dag.num_rules)
    }
    seg_streams = {f: build_segment_stream(dag, ht, f, seq_len) for f in range(F)}

    seg_tokens = dag.segment_token_counts
    out_bounds = [max(0, int(seg_tokens[f]) - (seq_len - 1)) for f in range(F)]
    out = CountTableSet(out_bounds, gram_width=gw)

    own_candidates = np.zeros(dag.num_rules, dtype=np.int64)
    for r, st in rule_streams.items():
        own_candidates[r] = st.window_starts(seq_len)
    exp_windows = np.maximum(dag.exp_len - (seq_len - 1), 0)

    words_all, region_all, starts = _concat_streams(rule_streams)
    seg_words, seg_region, seg_starts = _concat_streams(seg_streams)

    with Runner(cfg) as runner:
        if strategy == "topdown":
            state = TraversalState(dag, nfiles=F)
            init_top_down_masks(dag, state)
            top_down_traverse(dag, state, cfg, runner)
            bounds = [
                max(
                    head_tail_bound(int(dag.own_token_count[r]), seq_len,
                                    int(dag.num_out_edge[r])),
                    int(own_candidates[r]),
                )
                if r > 0 else 0
                for r in range(dag.num_rules)
            ]
            pool = CountTableSet(bounds, gram_width=gw)
            units = _window_units(
                rule_streams, starts,
                {r: r for r in rule_streams},
                {r: 1 for r in rule_streams},
                seq_len, cfg,
            )
            status = runner.run(
                "window_count_round",
                (words_all, region_all, seq_len, kernel_wbits, gw,
                 pool.kernel_args(), *units),
                len(units[0]),
            )
            _check(status)
            wrow = state.wmat.reshape(dag.num_rules, F)
            pairs = [
                (f, r, int(wrow[r, f]))
                for r in range(1, dag.num_rules)
                for f in range(F)
                if wrow[r, f] > 0
            ]
            _count_segments(runner, out, seg_streams, seg_starts, seg_words,
                            seg_region, seq_len, kernel_wbits, gw, cfg)
            merge_with_retries(runner, out, pool, pairs, cfg)
        else:
            state = TraversalState(dag)
            bound = local_table_bounds(
                dag, state, cfg, runner,
                own_sizes=own_candidates, caps=exp_windows.astype(np.int64),
            )
            pool = CountTableSet([int(b) for b in bound], gram_width=gw)
            init_bottom_up_masks(dag, state)

            def visit(ready):
                ready_streams = {int(r): rule_streams[int(r)] for r in ready}
                units = _window_units(
                    ready_streams, starts,
                    {r: r for r in ready_streams},
                    {r: 1 for r in ready_streams},
                    seq_len, cfg,
                )
                status = runner.run(
                    "window_count_round",
                    (words_all, region_all, seq_len, kernel_wbits, gw,
                     pool.kernel_args(), *units),
                    len(units[0]),
                )
                _check(status)
                pairs = []
                for r in ready:
                    for c, fr in dag.sub_pairs(int(r)):
                        pairs.append((int(r), c, fr))
                merge = _split_merge_units(_merge_units(pairs, pool), cfg)
                status = runner.run(
                    "merge_round",
                    (pool.kernel_args(), pool.kernel_args(), gw, *merge),
                    len(merge[0]),
                )
                _check(status)

            _bottom_up_rounds(dag, state, cfg, runner, visit, "seq-loctbl")
            _count_segments(runner, out, seg_streams, seg_starts, seg_words,
                            seg_region, seq_len, kernel_wbits, gw, cfg)
            seg_counts = dag.segment_rule_counts
            pairs = []
            for c in dag.sub_ids[dag.sub_off[0] : dag.sub_off[1]]:
                for f in range(F):
                    freq = int(seg_counts[int(c), f])
                    if freq > 0:
                        pairs.append((f, int(c), freq))
            merge_with_retries(runner, out, pool, pairs, cfg)
    return WindowTables(tables=out, base=0, num_files=F, seq_len=seq_len,
                          wbits=kernel_wbits)


def _count_segments(runner, out, seg_streams, seg_starts, seg_words,
                    seg_region, seq_len, kernel_wbits, gw, cfg):
    units = _window_units(
        seg_streams, seg_starts,
        {f: f for f in seg_streams},
        {f: 1 for f in seg_streams},
        seq_len, cfg,
    )
    status = runner.run(
        "window_count_round",
        (seg_words, seg_region, seq_len, kernel_wbits, gw,
         out.kernel_args(), *units),
        len(units[0]),
    )
    _check(status)


def _check(status) -> None:
    if status is not None and status == FULL:
        raise ResourceError("sequence table capacity exhausted")
