"""Traversal-ready view of a grammar.

Rule bodies, per-rule word frequencies, child/parent edges, file segments
and expansion metadata are flattened into parallel int64 arrays (CSR
style) so the round kernels can run over them without touching Python
objects. All counters needed by the traversals (in/out edge totals, root
frequencies) are precomputed here; the mutable traversal state lives in
the engine.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import CorruptionError
from .grammar import Grammar, _topo_order, expand_rule_lengths


def _csr(per_rule: list[list[int]]) -> tuple[np.ndarray, np.ndarray]:
    off = np.zeros(len(per_rule) + 1, dtype=np.int64)
    for i, row in enumerate(per_rule):
        off[i + 1] = off[i] + len(row)
    flat = np.asarray([v for row in per_rule for v in row], dtype=np.int64)
    return flat, off


@dataclass
class Dag:
    grammar: Grammar
    body_sym: np.ndarray
    body_off: np.ndarray
    own_ids: np.ndarray
    own_freqs: np.ndarray
    own_off: np.ndarray
    own_token_count: np.ndarray  # word symbols incl. multiplicity, per rule
    sub_ids: np.ndarray
    sub_freqs: np.ndarray
    sub_off: np.ndarray
    par_ids: np.ndarray
    par_freqs: np.ndarray  # frequency of this rule inside that parent
    par_off: np.ndarray
    num_in_edge: np.ndarray
    num_out_edge: np.ndarray
    root_freq: np.ndarray
    segments: list[tuple[int, int]]
    exp_len: np.ndarray
    depth: int
    total_elements: int

    @property
    def num_rules(self) -> int:
        return len(self.body_off) - 1

    @property
    def num_files(self) -> int:
        return len(self.segments)

    def body(self, r: int) -> np.ndarray:
        return self.body_sym[self.body_off[r] : self.body_off[r + 1]]

    def own_distinct(self) -> np.ndarray:
        return np.diff(self.own_off)

    def sub_pairs(self, r: int) -> list[tuple[int, int]]:
        s, e = self.sub_off[r], self.sub_off[r + 1]
        return [(int(c), int(f)) for c, f in zip(self.sub_ids[s:e], self.sub_freqs[s:e])]

    def body_lengths(self) -> np.ndarray:
        return np.diff(self.body_off)

    @cached_property
    def segment_rule_counts(self) -> np.ndarray:
        """(num_rules, num_files) occurrences of each rule in each root segment."""
        base = self.grammar.rule_base
        counts = np.zeros((self.num_rules, self.num_files), dtype=np.int64)
        root = self.body(0)
        for f, (s, e) in enumerate(self.segments):
            for sym in root[s:e]:
                sym = int(sym)
                if sym >= base:
                    counts[sym - base, f] += 1
        return counts

    @cached_property
    def segment_token_counts(self) -> np.ndarray:
        """Words per file (expansion length of each root segment)."""
        base = self.grammar.rule_base
        num_words = self.grammar.dictionary.num_words
        root = self.body(0)
        out = np.zeros(self.num_files, dtype=np.int64)
        for f, (s, e) in enumerate(self.segments):
            total = 0
            for sym in root[s:e]:
                sym = int(sym)
                if sym < num_words:
                    total += 1
                elif sym >= base:
                    total += int(self.exp_len[sym - base])
            out[f] = total
        return out


def _segments_of_root(grammar: Grammar) -> list[tuple[int, int]]:
    d = grammar.dictionary
    root = grammar.bodies[0]
    if d.num_splitters == 0:
        # Headless grammars (unit fixtures): the whole root is one segment.
        return [(0, len(root))]
    segments = []
    start = 0
    expected = 0
    for pos, sym in enumerate(root):
        sym = int(sym)
        if d.is_splitter(sym):
            if sym - d.num_words != expected:
                raise CorruptionError(f"splitter {sym} out of order at root position {pos}")
            segments.append((start, pos))
            start = pos + 1
            expected += 1
    if expected != d.num_splitters:
        raise CorruptionError("root body is missing file splitters")
    if start != len(root):
        raise CorruptionError("root body has content after the last splitter")
    return segments


def build_dag(grammar: Grammar) -> Dag:
    """Aggregate bodies into edge/frequency arrays and compute DAG metadata.

    Raises CorruptionError on reference cycles, rules unreachable from the
    root, or malformed splitter layout.
    """
    order = _topo_order(grammar)  # cycle check happens here
    base = grammar.rule_base
    num_words = grammar.dictionary.num_words
    R = grammar.num_rules

    own: list[list[int]] = []
    own_f: list[list[int]] = []
    subs: list[list[int]] = []
    subs_f: list[list[int]] = []
    own_tokens = np.zeros(R, dtype=np.int64)
    for r in range(R):
        wc: Counter = Counter()
        sc: Counter = Counter()
        tokens = 0
        for sym in grammar.bodies[r]:
            sym = int(sym)
            if sym < num_words:
                wc[sym] += 1
                tokens += 1
            elif sym >= base:
                sc[sym - base] += 1
        own_tokens[r] = tokens
        ws = sorted(wc)
        own.append(ws)
        own_f.append([wc[w] for w in ws])
        cs = sorted(sc)
        subs.append(cs)
        subs_f.append([sc[c] for c in cs])

    parents: list[list[int]] = [[] for _ in range(R)]
    parents_f: list[list[int]] = [[] for _ in range(R)]
    for p in range(R):
        for c, f in zip(subs[p], subs_f[p]):
            parents[c].append(p)
            parents_f[c].append(f)

    reachable = np.zeros(R, dtype=bool)
    reachable[0] = True
    stack = [0]
    while stack:
        p = stack.pop()
        for c in subs[p]:
            if not reachable[c]:
                reachable[c] = True
                stack.append(c)
    if not reachable.all():
        missing = int(np.flatnonzero(~reachable)[0])
        raise CorruptionError(f"rule {missing} is not reachable from the root")

    num_in = np.zeros(R, dtype=np.int64)
    for r in range(R):
        num_in[r] = sum(f for p, f in zip(parents[r], parents_f[r]) if p != 0)
    num_out = np.asarray([sum(f) for f in subs_f], dtype=np.int64)

    root_freq = np.zeros(R, dtype=np.int64)
    for c, f in zip(subs[0], subs_f[0]):
        root_freq[c] = f

    height = np.zeros(R, dtype=np.int64)
    for r in reversed(order):  # children first
        if subs[r]:
            height[r] = 1 + max(int(height[c]) for c in subs[r])
    depth = int(height[0])

    own_ids, own_off = _csr(own)
    own_freqs, _ = _csr(own_f)
    sub_ids, sub_off = _csr(subs)
    sub_freqs, _ = _csr(subs_f)
    par_ids, par_off = _csr(parents)
    par_freqs, _ = _csr(parents_f)
    body_sym, body_off = _csr([list(map(int, b)) for b in grammar.bodies])

    return Dag(
        grammar=grammar,
        body_sym=body_sym,
        body_off=body_off,
        own_ids=own_ids,
        own_freqs=own_freqs,
        own_off=own_off,
        own_token_count=own_tokens,
        sub_ids=sub_ids,
        sub_freqs=sub_freqs,
        sub_off=sub_off,
        par_ids=par_ids,
        par_freqs=par_freqs,
        par_off=par_off,
        num_in_edge=num_in,
        num_out_edge=num_out,
        root_freq=root_freq,
        segments=_segments_of_root(grammar),
        exp_len=expand_rule_lengths(grammar),
        depth=depth,
        total_elements=int(body_off[-1]),
    )
