"""Reference analytics on decompressed token streams.

Every task has a naive counterpart here that expands the grammar and
counts with plain Python containers. The compressed-path engine is never
involved; the verify command and the equivalence suite compare the two
sides byte for byte.
"""

from __future__ import annotations

from collections import Counter

import numpy as np

from .errors import CorruptionError
from .grammar import Grammar, expand


def decompress_files(grammar: Grammar) -> list[np.ndarray]:
    """Expand the root and split into per-file word-id sequences."""
    d = grammar.dictionary
    terminals = expand(grammar, grammar.rule_ref(0))
    if d.num_splitters == 0:
        return [terminals]
    files: list[list[int]] = [[]]
    for s in terminals:
        s = int(s)
        if d.is_splitter(s):
            files.append([])
        else:
            files[-1].append(s)
    if files.pop() != []:
        raise CorruptionError("root expansion does not end at a file splitter")
    if len(files) != d.num_splitters:
        raise CorruptionError("file segment count mismatch")
    return [np.asarray(f, dtype=np.int64) for f in files]


def word_count(files: list[np.ndarray]) -> dict[int, int]:
    counts: Counter = Counter()
    for tokens in files:
        counts.update(int(t) for t in tokens)
    return dict(counts)


def per_file_word_counts(files: list[np.ndarray]) -> list[dict[int, int]]:
    return [dict(Counter(int(t) for t in tokens)) for tokens in files]


def ngrams(tokens: np.ndarray, length: int) -> dict[tuple[int, ...], int]:
    """Sliding-window counts over one file; windows never cross files."""
    counts: Counter = Counter()
    seq = [int(t) for t in tokens]
    for i in range(len(seq) - length + 1):
        counts[tuple(seq[i : i + length])] += 1
    return dict(counts)


def per_file_ngrams(files: list[np.ndarray], length: int) -> list[dict]:
    return [ngrams(tokens, length) for tokens in files]
