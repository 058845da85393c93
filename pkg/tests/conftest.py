"""Shared fixtures: the two-file worked example and corpus fuzzing helpers."""

from __future__ import annotations

import numpy as np
import pytest

from gtadoc.grammar import Grammar, expand
from gtadoc.ingest import build_corpus_stream
from gtadoc.sequitur import infer_grammar

# Canonical worked example used throughout the suite:
#   file A = "a b a b c", file B = "a b c"
# dict {a:0, b:1, c:2}, splitters {spt0:3, spt1:4},
# stream [0,1,0,1,2,3,0,1,2,4],
# grammar root=[R1,R2,spt0,R2,spt1], R1=[a,b], R2=[R1,c].
G1_FILES = [("A.txt", "a b a b c".split()), ("B.txt", "a b c".split())]


@pytest.fixture
def g1_stream():
    return build_corpus_stream(G1_FILES)


@pytest.fixture
def g1_grammar(g1_stream) -> Grammar:
    dictionary, stream = g1_stream
    return infer_grammar(dictionary, stream)


def corpus_tokens(rng: np.random.Generator, *, max_files: int = 64,
                  max_tokens: int = 100_000, max_vocab: int = 5000,
                  min_files: int = 1) -> list[tuple[str, list[str]]]:
    """Random multi-file corpus with Zipf-distributed word frequencies."""
    num_files = int(rng.integers(min_files, max_files + 1))
    vocab_size = int(rng.integers(1, max_vocab + 1))
    vocab = [f"w{i}" for i in range(vocab_size)]
    total = int(rng.integers(0, max_tokens + 1))
    files = []
    remaining = total
    for i in range(num_files):
        n = remaining if i == num_files - 1 else int(rng.integers(0, remaining + 1))
        n = min(n, max(0, remaining))
        # Zipf with a finite vocabulary: sample ranks, clip into range.
        ranks = np.minimum(rng.zipf(1.3, size=n), vocab_size) - 1
        files.append((f"f{i:03d}", [vocab[r] for r in ranks]))
        remaining -= n
    return files


def compress_corpus(files: list[tuple[str, list[str]]]) -> Grammar:
    dictionary, stream = build_corpus_stream(files)
    return infer_grammar(dictionary, stream)


# ---------------------------------------------------------------------------
# Grammar-law scanners (independent of the inference code paths).
# ---------------------------------------------------------------------------


def scan_digram_uniqueness(grammar: Grammar) -> None:
    """Assert no ordered digram occurs at two non-overlapping positions."""
    seen: dict[tuple[int, int], tuple[int, int]] = {}
    for ri, body in enumerate(grammar.bodies):
        prev_key = None
        prev_overlap_ok = False
        for pos in range(len(body) - 1):
            key = (int(body[pos]), int(body[pos + 1]))
            if key == prev_key and not prev_overlap_ok:
                # Overlapping repeat of the previous digram (e.g. "aaa"):
                # allowed, but only as a direct overlap chain.
                prev_overlap_ok = True
                prev_key = key
                continue
            assert key not in seen, (
                f"digram {key} at rule {ri} pos {pos} repeats {seen[key]}"
            )
            seen[key] = (ri, pos)
            prev_key = key
            prev_overlap_ok = False


def scan_rule_utility(grammar: Grammar) -> None:
    """Assert every non-root rule is referenced at least twice."""
    counts = np.zeros(grammar.num_rules, dtype=np.int64)
    base = grammar.rule_base
    for body in grammar.bodies:
        for s in body:
            s = int(s)
            if s >= base:
                counts[s - base] += 1
    assert counts[0] == 0, "root must never be referenced"
    bad = [i for i in range(1, grammar.num_rules) if counts[i] < 2]
    assert not bad, f"rules referenced fewer than twice: {bad}"


def scan_splitters_root_only(grammar: Grammar) -> None:
    d = grammar.dictionary
    root = grammar.bodies[0]
    positions = [int(s) - d.num_words for s in root if d.is_splitter(int(s))]
    assert positions == list(range(d.num_splitters))
    for body in grammar.bodies[1:]:
        assert not any(d.is_splitter(int(s)) for s in body)


def expand_files(grammar: Grammar) -> list[np.ndarray]:
    """Split the root expansion into per-file word-id sequences."""
    d = grammar.dictionary
    terminals = expand(grammar, grammar.rule_ref(0))
    out: list[list[int]] = [[]]
    for s in terminals:
        s = int(s)
        if d.is_splitter(s):
            out.append([])
        else:
            out[-1].append(s)
    assert out[-1] == [], "root must end with the last file's splitter"
    out.pop()
    assert len(out) == d.num_splitters
    return [np.asarray(f, dtype=np.int64) for f in out]
