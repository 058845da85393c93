"""The six analytics tasks and their tab-separated output rendering.

Each task picks a traversal direction (unless the config forces one),
runs the engine, and returns a plain container. Ordering rules are fixed
so reruns are byte-identical: count ties break by ascending dictionary
id, file ties by ascending file index, and gram records sort by their
word-id tuples. Files are labelled by ingest index (the compressed
format stores no file names).

TSV records, one per line, UTF-8, fields tab-separated:

  wordcount             word <TAB> count          (word-id order)
  sort                  word <TAB> count          (count desc, id asc)
  invertedindex         word <TAB> file...        (word-id order; files asc)
  termvector            file <TAB> word <TAB> count
  seqcount              file <TAB> gram <TAB> count
  rankedinvertedindex   gram <TAB> file:count...  (count desc, file asc)

Grams are word strings joined by single spaces.
"""

from __future__ import annotations

from dataclasses import dataclass

from .dag import Dag
from .engine import (
    TaskHooks,
    TraversalConfig,
    TraversalState,
    bottom_up_traverse,
    init_top_down_masks,
    local_table_bounds,
    plan_pool,
    reduce_bottom_up,
    reduce_top_down,
    select_strategy,
    top_down_traverse,
    word_table_bounds,
)
from .errors import UsageError
from .sequence import count_sequences
from . import oracle

DEFAULT_SEQ_LEN = 3

HOOKS = {
    "wordcount": TaskHooks("wordcount", "words", "global", needs_file_info=False),
    "sort": TaskHooks("sort", "words", "global", needs_file_info=False),
    "invertedindex": TaskHooks("invertedindex", "words", "per-file", needs_file_info=True),
    "termvector": TaskHooks("termvector", "words", "per-file", needs_file_info=True),
    "seqcount": TaskHooks("seqcount", "grams", "per-file", needs_file_info=True),
    "rankedinvertedindex": TaskHooks(
        "rankedinvertedindex", "grams", "per-file", needs_file_info=True
    ),
}

TASK_NAMES = tuple(HOOKS)


@dataclass
class WordCounts:
    counts: dict[int, int]


@dataclass
class SortedWords:
    pairs: list[tuple[int, int]]


@dataclass
class InvertedIndex:
    files_of: dict[int, list[int]]


@dataclass
class TermVectors:
    vectors: list[list[tuple[int, int]]]


@dataclass
class SequenceCounts:
    per_file: list[dict[tuple[int, ...], int]]


@dataclass
class RankedInvertedIndex:
    ranked: dict[tuple[int, ...], list[tuple[int, int]]]


def _global_word_table(dag: Dag, cfg: TraversalConfig, strategy: str) -> dict[int, int]:
    if strategy == "topdown":
        state = TraversalState(dag)
        init_top_down_masks(dag, state)
        top_down_traverse(dag, state, cfg)
        return reduce_top_down(dag, state, cfg).as_dict(0)
    state = TraversalState(dag)
    pool = plan_pool(dag, local_table_bounds(dag, state, cfg),
                     extra_bounds=word_table_bounds(dag, per_file=False))
    bottom_up_traverse(dag, state, cfg, pool)
    out = reduce_bottom_up(dag, cfg, pool, per_file=False, out=pool,
                           out_base=dag.num_rules)
    return out.as_dict(dag.num_rules)


def _per_file_word_tables(dag: Dag, cfg: TraversalConfig, strategy: str) -> list[dict[int, int]]:
    if strategy == "topdown":
        state = TraversalState(dag, nfiles=dag.num_files)
        init_top_down_masks(dag, state)
        top_down_traverse(dag, state, cfg)
        out = reduce_top_down(dag, state, cfg)
        return [out.as_dict(f) for f in range(dag.num_files)]
    state = TraversalState(dag)
    pool = plan_pool(dag, local_table_bounds(dag, state, cfg),
                     extra_bounds=word_table_bounds(dag, per_file=True))
    bottom_up_traverse(dag, state, cfg, pool)
    out = reduce_bottom_up(dag, cfg, pool, per_file=True, out=pool,
                           out_base=dag.num_rules)
    return [out.as_dict(dag.num_rules + f) for f in range(dag.num_files)]


def word_count(dag: Dag, cfg: TraversalConfig) -> WordCounts:
    strategy = select_strategy(dag, HOOKS["wordcount"], cfg)
    return WordCounts(_global_word_table(dag, cfg, strategy))


def sort_by_frequency(dag: Dag, cfg: TraversalConfig) -> SortedWords:
    strategy = select_strategy(dag, HOOKS["sort"], cfg)
    counts = _global_word_table(dag, cfg, strategy)
    return SortedWords(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])))


def inverted_index(dag: Dag, cfg: TraversalConfig) -> InvertedIndex:
    strategy = select_strategy(dag, HOOKS["invertedindex"], cfg)
    tables = _per_file_word_tables(dag, cfg, strategy)
    files_of: dict[int, list[int]] = {}
    for f, table in enumerate(tables):
        for word in table:
            files_of.setdefault(word, []).append(f)
    return InvertedIndex({w: sorted(fs) for w, fs in files_of.items()})


def term_vector(dag: Dag, cfg: TraversalConfig) -> TermVectors:
    strategy = select_strategy(dag, HOOKS["termvector"], cfg)
    tables = _per_file_word_tables(dag, cfg, strategy)
    return TermVectors([
        sorted(table.items(), key=lambda kv: (-kv[1], kv[0])) for table in tables
    ])


def sequence_count(dag: Dag, cfg: TraversalConfig,
                   seq_len: int = DEFAULT_SEQ_LEN) -> SequenceCounts:
    strategy = select_strategy(dag, HOOKS["seqcount"], cfg)
    windows = count_sequences(dag, cfg, seq_len, strategy)
    return SequenceCounts([windows.file_dict(f) for f in range(dag.num_files)])


def ranked_inverted_index(dag: Dag, cfg: TraversalConfig,
                          seq_len: int = DEFAULT_SEQ_LEN) -> RankedInvertedIndex:
    strategy = select_strategy(dag, HOOKS["rankedinvertedindex"], cfg)
    windows = count_sequences(dag, cfg, seq_len, strategy)
    ranked: dict[tuple[int, ...], list[tuple[int, int]]] = {}
    for f in range(dag.num_files):
        for gram, count in windows.file_dict(f).items():
            ranked.setdefault(gram, []).append((f, count))
    for gram in ranked:
        ranked[gram].sort(key=lambda fc: (-fc[1], fc[0]))
    return RankedInvertedIndex(ranked)


def run_task(dag: Dag, task: str, cfg: TraversalConfig,
             seq_len: int = DEFAULT_SEQ_LEN):
    if task not in HOOKS:
        raise UsageError(f"unknown task {task!r}; expected one of {', '.join(TASK_NAMES)}")
    if task == "wordcount":
        return word_count(dag, cfg)
    if task == "sort":
        return sort_by_frequency(dag, cfg)
    if task == "invertedindex":
        return inverted_index(dag, cfg)
    if task == "termvector":
        return term_vector(dag, cfg)
    if task == "seqcount":
        return sequence_count(dag, cfg, seq_len)
    return ranked_inverted_index(dag, cfg, seq_len)


# -- naive counterparts (decompress, then count) -----------------------------


def oracle_task(grammar, task: str, seq_len: int = DEFAULT_SEQ_LEN, files=None):
    """Same output containers computed by expansion and plain counting.

    Pass `files` (from oracle.decompress_files) to reuse one expansion
    across several tasks.
    """
    if task not in HOOKS:
        raise UsageError(f"unknown task {task!r}")
    if files is None:
        files = oracle.decompress_files(grammar)
    if task == "wordcount":
        return WordCounts(oracle.word_count(files))
    if task == "sort":
        counts = oracle.word_count(files)
        return SortedWords(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])))
    if task == "invertedindex":
        per_file = oracle.per_file_word_counts(files)
        files_of: dict[int, list[int]] = {}
        for f, table in enumerate(per_file):
            for word in table:
                files_of.setdefault(word, []).append(f)
        return InvertedIndex({w: sorted(fs) for w, fs in files_of.items()})
    if task == "termvector":
        per_file = oracle.per_file_word_counts(files)
        return TermVectors([
            sorted(t.items(), key=lambda kv: (-kv[1], kv[0])) for t in per_file
        ])
    if task == "seqcount":
        return SequenceCounts(oracle.per_file_ngrams(files, seq_len))
    grams = oracle.per_file_ngrams(files, seq_len)
    ranked: dict[tuple[int, ...], list[tuple[int, int]]] = {}
    for f, table in enumerate(grams):
        for gram, count in table.items():
            ranked.setdefault(gram, []).append((f, count))
    for gram in ranked:
        ranked[gram].sort(key=lambda fc: (-fc[1], fc[0]))
    return RankedInvertedIndex(ranked)


# -- rendering -----------------------------------------------------------------


def render(output, dictionary) -> str:
    words = dictionary.words
    lines: list[str] = []
    if isinstance(output, WordCounts):
        for w in sorted(output.counts):
            lines.append(f"{words[w]}\t{output.counts[w]}")
    elif isinstance(output, SortedWords):
        for w, c in output.pairs:
            lines.append(f"{words[w]}\t{c}")
    elif isinstance(output, InvertedIndex):
        for w in sorted(output.files_of):
            files = "\t".join(str(f) for f in output.files_of[w])
            lines.append(f"{words[w]}\t{files}")
    elif isinstance(output, TermVectors):
        for f, vec in enumerate(output.vectors):
            for w, c in vec:
                lines.append(f"{f}\t{words[w]}\t{c}")
    elif isinstance(output, SequenceCounts):
        for f, table in enumerate(output.per_file):
            ordered = sorted(table.items(), key=lambda kv: (-kv[1], kv[0]))
            for gram, c in ordered:
                text = " ".join(words[w] for w in gram)
                lines.append(f"{f}\t{text}\t{c}")
    elif isinstance(output, RankedInvertedIndex):
        for gram in sorted(output.ranked):
            text = " ".join(words[w] for w in gram)
            pairs = "\t".join(f"{f}:{c}" for f, c in output.ranked[gram])
            lines.append(f"{text}\t{pairs}")
    else:
        raise UsageError(f"cannot render {type(output).__name__}")
    return "".join(line + "\n" for line in lines)


def first_divergence(expected: str, actual: str) -> str | None:
    """Human-readable description of the first differing line, if any."""
    exp_lines = expected.splitlines()
    act_lines = actual.splitlines()
    for i, (e, a) in enumerate(zip(exp_lines, act_lines)):
        if e != a:
            return f"line {i + 1}: expected {e!r}, got {a!r}"
    if len(exp_lines) != len(act_lines):
        longer = "expected" if len(exp_lines) > len(act_lines) else "actual"
        i = min(len(exp_lines), len(act_lines))
        extra = exp_lines[i] if longer == "expected" else act_lines[i]
        return f"line {i + 1}: {longer} side has extra record {extra!r}"
    return None
