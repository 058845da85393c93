"""Corpus ingestion: tokenization and word-to-integer conversion.

Every distinct word gets a dense integer id in first-appearance order.
File boundaries are marked with one reserved splitter symbol per file,
appended after that file's tokens, so the concatenated stream is

    tokens(file 0), spt 0, tokens(file 1), spt 1, ...

Splitter ids sit directly above the word-id range; rule references used
by the grammar sit above the splitters (see grammar.SymbolSpace).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IngestError, UsageError


@dataclass
class TokenizeConfig:
    """Tokenizer policy. Only whitespace splitting is supported: maximal
    runs of non-whitespace become tokens, punctuation stays attached."""

    mode: str = "whitespace"


def tokenize(raw: bytes, cfg: TokenizeConfig | None = None, *, name: str = "<input>") -> list[str]:
    """Split UTF-8 bytes into word tokens.

    Raises IngestError naming the offending byte offset on invalid UTF-8.
    """
    cfg = cfg or TokenizeConfig()
    if cfg.mode != "whitespace":
        raise UsageError(f"unknown tokenize mode: {cfg.mode!r}")
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise IngestError(f"{name}: invalid UTF-8 at byte offset {exc.start}") from exc
    return text.split()


@dataclass
class Dictionary:
    """Bidirectional word/id mapping plus the reserved splitter-id block.

    Word ids are dense in [0, num_words); splitter i (one per file) is
    num_words + i. Ids at or above num_words + num_splitters are grammar
    rule references.
    """

    words: list[str]
    num_splitters: int
    _index: dict[str, int] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self._index:
            self._index = {w: i for i, w in enumerate(self.words)}
        if len(self._index) != len(self.words):
            raise UsageError("dictionary words are not unique")

    @property
    def num_words(self) -> int:
        return len(self.words)

    @property
    def num_terminals(self) -> int:
        return len(self.words) + self.num_splitters

    def word_id(self, word: str) -> int:
        return self._index[word]

    def splitter_id(self, file_index: int) -> int:
        if not 0 <= file_index < self.num_splitters:
            raise UsageError(f"file index {file_index} out of range")
        return self.num_words + file_index

    def is_word(self, sym: int) -> bool:
        return 0 <= sym < self.num_words

    def is_splitter(self, sym: int) -> bool:
        return self.num_words <= sym < self.num_terminals


def build_corpus_stream(files: list[tuple[str, list[str]]]) -> tuple[Dictionary, np.ndarray]:
    """Number the corpus and interleave splitter symbols.

    `files` is an ordered list of (name, token list) pairs; names must be
    unique. Returns the dictionary and the full symbol stream (int64),
    one splitter after each file including the last.
    """
    if not files:
        raise UsageError("corpus must contain at least one file")
    names = [name for name, _ in files]
    if len(set(names)) != len(names):
        raise UsageError("file names must be unique")

    index: dict[str, int] = {}
    words: list[str] = []
    chunks: list[np.ndarray] = []
    for _, tokens in files:
        ids = []
        for tok in tokens:
            wid = index.get(tok)
            if wid is None:
                wid = len(words)
                index[tok] = wid
                words.append(tok)
            ids.append(wid)
        ids.append(-1)  # placeholder for this file's splitter
        chunks.append(np.asarray(ids, dtype=np.int64))

    num_words = len(words)
    for i, chunk in enumerate(chunks):
        chunk[-1] = num_words + i
    stream = np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int64)

    dictionary = Dictionary(words=words, num_splitters=len(files))
    return dictionary, stream
