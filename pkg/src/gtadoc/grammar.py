"""Grammar container, symbol classification, expansion, and the on-disk format.

A grammar is the dictionary plus an ordered list of rule bodies; rule 0 is
the root whose body concatenates the whole corpus with splitters between
files. Symbols are classified purely by integer range:

    word      : 0 <= s < num_words
    splitter  : num_words <= s < num_words + num_splitters
    rule ref  : num_words + num_splitters + rule_index

The serialized form is little-endian: magic "GTDC", u8 version (1),
u32 num_words, u32 num_splitters, u32 num_rules, then the dictionary
(u32 byte length + UTF-8 bytes per word), then per rule, root first,
u32 body length followed by that many u32 symbol ids.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import CorruptionError, FormatError
from .ingest import Dictionary

MAGIC = b"GTDC"
VERSION = 1


@dataclass
class Grammar:
    dictionary: Dictionary
    bodies: list[np.ndarray]  # int64 arrays; index 0 is the root

    @property
    def num_rules(self) -> int:
        return len(self.bodies)

    @property
    def rule_base(self) -> int:
        """First symbol id that is a rule reference."""
        return self.dictionary.num_terminals

    def rule_ref(self, rule_index: int) -> int:
        return self.rule_base + rule_index

    def rule_index(self, sym: int) -> int:
        return int(sym) - self.rule_base

    def is_rule_ref(self, sym: int) -> bool:
        return sym >= self.rule_base

    def classify(self, sym: int) -> str:
        sym = int(sym)
        if sym < 0 or sym >= self.rule_base + self.num_rules:
            raise CorruptionError(f"symbol {sym} out of range")
        if sym < self.dictionary.num_words:
            return "word"
        if sym < self.rule_base:
            return "splitter"
        return "rule"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Grammar):
            return NotImplemented
        return (
            self.dictionary.words == other.dictionary.words
            and self.dictionary.num_splitters == other.dictionary.num_splitters
            and len(self.bodies) == len(other.bodies)
            and all(np.array_equal(a, b) for a, b in zip(self.bodies, other.bodies))
        )


def expand(grammar: Grammar, symbol: int) -> np.ndarray:
    """Recursively substitute rule references until only terminals remain.

    Returns the terminal (word and splitter) id sequence for `symbol`.
    """
    base = grammar.rule_base
    limit = base + grammar.num_rules
    symbol = int(symbol)
    if symbol < 0 or symbol >= limit:
        raise CorruptionError(f"symbol {symbol} out of range")
    if symbol < base:
        return np.asarray([symbol], dtype=np.int64)

    # Iterative DFS with explicit (body, position) frames; grammars from
    # large corpora nest deeper than the interpreter recursion limit.
    out: list[int] = []
    stack: list[tuple[np.ndarray, int]] = [(grammar.bodies[symbol - base], 0)]
    while stack:
        body, pos = stack.pop()
        n = len(body)
        while pos < n:
            s = int(body[pos])
            pos += 1
            if s < base:
                out.append(s)
            elif s < limit:
                stack.append((body, pos))
                stack.append((grammar.bodies[s - base], 0))
                break
            else:
                raise CorruptionError(f"symbol {s} out of range")
    return np.asarray(out, dtype=np.int64)


def expand_rule_lengths(grammar: Grammar) -> np.ndarray:
    """Expansion length in words (splitters excluded) for every rule."""
    base = grammar.rule_base
    num_words = grammar.dictionary.num_words
    lengths = np.full(grammar.num_rules, -1, dtype=np.int64)
    order = _topo_order(grammar)
    for r in reversed(order):  # children before parents
        total = 0
        for s in grammar.bodies[r]:
            s = int(s)
            if s < num_words:
                total += 1
            elif s >= base:
                total += int(lengths[s - base])
        lengths[r] = total
    return lengths


def _topo_order(grammar: Grammar) -> list[int]:
    """Rules ordered so every rule precedes the rules it references.

    Raises CorruptionError on a reference cycle.
    """
    base = grammar.rule_base
    state = np.zeros(grammar.num_rules, dtype=np.int8)  # 0 new, 1 open, 2 done
    order: list[int] = []
    for start in range(grammar.num_rules):
        if state[start]:
            continue
        stack: list[tuple[int, int]] = [(start, 0)]
        state[start] = 1
        while stack:
            r, pos = stack.pop()
            body = grammar.bodies[r]
            advanced = False
            while pos < len(body):
                s = int(body[pos])
                pos += 1
                if s >= base:
                    c = s - base
                    if state[c] == 1:
                        raise CorruptionError(f"rule reference cycle through rule {c}")
                    if state[c] == 0:
                        stack.append((r, pos))
                        stack.append((c, 0))
                        state[c] = 1
                        advanced = True
                        break
            if not advanced:
                state[r] = 2
                order.append(r)
    order.reverse()
    return order


def serialize_grammar(grammar: Grammar) -> bytes:
    d = grammar.dictionary
    parts = [MAGIC, struct.pack("<BIII", VERSION, d.num_words, d.num_splitters, grammar.num_rules)]
    for word in d.words:
        raw = word.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
    for body in grammar.bodies:
        parts.append(struct.pack("<I", len(body)))
        parts.append(body.astype("<u4").tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(f"truncated input while reading {what}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]


def deserialize_grammar(data: bytes) -> Grammar:
    if len(data) < 4 or data[:4] != MAGIC:
        raise FormatError("bad magic: not a GTDC file")
    r = _Reader(data)
    r.pos = 4
    (version,) = struct.unpack("<B", r.take(1, "version"))
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    num_words = r.u32("word count")
    num_splitters = r.u32("splitter count")
    num_rules = r.u32("rule count")
    if num_rules < 1:
        raise FormatError("grammar must contain a root rule")

    words = []
    for i in range(num_words):
        n = r.u32(f"word {i} length")
        raw = r.take(n, f"word {i}")
        try:
            words.append(raw.decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise FormatError(f"word {i} is not valid UTF-8") from exc
    dictionary = Dictionary(words=words, num_splitters=num_splitters)

    limit = num_words + num_splitters + num_rules
    bodies = []
    for i in range(num_rules):
        n = r.u32(f"rule {i} body length")
        raw = r.take(4 * n, f"rule {i} body")
        body = np.frombuffer(raw, dtype="<u4").astype(np.int64)
        if len(body) and int(body.max()) >= limit:
            raise FormatError(f"rule {i} contains symbol {int(body.max())} out of range")
        bodies.append(body)
    if r.pos != len(data):
        raise FormatError(f"{len(data) - r.pos} trailing bytes after rules section")
    return Grammar(dictionary=dictionary, bodies=bodies)
