"""Online grammar inference over the numbered corpus stream.

Processes symbols strictly left to right while maintaining the two
classic constraints:

  digram uniqueness: no ordered pair of adjacent symbols occurs at two
  distinct non-overlapping positions anywhere in the grammar;
  rule utility: every non-root rule is referenced at least twice.

A repeated digram is folded into a rule; a rule whose reference count
drops to one is inlined and deleted. Rule ids are allocated as the
lowest id not currently in use, which makes the output grammar a pure
function of the input stream.

Splitter symbols occur exactly once each in the stream, so they can
never join a repeated digram and always stay in the root body.
"""

from __future__ import annotations

import heapq

import numpy as np

from .errors import CorruptionError, UsageError
from .grammar import Grammar
from .ingest import Dictionary


class _Node:
    __slots__ = ("sym", "prev", "next", "rule_id", "dead")

    def __init__(self, sym: int, rule_id: int | None = None):
        self.sym = sym
        self.prev: _Node | None = None
        self.next: _Node | None = None
        self.rule_id = rule_id  # set only on guard nodes
        self.dead = False


def _join(a: _Node, b: _Node) -> None:
    a.next = b
    b.prev = a


class _Builder:
    """Mutable grammar under construction.

    Terminals are non-negative stream ids; a reference to rule q is
    encoded as -q (the root, rule 0, is never referenced). Each rule is
    a circular doubly-linked list hanging off a guard node.
    """

    def __init__(self) -> None:
        root = _Node(0, rule_id=0)
        _join(root, root)
        self.rules: dict[int, _Node] = {0: root}
        self.uses: dict[int, set[_Node]] = {}
        self.index: dict[tuple[int, int], _Node] = {}
        self.next_id = 1
        self.free_ids: list[int] = []

    # -- id allocation ------------------------------------------------

    def _alloc_id(self) -> int:
        if self.free_ids:
            return heapq.heappop(self.free_ids)
        rid = self.next_id
        self.next_id += 1
        return rid

    # -- usage bookkeeping ---------------------------------------------

    def _track(self, node: _Node) -> None:
        if node.sym < 0:
            self.uses[-node.sym].add(node)

    # -- digram index ---------------------------------------------------

    def _check(self, a: _Node) -> bool:
        """Examine the digram starting at `a`; fold if it repeats.

        Returns True when a substitution happened (the caller's local
        node references may be stale afterwards).
        """
        b = a.next
        if a.rule_id is not None or b.rule_id is not None:
            return False
        key = (a.sym, b.sym)
        index = self.index
        existing = index.get(key)
        if existing is None:
            index[key] = a
            return False
        if existing is a or existing.next is a or b is existing:
            return False  # same or overlapping occurrence
        self._match(a, existing, key)
        return True

    # -- folding --------------------------------------------------------

    def _match(self, a: _Node, existing: _Node, key: tuple[int, int]) -> None:
        guard = existing.prev
        if guard.rule_id is not None and existing.next.next is guard:
            # The indexed occurrence is a complete rule body: reuse it.
            rid = guard.rule_id
            self._substitute(a, rid)
        else:
            rid = self._alloc_id()
            guard = _Node(0, rule_id=rid)
            x = _Node(key[0])
            y = _Node(key[1])
            _join(guard, x)
            _join(x, y)
            _join(y, guard)
            self.rules[rid] = guard
            self.uses[rid] = set()
            self._track(x)
            self._track(y)
            self.index[key] = x  # the canonical occurrence now lives in the body
            self._substitute(existing, rid)
            self._substitute(a, rid)
        self._enforce(key[0])
        self._enforce(key[1])

    def _drop_entry(self, first: _Node, second: _Node) -> _Node | None:
        """Remove the index entry anchored at the dying adjacency
        (first, second), if that is where it points.

        Equal-symbol runs ("x x x") leave one overlap-suppressed duplicate
        next to the indexed occurrence; once the indexed one dies that
        duplicate becomes live again, so return the node whose digram must
        be re-examined after the splice.
        """
        if first.rule_id is not None or second.rule_id is not None:
            return None
        key = (first.sym, second.sym)
        if self.index.get(key) is not first:
            return None
        del self.index[key]
        o = first.prev
        if o.rule_id is None and o.sym == first.sym == second.sym:
            return o  # left shadow (o, first)
        nn = second.next
        if nn.rule_id is None and first.sym == second.sym == nn.sym:
            return second  # right shadow (second, nn)
        return None

    def _substitute(self, node: _Node, rid: int) -> None:
        """Replace the digram at `node` with a reference to rule `rid`."""
        a = node
        b = a.next
        p, n = a.prev, b.next
        uses = self.uses
        # Drop index entries anchored at the three dying adjacencies. The
        # middle digram's shadows die with a and b; the outer ones may
        # reveal a shadowed duplicate on the surviving side.
        left_shadow = self._drop_entry(p, a)
        key = (a.sym, b.sym)
        if self.index.get(key) is a:
            del self.index[key]
        right_shadow = self._drop_entry(b, n)
        if a.sym < 0:
            uses[-a.sym].discard(a)
        if b.sym < 0:
            uses[-b.sym].discard(b)
        a.dead = b.dead = True
        m = _Node(-rid)
        uses[rid].add(m)
        p.next = m
        m.prev = p
        m.next = n
        n.prev = m
        self._check(p)
        if not m.dead:
            self._check(m)
        for shadow in (left_shadow, right_shadow):
            if shadow is not None and not shadow.dead and not shadow.next.dead:
                self._check(shadow)

    def _enforce(self, sym: int) -> None:
        if sym >= 0:
            return
        rid = -sym
        refs = self.uses.get(rid)
        if refs is not None and rid in self.rules and len(refs) == 1:
            self._inline(rid, next(iter(refs)))

    def _inline(self, rid: int, u: _Node) -> None:
        """Splice rule `rid`'s body over its single remaining reference."""
        guard = self.rules.pop(rid)
        del self.uses[rid]
        first, last = guard.next, guard.prev
        p, n = u.prev, u.next
        left_shadow = self._drop_entry(p, u)
        right_shadow = self._drop_entry(u, n)
        u.dead = True
        _join(p, first)
        _join(last, n)
        heapq.heappush(self.free_ids, rid)
        self._check(p)
        if not last.dead:
            self._check(last)
        for shadow in (left_shadow, right_shadow):
            if shadow is not None and not shadow.dead and not shadow.next.dead:
                self._check(shadow)

    # -- driving --------------------------------------------------------

    def append(self, sym: int) -> None:
        root = self.rules[0]
        last = root.prev
        node = _Node(int(sym))
        _join(last, node)
        _join(node, root)
        self._check(last)

    def finalize(self, dictionary: Dictionary) -> Grammar:
        live = sorted(self.rules)
        compact = {rid: i for i, rid in enumerate(live)}
        base = dictionary.num_terminals
        bodies = []
        for rid in live:
            guard = self.rules[rid]
            syms = []
            node = guard.next
            while node is not guard:
                s = node.sym
                syms.append(s if s >= 0 else base + compact[-s])
                node = node.next
            bodies.append(np.asarray(syms, dtype=np.int64))
        grammar = Grammar(dictionary=dictionary, bodies=bodies)
        _validate_splitters(grammar)
        return grammar


def _validate_splitters(grammar: Grammar) -> None:
    d = grammar.dictionary
    seen = []
    for i, body in enumerate(grammar.bodies):
        for s in body:
            s = int(s)
            if d.is_splitter(s):
                if i != 0:
                    raise CorruptionError(f"splitter {s} escaped into rule {i}")
                seen.append(s - d.num_words)
    if seen != list(range(d.num_splitters)):
        raise CorruptionError(f"splitters out of order in root: {seen}")


def infer_grammar(dictionary: Dictionary, stream: np.ndarray) -> Grammar:
    """Infer the compressed grammar for a numbered corpus stream."""
    if len(stream) == 0:
        raise UsageError("cannot infer a grammar from an empty stream")
    builder = _Builder()
    for sym in stream:
        builder.append(sym)
    return builder.finalize(dictionary)
