"""Chained hash tables over flat integer arrays, many tables per arena.

Layout: an entry buffer of bucket heads (-1 empty), a lock flag per
entry (1 locked / 0 unlocked), and parallel key / count / next-link
node buffers allocated from a shared cursor.
Several tables share one arena (`CountTableSet`); each table owns a
disjoint entry range and node range, so a set doubles as the memory
pool's table storage.

Keys are non-negative int64. In gram mode (`gram_width > 0`) the stored
key is a 63-bit fingerprint and the actual word-id sequence lives in a
flat side buffer; equality compares the full sequence, so fingerprint
collisions chain within a bucket without merging.

Concurrency contract: many writers may add concurrently within a
traversal round; reads (get / items / merge sources) require the round
barrier. The Python methods here serialize mutations with striped locks
(CPython offers no lock-free compare-and-swap); the numba kernel twins
implement the per-entry lock protocol with real atomics.
"""

from __future__ import annotations

import threading

import numpy as np

from .errors import ResourceError

MASK64 = (1 << 64) - 1
MASK63 = (1 << 63) - 1
_FP_SEED = 0x9E3779B97F4A7C15
_FP_SALT = 0x100000001B3

# Table op status codes shared with the kernels.
OK = 0
RETRY = 1
FULL = 2


def mix64(z: int) -> int:
    """64-bit avalanche finalizer (splitmix64 constants)."""
    z &= MASK64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & MASK64
    z ^= z >> 31
    return z


def bucket_of(key: int, entry_mask: int) -> int:
    return mix64(key) & entry_mask


def gram_fingerprint(ids) -> int:
    h = _FP_SEED
    for w in ids:
        h = mix64(h ^ ((int(w) + _FP_SALT) & MASK64))
    return h & MASK63


def _entry_capacity(bound: int) -> int:
    """Next power of two >= 2*bound (load factor <= 0.5), minimum 1."""
    need = max(1, 2 * bound)
    return 1 << (need - 1).bit_length()


class CountTableSet:
    """Arena of chained count tables with shared node/entry storage."""

    def __init__(self, bounds, gram_width: int = 0):
        bounds = [int(b) for b in bounds]
        if any(b < 0 for b in bounds):
            raise ResourceError("negative table bound")
        self.gram_width = int(gram_width)
        T = len(bounds)
        entry_caps = [_entry_capacity(b) for b in bounds]

        self.entry_off = np.zeros(T, dtype=np.int64)
        self.entry_mask = np.asarray([c - 1 for c in entry_caps], dtype=np.int64)
        self.node_off = np.zeros(T, dtype=np.int64)
        self.node_cap = np.asarray(bounds, dtype=np.int64)
        if T > 1:
            self.entry_off[1:] = np.cumsum(entry_caps[:-1])
            self.node_off[1:] = np.cumsum(bounds[:-1])

        total_entries = int(sum(entry_caps))
        total_nodes = int(sum(bounds))
        self.entries = np.full(total_entries, -1, dtype=np.int64)
        self.locks = np.zeros(total_entries, dtype=np.int64)
        self.keys = np.zeros(total_nodes, dtype=np.int64)
        self.vals = np.zeros(total_nodes, dtype=np.int64)
        self.nxt = np.full(total_nodes, -1, dtype=np.int64)
        self.grams = np.zeros(total_nodes * self.gram_width, dtype=np.int64)
        self.cursor = np.zeros(T, dtype=np.int64)

        self._stripes: list[threading.Lock] | None = None
        self._alloc_lock = threading.Lock()

    # -- geometry -------------------------------------------------------

    @property
    def num_tables(self) -> int:
        return len(self.cursor)

    def table(self, t: int) -> "CountTable":
        return CountTable(self, t)

    def size(self, t: int) -> int:
        return int(min(self.cursor[t], self.node_cap[t]))

    def kernel_args(self) -> tuple:
        """Array bundle consumed by the traversal kernels."""
        return (
            self.entries, self.locks, self.keys, self.vals, self.nxt,
            self.grams, self.cursor, self.entry_off, self.entry_mask,
            self.node_off, self.node_cap,
        )

    # -- python-side operations ------------------------------------------

    def _lock_for(self, bucket: int) -> threading.Lock:
        if self._stripes is None:
            with self._alloc_lock:
                if self._stripes is None:
                    self._stripes = [threading.Lock() for _ in range(64)]
        return self._stripes[bucket & 63]

    def _gram_equal(self, node: int, gram) -> bool:
        gw = self.gram_width
        base = node * gw
        for j in range(gw):
            if self.grams[base + j] != gram[j]:
                return False
        return True

    def _find(self, t: int, key: int, gram) -> int:
        b = int(self.entry_off[t]) + bucket_of(key, int(self.entry_mask[t]))
        node = int(self.entries[b])
        while node != -1:
            if int(self.keys[node]) == key and (
                self.gram_width == 0 or self._gram_equal(node, gram)
            ):
                return node
            node = int(self.nxt[node])
        return -1

    def insert_or_add(self, t: int, key: int, delta: int, gram=None, *,
                      blocking: bool = True) -> bool:
        """Add `delta` to `key`'s count, claiming a node if absent.

        Returns False only in non-blocking mode when the entry lock is
        held elsewhere (the round protocol retries such items later).
        Raises ResourceError when the node range is exhausted.
        """
        if delta <= 0:
            raise ValueError("delta must be positive")
        key = int(key)
        if self.gram_width and gram is None:
            raise ValueError("gram-mode table requires the gram ids")
        b = int(self.entry_off[t]) + bucket_of(key, int(self.entry_mask[t]))
        lock = self._lock_for(b)
        if not lock.acquire(blocking=blocking):
            return False
        try:
            node = int(self.entries[b])
            while node != -1:
                if int(self.keys[node]) == key and (
                    self.gram_width == 0 or self._gram_equal(node, gram)
                ):
                    self.vals[node] += delta
                    return True
                node = int(self.nxt[node])
            with self._alloc_lock:
                n = int(self.cursor[t])
                if n >= int(self.node_cap[t]):
                    raise ResourceError(
                        f"table {t} node capacity {int(self.node_cap[t])} exhausted"
                    )
                self.cursor[t] = n + 1
            abs_n = int(self.node_off[t]) + n
            self.keys[abs_n] = key
            self.vals[abs_n] = delta
            self.nxt[abs_n] = self.entries[b]
            gw = self.gram_width
            if gw:
                self.grams[abs_n * gw : abs_n * gw + gw] = [int(g) for g in gram]
            self.entries[b] = abs_n
            return True
        finally:
            lock.release()

    def get(self, t: int, key: int, gram=None):
        node = self._find(t, int(key), gram)
        return int(self.vals[node]) if node != -1 else None

    def items(self, t: int) -> list[tuple[int, int]]:
        """All (key, count) pairs of table `t`; order unspecified."""
        base = int(self.node_off[t])
        return [
            (int(self.keys[base + i]), int(self.vals[base + i]))
            for i in range(self.size(t))
        ]

    def gram_items(self, t: int) -> list[tuple[tuple[int, ...], int]]:
        gw = self.gram_width
        base = int(self.node_off[t])
        out = []
        for i in range(self.size(t)):
            n = base + i
            gram = tuple(int(g) for g in self.grams[n * gw : n * gw + gw])
            out.append((gram, int(self.vals[n])))
        return out

    def as_dict(self, t: int) -> dict:
        if self.gram_width:
            return dict(self.gram_items(t))
        return dict(self.items(t))

    def chain_lengths(self, t: int) -> list[int]:
        """Walk every bucket chain; raises on a cycle. Diagnostic helper."""
        base = int(self.entry_off[t])
        count = int(self.entry_mask[t]) + 1
        seen = set()
        lengths = []
        for b in range(base, base + count):
            node = int(self.entries[b])
            steps = 0
            while node != -1:
                if node in seen:
                    raise ResourceError(f"chain cycle at node {node}")
                seen.add(node)
                steps += 1
                node = int(self.nxt[node])
            lengths.append(steps)
        return lengths


class CountTable:
    """View of one table inside a CountTableSet."""

    def __init__(self, table_set: CountTableSet, index: int):
        self.set = table_set
        self.index = index

    def insert_or_add(self, key: int, delta: int, gram=None, *, blocking: bool = True) -> bool:
        return self.set.insert_or_add(self.index, key, delta, gram, blocking=blocking)

    def get(self, key: int, gram=None):
        return self.set.get(self.index, key, gram)

    def items(self):
        return self.set.items(self.index)

    def as_dict(self):
        return self.set.as_dict(self.index)

    def __len__(self):
        return self.set.size(self.index)


def table_for(expected_keys: int, gram_width: int = 0) -> CountTable:
    """Standalone single table sized for `expected_keys` distinct keys."""
    return CountTableSet([expected_keys], gram_width=gram_width).table(0)


def merge_scaled(dst: CountTable, src: CountTable, scale: int) -> None:
    """insert_or_add every (k, v) of `src` into `dst` as (k, v * scale).

    `src` must be frozen (its producing round finished).
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    sset, s = src.set, src.index
    gw = sset.gram_width
    base = int(sset.node_off[s])
    for i in range(sset.size(s)):
        n = base + i
        gram = sset.grams[n * gw : n * gw + gw] if gw else None
        dst.insert_or_add(int(sset.keys[n]), int(sset.vals[n]) * scale, gram)
