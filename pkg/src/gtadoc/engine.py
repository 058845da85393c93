"""Round-based DAG traversals.

Each traversal is a sequence of bulk-synchronous rounds driven from a
single control thread: snapshot the ready set (mask flags), partition it
into work units, run the round kernel over the units (worker threads on
the accelerated backend), then a barrier. A round that changes no mask
ends the traversal. Top-down readiness counts arrived in-edges; the two
bottom-up passes (size bounds, then local tables) count finished
out-edges. Every pass is bounded by the DAG depth; exceeding depth + 1
rounds means the structure is corrupt.

Weights generalize to per-file occurrence vectors: a traversal carries a
(rules x files) matrix whose single-column form is the plain corpus
weight. File attribution for per-file outputs thus rides the same
propagation as scalar weights.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import ceil

import numpy as np

from . import backend
from .dag import Dag
from .errors import CorruptionError, ResourceError, UsageError
from .table import FULL, CountTableSet

STRATEGIES = ("auto", "topdown", "bottomup")


@dataclass
class TraversalConfig:
    strategy: str = "auto"
    workers: int = 1
    chunk_factor: int = 16  # unit split threshold: 16x average elements
    file_set_width: int = 64  # strategy pivot for per-file traversals
    backend: str | None = None

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise UsageError(f"unknown strategy {self.strategy!r}")
        if self.workers < 1:
            raise UsageError("workers must be >= 1")
        if self.chunk_factor < 1:
            raise UsageError("chunk factor must be >= 1")


@dataclass
class TaskHooks:
    """What a task needs from the engine (the per-rule loop body and the
    reduction are selected by name; everything else is shared)."""

    name: str
    per_rule_visit: str  # "words" or "grams"
    reduce: str  # "global" or "per-file"
    needs_file_info: bool
    direction: str | None = None


def select_strategy(dag: Dag, hooks: TaskHooks, cfg: TraversalConfig) -> str:
    """Pick a traversal direction when the config says auto."""
    if cfg.strategy != "auto":
        return cfg.strategy
    if hooks.direction is not None:
        return hooks.direction
    if hooks.needs_file_info:
        return "bottomup" if dag.num_files > cfg.file_set_width else "topdown"
    return "bottomup" if hooks.reduce == "per-file" else "topdown"


def partition_work(ids, lengths, total_elements: int, cfg: TraversalConfig):
    """Split per-rule work into units of at most chunk_factor * average.

    Rules no longer than the threshold become one unit; longer ones are
    cut into ceil(len / threshold) contiguous ranges. Returns parallel
    arrays (rule id, range start, range end); ranges are rule-relative.
    """
    count = len(ids)
    if count == 0:
        e = np.empty(0, dtype=np.int64)
        return e, e.copy(), e.copy()
    avg = max(1, int(total_elements) // count)
    threshold = cfg.chunk_factor * avg
    u_id: list[int] = []
    u_start: list[int] = []
    u_end: list[int] = []
    for rid, ln in zip(ids, lengths):
        rid = int(rid)
        ln = int(ln)
        if ln <= threshold:
            u_id.append(rid)
            u_start.append(0)
            u_end.append(ln)
        else:
            for piece in range(ceil(ln / threshold)):
                u_id.append(rid)
                u_start.append(piece * threshold)
                u_end.append(min((piece + 1) * threshold, ln))
    return (
        np.asarray(u_id, dtype=np.int64),
        np.asarray(u_start, dtype=np.int64),
        np.asarray(u_end, dtype=np.int64),
    )


class Runner:
    """Executes one kernel over a unit list, split across worker threads.

    The accelerated kernels drop the GIL, so threads genuinely overlap;
    the pure backend runs the whole batch on the calling thread (results
    are identical either way, all shared updates commute).
    """

    def __init__(self, cfg: TraversalConfig):
        self.cfg = cfg
        self.kernels = backend.kernels(cfg.backend)
        self.parallel = (
            cfg.workers > 1 and self.kernels.__name__.endswith("_kernels")
        )
        self._pool = ThreadPoolExecutor(cfg.workers) if self.parallel else None

    def run(self, kernel_name: str, args: tuple, n_units: int):
        kernel = getattr(self.kernels, kernel_name)
        if n_units == 0:
            return None
        if self._pool is None:
            return kernel(*args, 0, n_units)
        step = ceil(n_units / self.cfg.workers)
        futures = [
            self._pool.submit(kernel, *args, lo, min(lo + step, n_units))
            for lo in range(0, n_units, step)
        ]
        results = [f.result() for f in futures]
        return max(r for r in results) if results[0] is not None else None

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=True)

    def __enter__(self) -> "Runner":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


@dataclass
class TraversalState:
    """Mutable per-run arrays next to the immutable Dag."""

    dag: Dag
    nfiles: int = 1  # weight columns: 1 for corpus-global weights
    wmat: np.ndarray = field(init=False)
    cur_in: np.ndarray = field(init=False)
    cur_out: np.ndarray = field(init=False)
    mask: np.ndarray = field(init=False)
    rounds: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        R = self.dag.num_rules
        self.wmat = np.zeros(R * self.nfiles, dtype=np.int64)
        self.cur_in = np.zeros(R, dtype=np.int64)
        self.cur_out = np.zeros(R, dtype=np.int64)
        self.mask = np.zeros(R, dtype=np.int64)

    @property
    def weight(self) -> np.ndarray:
        """Corpus-global rule weights (only valid when nfiles == 1)."""
        return self.wmat.reshape(-1, self.nfiles).sum(axis=1)

    def weight_of(self, r: int, f: int = 0) -> int:
        return int(self.wmat[r * self.nfiles + f])


def init_top_down_masks(dag: Dag, state: TraversalState) -> None:
    """Seed weights with root-body frequencies and mark the rules whose
    in-edges all come from the root."""
    R = dag.num_rules
    state.cur_in[:] = 0
    state.mask[:] = 0
    w = state.wmat.reshape(R, state.nfiles)
    w[:] = 0
    if state.nfiles == 1:
        w[:, 0] = dag.root_freq
        w[0, 0] = 1  # root content counts once at reduce time
    else:
        w[:] = dag.segment_rule_counts
        w[0, :] = 1
    if R > 1:
        state.mask[1:] = (dag.num_in_edge[1:] == 0).astype(np.int64)


def top_down_traverse(dag: Dag, state: TraversalState, cfg: TraversalConfig,
                      runner: Runner | None = None) -> int:
    """Propagate weights to children until no mask changes; returns the
    number of executed rounds."""
    own_runner = runner is None
    runner = runner or Runner(cfg)
    changes = np.zeros(1, dtype=np.int64)
    sub_counts = np.diff(dag.sub_off)
    rounds = 0
    try:
        while True:
            frontier = np.flatnonzero(state.mask)
            if frontier.size == 0:
                break
            rounds += 1
            if rounds > dag.depth + 1:
                raise CorruptionError("top-down traversal exceeded depth bound")
            lengths = sub_counts[frontier]
            units = partition_work(frontier, lengths, int(lengths.sum()), cfg)
            runner.run(
                "topdown_round",
                (dag.sub_ids, dag.sub_freqs, dag.sub_off, state.wmat,
                 state.nfiles, state.cur_in, dag.num_in_edge, state.mask,
                 changes, *units),
                len(units[0]),
            )
            state.mask[frontier] = 0
    finally:
        if own_runner:
            runner.close()
    state.rounds["topdown"] = rounds
    return rounds


def _root_word_units(dag: Dag, per_file: bool, base: int = 0):
    """(dst table, body range) units covering root words, one per segment."""
    u_dst, u_start, u_end = [], [], []
    for f, (s, e) in enumerate(dag.segments):
        u_dst.append(base + f if per_file else base)
        u_start.append(s)
        u_end.append(e)
    return (
        np.asarray(u_dst, dtype=np.int64),
        np.asarray(u_start, dtype=np.int64),
        np.asarray(u_end, dtype=np.int64),
    )


def _split_root_units(units, dag: Dag, cfg: TraversalConfig):
    """Range-partition the per-segment units like any long rule body."""
    u_dst, u_start, u_end = units
    lengths = u_end - u_start
    ids = np.arange(len(u_dst))
    p_id, p_start, p_end = partition_work(ids, lengths, int(lengths.sum()), cfg)
    return (
        u_dst[p_id],
        u_start[p_id] + p_start,
        u_start[p_id] + p_end,
    )


def word_table_bounds(dag: Dag, per_file: bool) -> list[int]:
    """Safe distinct-word capacities for reduce outputs: the vocabulary
    bound intersected with each file's token count."""
    vocab = dag.grammar.dictionary.num_words
    if not per_file:
        return [vocab]
    return [int(min(vocab, t)) for t in dag.segment_token_counts]


def reduce_top_down(dag: Dag, state: TraversalState, cfg: TraversalConfig,
                    runner: Runner | None = None,
                    out: CountTableSet | None = None) -> CountTableSet:
    """Fold own-word frequencies times final weights into output tables.

    With a single weight column the result is the corpus-global table;
    with per-file columns, one table per file. Root words are walked
    straight off the root body so they land in their own segment.
    """
    per_file = state.nfiles > 1
    if out is None:
        out = CountTableSet(word_table_bounds(dag, per_file))
    own_runner = runner is None
    runner = runner or Runner(cfg)
    try:
        rules = np.arange(1, dag.num_rules, dtype=np.int64)
        lengths = np.diff(dag.own_off)[1:]
        units = partition_work(rules, lengths, int(lengths.sum()), cfg)
        status = runner.run(
            "reduce_words_round",
            (dag.own_ids, dag.own_freqs, dag.own_off, state.wmat,
             state.nfiles, out.kernel_args(), *units),
            len(units[0]),
        )
        _check_capacity(status)
        root_units = _split_root_units(_root_word_units(dag, per_file), dag, cfg)
        status = runner.run(
            "root_words_round",
            (dag.body_sym, dag.grammar.dictionary.num_words,
             out.kernel_args(), *root_units),
            len(root_units[0]),
        )
        _check_capacity(status)
    finally:
        if own_runner:
            runner.close()
    return out


def init_bottom_up_masks(dag: Dag, state: TraversalState) -> None:
    """Mark the leaves (rules without sub-rules); the root stays out."""
    state.cur_out[:] = 0
    state.mask[:] = 0
    sub_counts = np.diff(dag.sub_off)
    state.mask[1:] = (sub_counts[1:] == 0).astype(np.int64)


def _bottom_up_rounds(dag: Dag, state: TraversalState, cfg: TraversalConfig,
                      runner: Runner, visit, label: str) -> int:
    """Shared readiness loop for the bottom-up passes: visit every ready
    rule, then report finished out-edges to parents to arm the next round."""
    changes = np.zeros(1, dtype=np.int64)
    rounds = 0
    while True:
        ready = np.flatnonzero(state.mask)
        if ready.size == 0:
            break
        rounds += 1
        if rounds > dag.depth + 1:
            raise CorruptionError(f"{label} pass exceeded depth bound")
        visit(ready)
        runner.run(
            "finalize_round",
            (dag.par_ids, dag.par_freqs, dag.par_off, dag.num_out_edge,
             state.cur_out, state.mask, changes, ready),
            len(ready),
        )
        state.mask[ready] = 0
    state.rounds[label] = rounds
    return rounds


def local_table_bounds(dag: Dag, state: TraversalState, cfg: TraversalConfig,
                       runner: Runner | None = None,
                       own_sizes: np.ndarray | None = None,
                       caps: np.ndarray | None = None) -> np.ndarray:
    """Bottom-up sizing pass: bound(rule) = own distinct keys plus the
    bounds of its children, clipped to what the expansion can hold."""
    own_runner = runner is None
    runner = runner or Runner(cfg)
    if own_sizes is None:
        own_sizes = dag.own_distinct().astype(np.int64)
    if caps is None:
        vocab = dag.grammar.dictionary.num_words
        caps = np.minimum(dag.exp_len, vocab).astype(np.int64)
    bound = np.zeros(dag.num_rules, dtype=np.int64)
    init_bottom_up_masks(dag, state)

    def visit(ready):
        runner.run(
            "bounds_round",
            (own_sizes, caps, dag.sub_ids, dag.sub_freqs, dag.sub_off,
             bound, ready),
            len(ready),
        )

    try:
        _bottom_up_rounds(dag, state, cfg, runner, visit, "bounds")
    finally:
        if own_runner:
            runner.close()
    return bound


def plan_pool(dag: Dag, bounds: np.ndarray, gram_width: int = 0,
              extra_bounds: list[int] | None = None) -> CountTableSet:
    """Reserve one arena holding every rule's local table (plus optional
    output tables appended after the rules)."""
    sizes = [int(b) for b in bounds]
    if extra_bounds:
        sizes.extend(int(b) for b in extra_bounds)
    return CountTableSet(sizes, gram_width=gram_width)


def _merge_units(pairs, pool: CountTableSet):
    """Build (dst, src, scale, node range) unit arrays from (dst table,
    src table, scale) triples, ranging over the src's frozen nodes."""
    u_dst, u_src, u_scale, u_start, u_end = [], [], [], [], []
    for dst, src, scale in pairs:
        n = pool.size(src)
        if n == 0:
            continue
        u_dst.append(dst)
        u_src.append(src)
        u_scale.append(scale)
        u_start.append(0)
        u_end.append(n)
    return tuple(
        np.asarray(a, dtype=np.int64)
        for a in (u_dst, u_src, u_scale, u_start, u_end)
    )


def _split_merge_units(units, cfg: TraversalConfig):
    u_dst, u_src, u_scale, u_start, u_end = units
    lengths = u_end - u_start
    if len(lengths) == 0:
        return units
    ids = np.arange(len(u_dst))
    p_id, p_start, p_end = partition_work(ids, lengths, int(lengths.sum()), cfg)
    return (u_dst[p_id], u_src[p_id], u_scale[p_id], p_start, p_end)


def bottom_up_traverse(dag: Dag, state: TraversalState, cfg: TraversalConfig,
                       pool: CountTableSet, runner: Runner | None = None) -> int:
    """Fill per-rule word tables leaves-first: own frequencies, then each
    child's table scaled by its frequency. Children are frozen once their
    producing round has finished."""
    own_runner = runner is None
    runner = runner or Runner(cfg)
    init_bottom_up_masks(dag, state)
    own_lengths = np.diff(dag.own_off)

    def visit(ready):
        lengths = own_lengths[ready]
        units = partition_work(ready, lengths, int(lengths.sum()), cfg)
        status = runner.run(
            "own_insert_round",
            (dag.own_ids, dag.own_freqs, dag.own_off, pool.kernel_args(),
             *units),
            len(units[0]),
        )
        _check_bounds_pass(status)
        pairs = []
        for r in ready:
            for c, f in dag.sub_pairs(int(r)):
                pairs.append((int(r), c, f))
        merge = _split_merge_units(_merge_units(pairs, pool), cfg)
        status = runner.run(
            "merge_round",
            (pool.kernel_args(), pool.kernel_args(), pool.gram_width, *merge),
            len(merge[0]),
        )
        _check_bounds_pass(status)

    try:
        rounds = _bottom_up_rounds(dag, state, cfg, runner, visit, "loctbl")
    finally:
        if own_runner:
            runner.close()
    return rounds


def merge_with_retries(runner: Runner, dst: CountTableSet, src: CountTableSet,
                       pairs, cfg: TraversalConfig) -> int:
    """Global result merge: non-blocking inserts with per-item masks,
    relaunched until no item is left pending. Returns launch count."""
    units = _split_merge_units(_merge_units(pairs, src), cfg)
    n_units = len(units[0])
    if n_units == 0:
        return 0
    lengths = units[4] - units[3]
    u_done = np.zeros(n_units, dtype=np.int64)
    if n_units > 1:
        u_done[1:] = np.cumsum(lengths[:-1])
    done = np.zeros(int(lengths.sum()), dtype=np.int64)
    launches = 0
    while True:
        launches += 1
        pending = np.zeros(1, dtype=np.int64)
        status = runner.run(
            "merge_try_round",
            (dst.kernel_args(), src.kernel_args(), src.gram_width,
             *units, u_done, done, pending),
            n_units,
        )
        _check_capacity(status)
        if int(pending[0]) == 0:
            break
    return launches


def reduce_bottom_up(dag: Dag, cfg: TraversalConfig, pool: CountTableSet,
                     per_file: bool, runner: Runner | None = None,
                     out: CountTableSet | None = None,
                     out_base: int = 0) -> CountTableSet:
    """Combine the root's own words with the tables of the rules the root
    references directly, globally or restricted to each file segment.

    Output tables may live inside the rule-table arena itself (`out` is
    the pool, `out_base` the first output table index) or in a separate
    set; the merge protocol is the same either way.
    """
    if out is None:
        out = CountTableSet(word_table_bounds(dag, per_file))
    own_runner = runner is None
    runner = runner or Runner(cfg)
    try:
        root_units = _split_root_units(
            _root_word_units(dag, per_file, out_base), dag, cfg)
        status = runner.run(
            "root_words_round",
            (dag.body_sym, dag.grammar.dictionary.num_words,
             out.kernel_args(), *root_units),
            len(root_units[0]),
        )
        _check_capacity(status)
        pairs = []
        if per_file:
            seg_counts = dag.segment_rule_counts
            for c in dag.sub_ids[dag.sub_off[0] : dag.sub_off[1]]:
                for f in range(dag.num_files):
                    freq = int(seg_counts[int(c), f])
                    if freq > 0:
                        pairs.append((out_base + f, int(c), freq))
        else:
            for c, f in dag.sub_pairs(0):
                pairs.append((out_base, c, f))
        merge_with_retries(runner, out, pool, pairs, cfg)
    finally:
        if own_runner:
            runner.close()
    return out


def _check_capacity(status) -> None:
    if status is not None and status == FULL:
        raise ResourceError("result table capacity exhausted")


def _check_bounds_pass(status) -> None:
    if status is not None and status == FULL:
        raise ResourceError(
            "local table overflow: the sizing pass under-reserved (corrupt DAG?)"
        )
