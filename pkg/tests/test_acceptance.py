"""Acceptance suite: one test per criterion, one printed verdict line each.

Run with `pytest tests/test_acceptance.py -v -s`. Criteria 1-4 share a
module-scoped battery of 200 fuzzed corpora (1-64 files, up to 100k
tokens, vocabulary up to 5k, Zipf-distributed words); the remaining
criteria build their own inputs. The performance-sanity criterion is
marked `perf` (deselect with `-m "not perf"` for quick runs); it reports
without failing on machines with fewer than 4 cores.
"""

from __future__ import annotations

import os
import threading
import time
from dataclasses import dataclass, field

import numpy as np
import pytest

from gtadoc import backend, oracle
from gtadoc.dag import Dag, build_dag
from gtadoc.engine import (
    TraversalConfig,
    TraversalState,
    bottom_up_traverse,
    init_top_down_masks,
    local_table_bounds,
    plan_pool,
    top_down_traverse,
)
from gtadoc.grammar import Grammar, deserialize_grammar, expand, serialize_grammar
from gtadoc.ingest import build_corpus_stream
from gtadoc.sequence import head_only_window_count, head_tail_bound, init_head_tail
from gtadoc.sequitur import infer_grammar
from gtadoc.table import CountTableSet
from gtadoc.tasks import TASK_NAMES, oracle_task, render, run_task

from conftest import (
    G1_FILES,
    scan_digram_uniqueness,
    scan_rule_utility,
    scan_splitters_root_only,
)

NUM_CORPORA = 200
SEQ_LEN = 3


def verdict(criterion: int, ok: bool, detail: str) -> None:
    print(f"[criterion {criterion}] {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


def acceptance_corpus(rng: np.random.Generator) -> list[tuple[str, list[str]]]:
    """1-64 files, up to 100k tokens total, vocab up to 5k, Zipf words."""
    num_files = int(rng.integers(1, 65))
    vocab_size = int(rng.integers(1, 5001))
    vocab = [f"w{i}" for i in range(vocab_size)]
    bucket = rng.random()
    if bucket < 0.80:
        total = int(rng.integers(0, 3000))
    elif bucket < 0.95:
        total = int(rng.integers(3000, 20000))
    else:
        total = int(rng.integers(20000, 100001))
    cuts = np.sort(rng.integers(0, total + 1, size=num_files - 1))
    bounds = [0, *cuts.tolist(), total]
    ranks = np.minimum(rng.zipf(1.3, size=total), vocab_size) - 1
    return [
        (f"f{i:03d}", [vocab[r] for r in ranks[bounds[i]:bounds[i + 1]]])
        for i in range(num_files)
    ]


@dataclass
class Record:
    index: int
    grammar: Grammar
    dag: Dag
    token_total: int
    stream_len: int
    serialized_round_trip: bool
    lossless: bool
    mismatches: list = field(default_factory=list)
    rounds: dict = field(default_factory=dict)
    weights_total: int = 0
    root_tokens: int = 0


@dataclass
class Battery:
    records: list
    equivalence_seconds: float


@pytest.fixture(scope="module")
def battery() -> Battery:
    cfg = TraversalConfig()
    backend.kernels(cfg.backend).warmup()
    records = []
    equivalence = 0.0
    for i in range(NUM_CORPORA):
        rng = np.random.default_rng(1_000_000 + i)
        files = acceptance_corpus(rng)
        dictionary, stream = build_corpus_stream(files)

        t0 = time.perf_counter()
        grammar = infer_grammar(dictionary, stream)
        dag = build_dag(grammar)
        decompressed = oracle.decompress_files(grammar)
        mismatches = []
        for task in TASK_NAMES:
            got = render(run_task(dag, task, cfg, SEQ_LEN), dictionary)
            expected = render(oracle_task(grammar, task, SEQ_LEN, decompressed),
                              dictionary)
            if got != expected:
                mismatches.append((i, task))
        equivalence += time.perf_counter() - t0

        rec = Record(
            index=i,
            grammar=grammar,
            dag=dag,
            token_total=sum(len(t) for _, t in files),
            stream_len=len(stream),
            serialized_round_trip=(
                serialize_grammar(deserialize_grammar(serialize_grammar(grammar)))
                == serialize_grammar(grammar)
            ),
            lossless=(
                expand(grammar, grammar.rule_ref(0)).tolist() == stream.tolist()
            ),
            mismatches=mismatches,
        )
        state = TraversalState(dag)
        init_top_down_masks(dag, state)
        top_down_traverse(dag, state, cfg)
        weights = state.weight
        rec.weights_total = int(
            sum(int(weights[r]) * int(dag.own_token_count[r])
                for r in range(1, dag.num_rules))
        )
        rec.root_tokens = int(dag.own_token_count[0])
        rec.rounds["topdown"] = state.rounds["topdown"]
        bound = local_table_bounds(dag, state, cfg)
        rec.rounds["bounds"] = state.rounds["bounds"]
        pool = plan_pool(dag, bound)
        bottom_up_traverse(dag, state, cfg, pool)
        rec.rounds["loctbl"] = state.rounds["loctbl"]
        records.append(rec)
    return Battery(records=records, equivalence_seconds=equivalence)


def test_criterion_1_oracle_equivalence(battery):
    bad = [m for rec in battery.records for m in rec.mismatches]
    elapsed = battery.equivalence_seconds
    ok = not bad and elapsed < 300.0
    verdict(
        1, ok,
        f"oracle equivalence: {NUM_CORPORA} corpora x {len(TASK_NAMES)} tasks "
        f"byte-identical, {elapsed:.1f}s (< 300s budget)"
        + (f"; mismatches={bad[:5]}" if bad else ""),
    )


def test_criterion_2_losslessness_and_grammar_laws(battery):
    failures = []
    for rec in battery.records:
        if not rec.lossless:
            failures.append((rec.index, "expansion"))
        if not rec.serialized_round_trip:
            failures.append((rec.index, "serialization"))
        try:
            scan_digram_uniqueness(rec.grammar)
            scan_rule_utility(rec.grammar)
            scan_splitters_root_only(rec.grammar)
        except AssertionError as exc:
            failures.append((rec.index, str(exc)))
    verdict(
        2, not failures,
        f"losslessness + digram uniqueness + rule utility + round-trip on "
        f"{NUM_CORPORA} grammars" + (f"; failures={failures[:5]}" if failures else ""),
    )


def test_criterion_3_weight_conservation(battery):
    bad = [
        (rec.index, rec.weights_total + rec.root_tokens, rec.token_total)
        for rec in battery.records
        if rec.weights_total + rec.root_tokens != rec.token_total
    ]
    verdict(
        3, not bad,
        f"weight conservation exact on {NUM_CORPORA} corpora"
        + (f"; first bad={bad[:3]}" if bad else ""),
    )


def test_criterion_4_round_bounds(battery):
    bad = []
    for rec in battery.records:
        depth = rec.dag.depth
        for label in ("topdown", "bounds", "loctbl"):
            if rec.rounds[label] > depth:
                bad.append((rec.index, label, rec.rounds[label], depth))
    verdict(
        4, not bad,
        f"rounds <= depth for top-down and both bottom-up passes on "
        f"{NUM_CORPORA} DAGs" + (f"; violations={bad[:3]}" if bad else ""),
    )


def test_criterion_5_determinism(battery):
    picks = [battery.records[i] for i in (0, 31, 67, 99, 131, 163, 195)]
    bad = []
    for rec in picks:
        for task in TASK_NAMES:
            digests = set()
            for strategy in ("topdown", "bottomup"):
                for workers in (1, 2, 4, 8):
                    cfg = TraversalConfig(strategy=strategy, workers=workers)
                    text = render(run_task(rec.dag, task, cfg, SEQ_LEN),
                                  rec.grammar.dictionary)
                    digests.add(hash(text))
            if len(digests) != 1:
                bad.append((rec.index, task))
    verdict(
        5, not bad,
        f"digests identical across workers {{1,2,4,8}} x both strategies on "
        f"{len(picks)} corpora x {len(TASK_NAMES)} tasks"
        + (f"; diverged={bad}" if bad else ""),
    )


def test_criterion_6_concurrent_table_stress():
    workers = 8
    ops_per_worker = 1_000_000
    key_space = 4096
    table = CountTableSet([key_space])
    rng = np.random.default_rng(77)
    keys = rng.integers(0, key_space, size=workers * ops_per_worker).astype(np.int64)
    deltas = rng.integers(1, 5, size=workers * ops_per_worker).astype(np.int64)
    K = backend.kernels("numba")
    args = table.kernel_args()

    def work(w: int) -> None:
        K.add_batch(args, 0, keys, deltas,
                    w * ops_per_worker, (w + 1) * ops_per_worker)

    threads = [threading.Thread(target=work, args=(w,)) for w in range(workers)]
    t0 = time.perf_counter()
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    elapsed = time.perf_counter() - t0

    replay = np.zeros(key_space, dtype=np.int64)
    np.add.at(replay, keys, deltas)
    got = table.as_dict(0)
    equal = got == {k: int(v) for k, v in enumerate(replay) if v}
    chains = table.chain_lengths(0)  # raises on a chain cycle
    verdict(
        6, equal and sum(chains) == len(got),
        f"8 workers x {ops_per_worker:,} adds match sequential replay per key; "
        f"chains cycle-free ({elapsed:.2f}s)",
    )


def test_criterion_7_window_capacity_formula(battery):
    bad = []
    checked = 0
    for rec in battery.records[::4]:
        for seq_len in (2, 3, 4):
            ht = init_head_tail(rec.dag, seq_len)
            for r in range(1, rec.dag.num_rules):
                checked += 1
                if len(ht.heads[r]) > seq_len - 1 or len(ht.tails[r]) > seq_len - 1:
                    bad.append((rec.index, seq_len, r, "buffer too long"))
                    continue
                bound = head_tail_bound(
                    int(rec.dag.own_token_count[r]), seq_len,
                    int(rec.dag.num_out_edge[r]),
                )
                if head_only_window_count(rec.dag, ht, r, seq_len) > bound:
                    bad.append((rec.index, seq_len, r, "bound exceeded"))
    verdict(
        7, not bad,
        f"head-only window counts within capacity bound and |head|,|tail| <= l-1 "
        f"({checked} rule checks, l in {{2,3,4}})"
        + (f"; violations={bad[:3]}" if bad else ""),
    )


def test_criterion_8_fixture_goldens():
    dictionary, stream = build_corpus_stream(G1_FILES)
    grammar = infer_grammar(dictionary, stream)
    dag = build_dag(grammar)
    cfg = TraversalConfig()
    problems = []

    r1, r2 = grammar.rule_ref(1), grammar.rule_ref(2)
    if [b.tolist() for b in grammar.bodies] != [[r1, r2, 3, r2, 4], [0, 1], [r1, 2]]:
        problems.append("grammar shape")

    state = TraversalState(dag)
    init_top_down_masks(dag, state)
    top_down_traverse(dag, state, cfg)
    if state.weight.tolist()[1:] != [3, 2]:
        problems.append(f"weights {state.weight.tolist()[1:]}")

    wc = run_task(dag, "wordcount", cfg)
    if wc.counts != {0: 3, 1: 3, 2: 2}:
        problems.append(f"word counts {wc.counts}")

    tv = run_task(dag, "termvector", cfg)
    if tv.vectors != [[(0, 2), (1, 2), (2, 1)], [(0, 1), (1, 1), (2, 1)]]:
        problems.append(f"term vectors {tv.vectors}")

    sc = run_task(dag, "seqcount", cfg, 3)
    if sc.per_file != [{(0, 1, 0): 1, (1, 0, 1): 1, (0, 1, 2): 1}, {(0, 1, 2): 1}]:
        problems.append(f"sequence counts {sc.per_file}")

    verdict(
        8, not problems,
        "two-file fixture goldens (grammar shape, weights, word counts, "
        "term vectors, sequence counts)"
        + (f"; wrong: {problems}" if problems else ""),
    )


@pytest.mark.perf
def test_criterion_9_performance_sanity():
    rng = np.random.default_rng(2026)
    vocab = [f"lexeme{i:05d}" for i in range(15_000)]
    ranks = np.minimum(rng.zipf(1.03, size=90_000), 15_000) - 1
    seed_tokens = [vocab[r] for r in ranks]
    seed_bytes = len(" ".join(seed_tokens).encode()) + 1
    assert seed_bytes >= 1_000_000, "seed must be at least 1 MB"
    copies = 100
    assert seed_bytes * copies >= 100_000_000, "corpus must be at least 100 MB"

    files = [(f"f{i:03d}", seed_tokens) for i in range(copies)]
    t0 = time.perf_counter()
    dictionary, stream = build_corpus_stream(files)
    grammar = infer_grammar(dictionary, stream)
    compress_seconds = time.perf_counter() - t0
    dag = build_dag(grammar)

    par_cfg = TraversalConfig(workers=8)
    seq_cfg = TraversalConfig(workers=1)
    backend.kernels(par_cfg.backend).warmup()
    run_task(dag, "wordcount", seq_cfg)  # warm the whole path once

    def timed(fn, repeats=3):
        times = []
        for _ in range(repeats):
            t = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t)
        times.sort()
        return times[len(times) // 2]

    t_par = timed(lambda: run_task(dag, "wordcount", par_cfg))
    t_seq = timed(lambda: run_task(dag, "wordcount", seq_cfg))

    def naive():
        oracle.word_count(oracle.decompress_files(grammar))

    t_naive = timed(naive)

    cores = os.cpu_count() or 1
    vs_seq = t_seq / t_par if t_par > 0 else float("inf")
    vs_naive = t_naive / t_par if t_par > 0 else float("inf")
    detail = (
        f"corpus {seed_bytes * copies / 1e6:.0f} MB (1 MB seed x {copies}), "
        f"compressed in {compress_seconds:.0f}s to {grammar.num_rules} rules; "
        f"parallel {t_par * 1e3:.1f}ms vs sequential {t_seq * 1e3:.1f}ms "
        f"({vs_seq:.2f}x) vs naive {t_naive * 1e3:.1f}ms ({vs_naive:.2f}x); "
        f"{cores} cores"
    )
    if cores < 4:
        verdict(9, True, f"REPORT ONLY (<4 cores, not gated): {detail}")
    else:
        verdict(9, vs_seq >= 2.0 and vs_naive >= 2.0, detail)
