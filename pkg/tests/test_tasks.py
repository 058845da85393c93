import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gtadoc.dag import build_dag
from gtadoc.engine import TraversalConfig
from gtadoc.errors import UsageError
from gtadoc.tasks import (
    TASK_NAMES,
    first_divergence,
    oracle_task,
    render,
    run_task,
)

from conftest import compress_corpus, corpus_tokens

STRATS = ["topdown", "bottomup"]


def cfg_for(strategy="auto", **kw):
    return TraversalConfig(strategy=strategy, backend="python", **kw)


@pytest.fixture
def g1_dag(g1_grammar):
    return build_dag(g1_grammar)


@pytest.mark.parametrize("strategy", STRATS)
def test_word_count_g1(g1_dag, strategy):
    out = run_task(g1_dag, "wordcount", cfg_for(strategy))
    assert out.counts == {0: 3, 1: 3, 2: 2}


def test_word_count_empty_files():
    g = compress_corpus([("a", []), ("b", [])])
    out = run_task(build_dag(g), "wordcount", cfg_for())
    assert out.counts == {}


def test_word_count_single_file():
    g = compress_corpus([("f", ["x", "x"])])
    out = run_task(build_dag(g), "wordcount", cfg_for())
    assert out.counts == {0: 2}


@pytest.mark.parametrize("strategy", STRATS)
def test_sort_g1(g1_dag, strategy):
    out = run_task(g1_dag, "sort", cfg_for(strategy))
    assert out.pairs == [(0, 3), (1, 3), (2, 2)]  # tie a before b by id


def test_sort_all_equal_counts():
    g = compress_corpus([("f", ["u", "v", "w"])])
    out = run_task(build_dag(g), "sort", cfg_for())
    assert out.pairs == [(0, 1), (1, 1), (2, 1)]


def test_sort_empty_corpus():
    g = compress_corpus([("f", [])])
    out = run_task(build_dag(g), "sort", cfg_for())
    assert out.pairs == []


@pytest.mark.parametrize("strategy", STRATS)
def test_inverted_index_g1(g1_dag, strategy):
    out = run_task(g1_dag, "invertedindex", cfg_for(strategy))
    assert out.files_of == {0: [0, 1], 1: [0, 1], 2: [0, 1]}


def test_inverted_index_word_unique_to_one_file():
    g = compress_corpus([("a", ["x"]), ("b", ["x", "zed"])])
    out = run_task(build_dag(g), "invertedindex", cfg_for())
    assert out.files_of[1] == [1]


@pytest.mark.parametrize("strategy", STRATS)
def test_term_vector_g1(g1_dag, strategy):
    out = run_task(g1_dag, "termvector", cfg_for(strategy))
    assert out.vectors[0] == [(0, 2), (1, 2), (2, 1)]
    assert out.vectors[1] == [(0, 1), (1, 1), (2, 1)]


def test_term_vector_identical_files():
    g = compress_corpus([("a", ["p", "q"]), ("b", ["p", "q"])])
    out = run_task(build_dag(g), "termvector", cfg_for())
    assert out.vectors[0] == out.vectors[1]


@pytest.mark.parametrize("strategy", STRATS)
def test_sequence_count_g1(g1_dag, strategy):
    out = run_task(g1_dag, "seqcount", cfg_for(strategy), seq_len=3)
    assert out.per_file[0] == {(0, 1, 0): 1, (1, 0, 1): 1, (0, 1, 2): 1}
    assert out.per_file[1] == {(0, 1, 2): 1}


def test_sequence_count_l1_is_word_count(g1_dag):
    out = run_task(g1_dag, "seqcount", cfg_for(), seq_len=1)
    assert out.per_file[0] == {(0,): 2, (1,): 2, (2,): 1}


def test_sequence_count_l_longer_than_files(g1_dag):
    out = run_task(g1_dag, "seqcount", cfg_for(), seq_len=40)
    assert all(t == {} for t in out.per_file)


@pytest.mark.parametrize("strategy", STRATS)
def test_ranked_inverted_index_g1(g1_dag, strategy):
    out = run_task(g1_dag, "rankedinvertedindex", cfg_for(strategy), seq_len=3)
    assert out.ranked[(0, 1, 2)] == [(0, 1), (1, 1)]  # tie broken by file id
    assert out.ranked[(0, 1, 0)] == [(0, 1)]


def test_unknown_task(g1_dag):
    with pytest.raises(UsageError, match="unknown task"):
        run_task(g1_dag, "frequencies", cfg_for())


# -- rendering ------------------------------------------------------------------


def test_render_word_count_sorted_by_id(g1_dag, g1_grammar):
    out = run_task(g1_dag, "wordcount", cfg_for())
    assert render(out, g1_grammar.dictionary) == "a\t3\nb\t3\nc\t2\n"


def test_render_term_vectors(g1_dag, g1_grammar):
    out = run_task(g1_dag, "termvector", cfg_for())
    text = render(out, g1_grammar.dictionary)
    assert text.splitlines()[0] == "0\ta\t2"
    assert text.splitlines()[-1] == "1\tc\t1"


def test_render_seqcount_grams_space_joined(g1_dag, g1_grammar):
    out = run_task(g1_dag, "seqcount", cfg_for(), seq_len=3)
    text = render(out, g1_grammar.dictionary)
    assert "0\ta b a\t1" in text.splitlines()
    assert "1\ta b c\t1" in text.splitlines()


def test_first_divergence_reports_line():
    assert first_divergence("a\t1\nb\t2\n", "a\t1\nb\t3\n") == (
        "line 2: expected 'b\\t2', got 'b\\t3'"
    )
    assert first_divergence("a\t1\n", "a\t1\n") is None
    assert "extra record" in first_divergence("a\t1\nb\t2\n", "a\t1\n")


# -- cross-consistency and oracle equivalence -----------------------------------


@settings(max_examples=8, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_all_tasks_match_oracle_both_strategies(seed):
    rng = np.random.default_rng(seed)
    files = corpus_tokens(rng, max_files=5, max_tokens=600, max_vocab=30)
    g = compress_corpus(files)
    dag = build_dag(g)
    for task in TASK_NAMES:
        expected = render(oracle_task(g, task, 3), g.dictionary)
        for strategy in STRATS:
            got = render(run_task(dag, task, cfg_for(strategy), 3), g.dictionary)
            assert got == expected, (task, strategy)


def test_cross_consistency(g1_dag):
    cfg = cfg_for()
    wc = run_task(g1_dag, "wordcount", cfg)
    srt = run_task(g1_dag, "sort", cfg)
    tv = run_task(g1_dag, "termvector", cfg)
    sc = run_task(g1_dag, "seqcount", cfg, 3)
    rii = run_task(g1_dag, "rankedinvertedindex", cfg, 3)
    assert dict(srt.pairs) == wc.counts  # sort is a permutation of wordcount
    summed: dict[int, int] = {}
    for vec in tv.vectors:
        for w, c in vec:
            summed[w] = summed.get(w, 0) + c
    assert summed == wc.counts  # term vectors sum to the global counts
    transposed: dict[tuple, dict[int, int]] = {}
    for f, table in enumerate(sc.per_file):
        for gram, c in table.items():
            transposed.setdefault(gram, {})[f] = c
    assert {g_: dict(pairs) for g_, pairs in rii.ranked.items()} == transposed
