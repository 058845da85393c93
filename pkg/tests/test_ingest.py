import pytest

from gtadoc.errors import IngestError, UsageError
from gtadoc.ingest import Dictionary, TokenizeConfig, build_corpus_stream, tokenize


def test_tokenize_whitespace_runs():
    assert tokenize(b"a b  a\nb c") == ["a", "b", "a", "b", "c"]


def test_tokenize_empty():
    assert tokenize(b"") == []


def test_tokenize_keeps_punctuation():
    assert tokenize(b"a,b") == ["a,b"]


def test_tokenize_mixed_whitespace():
    assert tokenize(b"\t one\r\n two \f three ") == ["one", "two", "three"]


def test_tokenize_invalid_utf8_names_offset():
    with pytest.raises(IngestError, match=r"bad\.txt: invalid UTF-8 at byte offset 3"):
        tokenize(b"ok \xff\xfe", name="bad.txt")


def test_tokenize_rejects_unknown_mode():
    with pytest.raises(UsageError):
        tokenize(b"x", TokenizeConfig(mode="bytes"))


def test_build_corpus_stream_g1():
    dictionary, stream = build_corpus_stream(
        [("A", "a b a b c".split()), ("B", "a b c".split())]
    )
    assert dictionary.words == ["a", "b", "c"]
    assert dictionary.num_splitters == 2
    assert dictionary.splitter_id(0) == 3
    assert dictionary.splitter_id(1) == 4
    assert stream.tolist() == [0, 1, 0, 1, 2, 3, 0, 1, 2, 4]


def test_build_corpus_stream_single_file():
    dictionary, stream = build_corpus_stream([("x", ["x"])])
    assert dictionary.words == ["x"]
    assert stream.tolist() == [0, 1]


def test_build_corpus_stream_identical_files_distinct_splitters():
    _, stream = build_corpus_stream([("f1", ["w"]), ("f2", ["w"])])
    assert stream.tolist() == [0, 1, 0, 2]


def test_build_corpus_stream_empty_corpus():
    with pytest.raises(UsageError):
        build_corpus_stream([])


def test_build_corpus_stream_duplicate_names():
    with pytest.raises(UsageError):
        build_corpus_stream([("a", []), ("a", [])])


def test_dictionary_classification_ranges():
    d = Dictionary(words=["x", "y"], num_splitters=1)
    assert d.is_word(0) and d.is_word(1)
    assert not d.is_word(2)
    assert d.is_splitter(2)
    assert not d.is_splitter(3)
    assert d.num_terminals == 3


def test_first_appearance_numbering():
    dictionary, _ = build_corpus_stream([("f", "z a z b a".split())])
    assert dictionary.words == ["z", "a", "b"]
    assert dictionary.word_id("b") == 2
