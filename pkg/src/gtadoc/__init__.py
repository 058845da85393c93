"""Text analytics executed directly on grammar-compressed corpora.

A corpus is tokenized, numbered, and folded into a context-free grammar
whose rule graph forms a DAG; word counts, per-file tables and word
sequences are then computed by round-based traversals of that DAG,
without decompressing. See README.md for the CLI and the library tour.
"""

from .dag import Dag, build_dag
from .engine import TraversalConfig
from .errors import (
    CorruptionError,
    DivergenceError,
    FormatError,
    GtadocError,
    IngestError,
    ResourceError,
    UsageError,
)
from .grammar import Grammar, deserialize_grammar, expand, serialize_grammar
from .ingest import Dictionary, TokenizeConfig, build_corpus_stream, tokenize
from .sequitur import infer_grammar
from .table import CountTable, CountTableSet, merge_scaled, table_for
from .tasks import run_task, render

__version__ = "0.1.0"

__all__ = [
    "Dag",
    "build_dag",
    "TraversalConfig",
    "Grammar",
    "deserialize_grammar",
    "serialize_grammar",
    "expand",
    "Dictionary",
    "TokenizeConfig",
    "build_corpus_stream",
    "tokenize",
    "infer_grammar",
    "CountTable",
    "CountTableSet",
    "merge_scaled",
    "table_for",
    "run_task",
    "render",
    "GtadocError",
    "UsageError",
    "IngestError",
    "ResourceError",
    "FormatError",
    "CorruptionError",
    "DivergenceError",
    "__version__",
]
