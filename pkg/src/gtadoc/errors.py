"""Exception hierarchy shared across the package.

Exit codes mirror the CLI contract: 0 ok, 1 usage, 2 I/O or resource,
3 format/corruption, 4 divergence. Exceptions raised by the libraries
carry their code so the CLI can translate uniformly.
"""

from __future__ import annotations


class GtadocError(Exception):
    exit_code = 1


class UsageError(GtadocError):
    exit_code = 1


class IngestError(GtadocError):
    """Input bytes cannot be ingested (bad encoding, unreadable file)."""

    exit_code = 2


class ResourceError(GtadocError):
    """A pre-sized buffer ran out of capacity or an arena could not be built."""

    exit_code = 2


class FormatError(GtadocError):
    """Serialized compressed data is malformed."""

    exit_code = 3


class CorruptionError(GtadocError):
    """A structural invariant of the grammar or DAG was violated."""

    exit_code = 3


class DivergenceError(GtadocError):
    """Compressed-path result disagrees with the reference computation."""

    exit_code = 4
