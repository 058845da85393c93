"""Command-line surface.

  gtadoc compress <input_dir> <output.gtdc>
  gtadoc analyze  <file.gtdc> <task> [--l N] [--strategy S] [--workers N]
                  [--chunk-factor N] [--backend B] [--out PATH]
  gtadoc verify   <input_dir> <task> [same flags]
  gtadoc bench    <input_dir> <task> [--repeat N] [same flags]

Analyze writes the task TSV to stdout (or --out) and one JSON-line run
manifest to stderr: command, inputs, task, settings, wall-clock seconds
for the initialization phase (load + DAG build) and the traversal phase
(rounds + reduce), and the sha256 digest of the output. Files are
ingested in lexicographic name order; GTADOC_WORKERS sets the --workers
default. Exit codes: 0 ok, 1 usage, 2 I/O, 3 format, 4 divergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import statistics
import sys
import time
from pathlib import Path

from . import backend
from .dag import build_dag
from .engine import TraversalConfig
from .errors import DivergenceError, GtadocError, UsageError
from .grammar import Grammar, deserialize_grammar, serialize_grammar
from .ingest import build_corpus_stream, tokenize
from .oracle import decompress_files
from .sequitur import infer_grammar
from .tasks import DEFAULT_SEQ_LEN, TASK_NAMES, first_divergence, oracle_task, render, run_task


def _default_workers() -> int:
    raw = os.environ.get("GTADOC_WORKERS")
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"GTADOC_WORKERS must be an integer, got {raw!r}")


def _add_engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--l", type=int, default=DEFAULT_SEQ_LEN,
                   help="sequence length for gram tasks (default 3)")
    p.add_argument("--strategy", choices=["auto", "topdown", "bottomup"],
                   default="auto")
    p.add_argument("--workers", type=int, default=None,
                   help="worker threads (default: GTADOC_WORKERS or 1)")
    p.add_argument("--chunk-factor", type=int, default=16)
    p.add_argument("--backend", choices=["auto", "numba", "python"], default=None)


def _cfg(args) -> TraversalConfig:
    workers = args.workers if args.workers is not None else _default_workers()
    return TraversalConfig(
        strategy=args.strategy,
        workers=workers,
        chunk_factor=args.chunk_factor,
        backend=args.backend,
    )


def _ingest_dir(input_dir: str) -> Grammar:
    root = Path(input_dir)
    if not root.is_dir():
        raise UsageError(f"{input_dir}: not a directory")
    names = sorted(p.name for p in root.iterdir() if p.is_file())
    if not names:
        raise UsageError(f"{input_dir}: contains no regular files")
    files = []
    for name in names:
        raw = (root / name).read_bytes()
        files.append((name, tokenize(raw, name=name)))
    dictionary, stream = build_corpus_stream(files)
    return infer_grammar(dictionary, stream)


def _load_grammar(path: str) -> Grammar:
    return deserialize_grammar(Path(path).read_bytes())


def cmd_compress(args) -> int:
    root = Path(args.input_dir)
    grammar = _ingest_dir(args.input_dir)
    blob = serialize_grammar(grammar)
    Path(args.output).write_bytes(blob)
    raw_bytes = sum(p.stat().st_size for p in root.iterdir() if p.is_file())
    ratio = raw_bytes / len(blob) if len(blob) else float("inf")
    print(f"files\t{grammar.dictionary.num_splitters}")
    print(f"rules\t{grammar.num_rules}")
    print(f"vocabulary\t{grammar.dictionary.num_words}")
    print(f"ratio\t{ratio:.3f}")
    return 0


def _timed_task(grammar: Grammar, task: str, cfg: TraversalConfig, seq_len: int):
    t0 = time.perf_counter()
    dag = build_dag(grammar)
    t1 = time.perf_counter()
    output = run_task(dag, task, cfg, seq_len)
    t2 = time.perf_counter()
    text = render(output, grammar.dictionary)
    return text, t1 - t0, t2 - t1


def cmd_analyze(args) -> int:
    grammar = _load_grammar(args.gtdc)
    cfg = _cfg(args)
    text, t_init, t_traverse = _timed_task(grammar, args.task, cfg, args.l)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    manifest = {
        "command": "analyze",
        "inputs": [args.gtdc],
        "task": args.task,
        "l": args.l,
        "strategy": args.strategy,
        "workers": cfg.workers,
        "chunkFactor": cfg.chunk_factor,
        "backend": backend.backend_label(cfg.backend),
        "timings": {"initialization": t_init, "traversal": t_traverse},
        "outputDigest": hashlib.sha256(text.encode()).hexdigest(),
    }
    print(json.dumps(manifest), file=sys.stderr)
    return 0


def cmd_verify(args) -> int:
    grammar = _ingest_dir(args.input_dir)
    cfg = _cfg(args)
    dag = build_dag(grammar)
    got = render(run_task(dag, args.task, cfg, args.l), grammar.dictionary)
    expected = render(oracle_task(grammar, args.task, args.l), grammar.dictionary)
    if got != expected:
        where = first_divergence(expected, got)
        raise DivergenceError(f"{args.task}: compressed path diverges: {where}")
    print(f"{args.task}\tok\t{hashlib.sha256(got.encode()).hexdigest()}")
    return 0


def cmd_bench(args) -> int:
    grammar = _ingest_dir(args.input_dir)
    cfg = _cfg(args)
    seq = TraversalConfig(strategy=cfg.strategy, workers=1,
                          chunk_factor=cfg.chunk_factor, backend=cfg.backend)
    repeat = max(1, args.repeat)

    _timed_task(grammar, args.task, cfg, args.l)  # warm kernels and caches
    par_runs = []
    for _ in range(repeat):
        _, t_init, t_trav = _timed_task(grammar, args.task, cfg, args.l)
        par_runs.append((t_init + t_trav, t_init, t_trav))
    seq_total = []
    for _ in range(repeat):
        _, t_init, t_trav = _timed_task(grammar, args.task, seq, args.l)
        seq_total.append(t_init + t_trav)
    naive_total = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        files = decompress_files(grammar)
        render(oracle_task(grammar, args.task, args.l, files), grammar.dictionary)
        naive_total.append(time.perf_counter() - t0)
        del files

    med = statistics.median
    # Report the phases of the median-total run so the split sums exactly.
    par_runs.sort()
    par_total, par_init, par_trav = par_runs[len(par_runs) // 2]
    rows = [
        ("parallel-compressed", par_total),
        ("sequential-compressed", med(seq_total)),
        ("decompress-naive", med(naive_total)),
    ]
    print(f"# task={args.task} repeat={repeat} workers={cfg.workers} "
          f"backend={backend.backend_label(cfg.backend)} cores={os.cpu_count()}")
    print(f"# phases (median parallel run): initialization={par_init:.6f}s "
          f"traversal={par_trav:.6f}s")
    for name, t in rows:
        print(f"{name}\t{t:.6f}")
    base = rows[0][1]
    if base > 0:
        print(f"speedup-vs-sequential\t{rows[1][1] / base:.2f}")
        print(f"speedup-vs-naive\t{rows[2][1] / base:.2f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gtadoc",
        description="Corpus analytics executed directly on grammar-compressed text.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compress", help="compress a directory of text files")
    p.add_argument("input_dir")
    p.add_argument("output")
    p.set_defaults(fn=cmd_compress)

    p = sub.add_parser("analyze", help="run a task on a compressed file")
    p.add_argument("gtdc")
    p.add_argument("task", choices=TASK_NAMES)
    _add_engine_flags(p)
    p.add_argument("--out", default=None, help="write the TSV here instead of stdout")
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("verify", help="compare compressed-path output with the naive path")
    p.add_argument("input_dir")
    p.add_argument("task", choices=TASK_NAMES)
    _add_engine_flags(p)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("bench", help="time compressed vs naive execution")
    p.add_argument("input_dir")
    p.add_argument("task", choices=TASK_NAMES)
    _add_engine_flags(p)
    p.add_argument("--repeat", type=int, default=3)
    p.set_defaults(fn=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except GtadocError as exc:
        print(f"gtadoc: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"gtadoc: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
