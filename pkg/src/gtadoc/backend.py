"""Kernel backend selection.

GTADOC_BACKEND picks the hot-loop implementation:

  auto    (default) numba kernels when importable, else the pure path
  numba   require the jitted kernels
  python  force the pure Python/numpy twins

Both backends expose the same module-level functions and produce
identical results; only throughput differs.
"""

from __future__ import annotations

import os

from .errors import UsageError

_cache: dict[str, object] = {}


def default_backend() -> str:
    return os.environ.get("GTADOC_BACKEND", "auto")


def kernels(name: str | None = None):
    """Return the kernel module for `name` (or the environment default)."""
    name = name or default_backend()
    if name not in ("auto", "numba", "python"):
        raise UsageError(f"unknown backend {name!r}")
    if name in _cache:
        return _cache[name]
    if name == "python":
        from . import _fallback as mod
    elif name == "numba":
        from . import _kernels as mod
        mod.warmup()
    else:
        try:
            from . import _kernels as mod
            mod.warmup()
        except ImportError:
            from . import _fallback as mod
    _cache[name] = mod
    return mod


def backend_label(name: str | None = None) -> str:
    mod = kernels(name)
    return "numba" if mod.__name__.endswith("_kernels") else "python"
