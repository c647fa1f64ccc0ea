"""Kernel selection: compiled extension when available, numpy fallback otherwise.

Set NOMA_COC_PURE=1 to force the pure-Python kernels (used by the benchmark
and by tests that pin the two implementations against each other).
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _kernels_py

_compiled: ModuleType | None
try:
    from . import _kernels as _compiled  # type: ignore[attr-defined]
except ImportError:
    _compiled = None


def get_kernels(which: str = "auto") -> ModuleType:
    """Return the kernel module: 'auto', 'pure', or 'compiled'."""
    if which == "pure":
        return _kernels_py
    if which == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not built; install with setup.py")
        return _compiled
    if os.environ.get("NOMA_COC_PURE") == "1" or _compiled is None:
        return _kernels_py
    return _compiled


def active_kernel_name() -> str:
    return "pure" if get_kernels() is _kernels_py else "compiled"
