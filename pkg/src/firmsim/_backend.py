"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
implementation. ``FIRMSIM_BACKEND=python`` forces the fallback.
"""
from __future__ import annotations

import os
from types import ModuleType

from . import _pykernels


def _load_compiled() -> ModuleType | None:
    try:
        from . import _ckernels
    except ImportError:
        return None
    return _ckernels


_compiled = _load_compiled()


def get_backend(name: str | None = None) -> ModuleType:
    """Return the kernel module for ``name`` ("cython", "python" or None for the default)."""
    if name is None:
        name = os.environ.get("FIRMSIM_BACKEND", "").strip().lower() or None
    if name is None:
        return _compiled if _compiled is not None else _pykernels
    if name == "python":
        return _pykernels
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def available_backends() -> list[str]:
    return ["python"] + (["cython"] if _compiled is not None else [])
