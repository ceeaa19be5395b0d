"""Kernel selection: the compiled extension when it imports, numpy otherwise."""
from __future__ import annotations

import logging

from . import _pykernels

log = logging.getLogger(__name__)

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None
    log.debug("compiled kernels unavailable; using numpy fallback")

_active = _ckernels if _ckernels is not None else _pykernels


def available() -> list[str]:
    return ["cython", "python"] if _ckernels is not None else ["python"]


def kernels():
    return _active


def name() -> str:
    return "cython" if _active is _ckernels and _ckernels is not None else "python"


def set_backend(which: str) -> None:
    """Select ``"cython"`` or ``"python"`` kernels for subsequent calls."""
    global _active
    if which == "python":
        _active = _pykernels
    elif which == "cython":
        if _ckernels is None:
            raise RuntimeError("compiled kernels are not built; reinstall the package")
        _active = _ckernels
    else:
        raise ValueError(f"unknown backend {which!r}")
