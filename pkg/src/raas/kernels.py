"""Kernel backend selection.

The compiled extension is used when it imports; setting ``RAAS_PURE_PYTHON=1``
forces the pure-Python reference implementation.
"""
from __future__ import annotations

import os

from . import _pykernels

BACKEND = "python"
evaluate = _pykernels.evaluate
enumerate_best = _pykernels.enumerate_best

if os.environ.get("RAAS_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        _ckernels = None
    if _ckernels is not None:
        BACKEND = "cython"
        evaluate = _ckernels.evaluate
        enumerate_best = _ckernels.enumerate_best


def backends() -> dict:
    """All importable backends by name, for comparison tests and benchmarks."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels as ck
        out["cython"] = ck
    except ImportError:
        pass
    return out
