"""Kernel selection: compiled extension when importable, numpy fallback otherwise.

Set ``ALGOCONCEPTS_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _pykernels

BACKEND = "python"

if os.environ.get("ALGOCONCEPTS_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl  # type: ignore[attr-defined]
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

pack_rows = _impl.pack_rows
match_labels = _impl.match_labels
first_fitting_rule = _impl.first_fitting_rule

__all__ = ["BACKEND", "pack_rows", "match_labels", "first_fitting_rule"]
