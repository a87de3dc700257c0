"""Kernel selection: compiled extension when available, Python otherwise.

Set ``LEXSWAP_PURE_PYTHON=1`` to force the fallback.
"""

import os

from lexswap import _pykernels

BACKEND = "python"

if os.environ.get("LEXSWAP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from lexswap import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
else:
    _impl = _pykernels

levenshtein = _impl.levenshtein
wordpiece_word = _impl.wordpiece_word

__all__ = ["BACKEND", "levenshtein", "wordpiece_word"]
