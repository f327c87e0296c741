"""Kernel backend selection.

The compiled extension is used when it was built; otherwise (or when
``PAS4D_PURE_PYTHON`` is set to a non-empty value other than ``0``) the numpy
fallback is used.  Both produce the same values up to float rounding.
"""

import os

from . import _pykernels

_force_py = os.environ.get("PAS4D_PURE_PYTHON", "") not in ("", "0")

try:
    if _force_py:
        raise ImportError
    from ._ckernels import bit_metrics, tuple_logsumexp

    BACKEND = "cython"
except ImportError:
    tuple_logsumexp = _pykernels.tuple_logsumexp
    bit_metrics = _pykernels.bit_metrics
    BACKEND = "python"

py_tuple_logsumexp = _pykernels.tuple_logsumexp
py_bit_metrics = _pykernels.bit_metrics

__all__ = ["BACKEND", "bit_metrics", "tuple_logsumexp", "py_bit_metrics", "py_tuple_logsumexp"]
