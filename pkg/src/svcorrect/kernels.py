"""Backend selection for the DTW hot loop.

The Cython extension is used when it was built; otherwise, or when the
environment variable ``SVCORRECT_PURE_PYTHON`` is set to a non-empty value,
the numpy implementation is used. Both produce identical arrays.
"""
import os

from . import _pykernels

BACKEND = "python"
accumulate = _pykernels.accumulate
backtrack = _pykernels.backtrack

if not os.environ.get("SVCORRECT_PURE_PYTHON"):
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "cython"
        accumulate = _ckernels.accumulate
        backtrack = _ckernels.backtrack


def backends():
    """Return ``{name: (accumulate, backtrack)}`` for every available backend."""
    out = {"python": (_pykernels.accumulate, _pykernels.backtrack)}
    try:
        from . import _ckernels
    except ImportError:
        return out
    out["cython"] = (_ckernels.accumulate, _ckernels.backtrack)
    return out
