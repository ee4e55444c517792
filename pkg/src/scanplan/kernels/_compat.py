"""Numba availability shim and backend selection.

The hot kernels ship in two flavors: numba @njit loops and pure-numpy
fallbacks. Selection happens once at import time:

  * default: numba when importable, numpy otherwise
  * SCANPLAN_BACKEND=numpy forces the fallback path
  * SCANPLAN_BACKEND=numba insists on numba (raises if unavailable)

Both flavors are kept bit-for-bit equivalent; tests assert parity.
"""

import os
import warnings

try:
    from numba import njit, prange

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only on numba-less installs
    HAS_NUMBA = False
    prange = range

    def njit(*args, **kwargs):
        """No-op stand-in so @njit modules still import without numba."""
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


def _select_backend():
    requested = os.environ.get("SCANPLAN_BACKEND", "").strip().lower()
    if requested in ("", "auto"):
        return "numba" if HAS_NUMBA else "numpy"
    if requested == "numpy":
        return "numpy"
    if requested == "numba":
        if not HAS_NUMBA:
            raise ImportError("SCANPLAN_BACKEND=numba but numba is not installed")
        return "numba"
    warnings.warn(
        f"unknown SCANPLAN_BACKEND={requested!r}; falling back to auto selection",
        RuntimeWarning,
    )
    return "numba" if HAS_NUMBA else "numpy"


BACKEND = _select_backend()
USE_NUMBA = BACKEND == "numba"
