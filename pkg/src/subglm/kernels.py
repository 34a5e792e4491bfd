"""Kernel dispatch: numba-compiled hot loops with a pure-numpy fallback.

Set SUBGLM_DISABLE_NUMBA=1 to force the numpy path (or import falls back
automatically when numba is unavailable).  ``benchmarks/kernel_bench.py``
compares the two.
"""

import os

_disabled = os.environ.get("SUBGLM_DISABLE_NUMBA", "").lower() in ("1", "true", "yes")

if not _disabled:
    try:
        from ._kernels_numba import cd_lasso, warm_up

        USING_NUMBA = True
    except ImportError:
        _disabled = True

if _disabled:
    from ._kernels_numpy import cd_lasso, warm_up

    USING_NUMBA = False

__all__ = ["cd_lasso", "warm_up", "USING_NUMBA"]
