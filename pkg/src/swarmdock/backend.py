"""Numerical backend selection.

Hot kernels are JIT-compiled with numba by default. Setting the environment
variable ``SWARMDOCK_NO_NUMBA=1`` (before import) runs the exact same code as
plain Python/numpy instead. The pure path is slow but dependency-light and is
used to cross-check that both backends produce identical floats.
"""

from __future__ import annotations

import os

_FLAG = os.environ.get("SWARMDOCK_NO_NUMBA", "").strip().lower()
_DISABLED = _FLAG in ("1", "true", "yes", "on")

NUMBA_ENABLED = False
if not _DISABLED:
    try:
        from numba import njit as _numba_njit

        NUMBA_ENABLED = True
    except ImportError:
        NUMBA_ENABLED = False


if NUMBA_ENABLED:

    def njit(*args, **kwargs):
        return _numba_njit(*args, **kwargs)

else:

    def njit(*args, **kwargs):
        # identity decorator, mirrors @njit / @njit(cache=True) usage
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn

        return wrap


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
