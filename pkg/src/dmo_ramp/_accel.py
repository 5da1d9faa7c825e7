"""Optional numba acceleration.

Set ``DMO_RAMP_DISABLE_NUMBA=1`` to force the pure-numpy kernels, e.g. when
debugging or on platforms without a working LLVM toolchain.
"""
import os

_FLAG = os.environ.get("DMO_RAMP_DISABLE_NUMBA", "").strip().lower()

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and _FLAG not in ("1", "true", "yes", "on")


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if HAS_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda func: func
