"""Backend selection for the hot kernels.

Set ``MECHLAB_NUMBA=0`` to force the pure-numpy path. When numba is missing
the numpy path is used regardless of the flag.
"""

import os

try:
    import numba as _numba
except ImportError:  # pragma: no cover - exercised only without numba
    _numba = None


def _flag_enabled(value):
    return value.strip().lower() not in ("0", "false", "no", "off", "")


NUMBA_AVAILABLE = _numba is not None
USE_NUMBA = NUMBA_AVAILABLE and _flag_enabled(os.environ.get("MECHLAB_NUMBA", "1"))


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if _numba is None:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn
    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    return _numba.njit(*args, **kwargs)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
