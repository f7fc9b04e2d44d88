"""Numba switch for the hot kernels.

Every kernel in this package exists twice: a loop version compiled with
``numba.njit`` and a vectorised numpy version. The numba path is used when
numba imports cleanly and ``L96EMU_DISABLE_NUMBA`` is unset (or ``0``).
"""
import os
import warnings

_FLAG = os.environ.get("L96EMU_DISABLE_NUMBA", "0").strip().lower()
_DISABLED = _FLAG not in ("", "0", "false", "no", "off")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    numba = None
    if not _DISABLED:
        warnings.warn("numba not importable, using numpy kernels", RuntimeWarning)

USE_NUMBA = numba is not None and not _DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` with caching, or a no-op decorator when numba is absent."""
    kwargs.setdefault("cache", True)
    if numba is None:
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn
    return numba.njit(*args, **kwargs)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
