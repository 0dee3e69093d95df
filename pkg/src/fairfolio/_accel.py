"""Selects between numba-compiled kernels and the pure-numpy fallbacks.

Set ``FAIRFOLIO_DISABLE_JIT=1`` to force the numpy path (useful for debugging
and for environments without numba).
"""
import os

_DISABLED = os.environ.get("FAIRFOLIO_DISABLE_JIT", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError("jit disabled by FAIRFOLIO_DISABLE_JIT")
    from numba import njit as _njit

    HAS_NUMBA = True
except ImportError:
    _njit = None
    HAS_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when available, else the identity decorator.

    Always returns something callable with the original signature, so kernels
    stay importable on the fallback path.
    """
    if HAS_NUMBA:
        kwargs.setdefault("cache", True)
        return _njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn


def backend():
    return "numba" if HAS_NUMBA else "numpy"
