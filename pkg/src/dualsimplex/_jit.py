"""Numba switch for the hot kernels.

Kernels are written once as plain numpy-compatible Python. When numba is
importable and ``DUALSIMPLEX_DISABLE_NUMBA`` is unset (or ``0``), ``njit``
compiles them; otherwise they run as ordinary Python/numpy and the batched
numpy code paths are used instead of the compiled scalar loops.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_FLAG = os.environ.get("DUALSIMPLEX_DISABLE_NUMBA", "0").strip().lower()
NUMBA_ENABLED = numba is not None and _FLAG not in ("1", "true", "yes", "on")


def njit(fn=None, **kwargs):
    """``numba.njit(cache=True)`` when enabled, identity otherwise."""

    def wrap(f):
        if NUMBA_ENABLED:
            return numba.njit(cache=True, **kwargs)(f)
        return f

    if fn is None:
        return wrap
    return wrap(fn)


def compiled(fn, **kwargs):
    """Always compile ``fn`` (used by the benchmark regardless of the flag)."""
    if numba is None:
        raise RuntimeError("numba is not installed")
    return numba.njit(cache=True, **kwargs)(fn)
