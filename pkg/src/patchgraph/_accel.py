"""Numba switch.

Hot kernels are written once as plain loops and compiled with ``numba.njit``
when numba is importable and ``PATCHGRAPH_DISABLE_NUMBA`` is unset (or "0").
Otherwise the numpy implementations in :mod:`patchgraph.kernels` are used.
"""
import os

_flag = os.environ.get("PATCHGRAPH_DISABLE_NUMBA", "0").strip().lower()
DISABLED = _flag not in ("", "0", "false", "no")

try:
    if DISABLED:
        raise ImportError
    import numba
except ImportError:
    numba = None

HAVE_NUMBA = numba is not None


def njit(func=None, **options):
    """``numba.njit`` with on-disk caching, or the identity without numba."""
    options.setdefault("cache", True)

    def wrap(f):
        if numba is None:
            return f
        return numba.njit(**options)(f)

    if func is None:
        return wrap
    return wrap(func)
