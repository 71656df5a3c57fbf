"""Selection between the numba-compiled kernels and the pure numpy path.

The backend is chosen once at import time from the ``SPIKESLAB_BACKEND``
environment variable (``numba`` or ``numpy``).  When numba is requested but
cannot be imported, the numpy path is used silently.
"""

import os

_requested = os.environ.get("SPIKESLAB_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(
        f"SPIKESLAB_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

try:
    if _requested != "numba":
        raise ImportError
    import numba as _numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    _numba = None
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator."""
    if HAVE_NUMBA:
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f
