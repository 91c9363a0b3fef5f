"""Backend selection for the compiled kernels.

Set ``MARTSTAB_DISABLE_NUMBA=1`` (or numba's own ``NUMBA_DISABLE_JIT=1``)
to route every kernel through its pure-numpy implementation.
"""
import os

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn


DISABLE_FLAG = "MARTSTAB_DISABLE_NUMBA"

_TRUTHY = {"1", "true", "yes", "on"}


def numba_disabled():
    for key in (DISABLE_FLAG, "NUMBA_DISABLE_JIT"):
        if os.environ.get(key, "").strip().lower() in _TRUTHY:
            return True
    return False


def resolve_backend(backend=None):
    """Return ``"numba"`` or ``"numpy"``.

    An explicit argument wins; otherwise the environment decides.
    """
    if backend is not None:
        if backend not in ("numba", "numpy"):
            raise ValueError(f"unknown backend {backend!r}")
        if backend == "numba" and not HAVE_NUMBA:
            raise RuntimeError("numba backend requested but numba is not importable")
        return backend
    if HAVE_NUMBA and not numba_disabled():
        return "numba"
    return "numpy"
