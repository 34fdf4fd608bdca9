"""Backend selection for the numeric kernels.

Kernels are compiled with numba when it is importable and the environment
variable ``DEGDISPATCH_NUMBA`` is not set to ``0``. Otherwise the pure-numpy
implementations in :mod:`degdispatch.kernels` are used.
"""
import os

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    _HAVE_NUMBA = False

ENV_FLAG = "DEGDISPATCH_NUMBA"


def numba_requested() -> bool:
    return os.environ.get(ENV_FLAG, "1").strip().lower() not in ("0", "false", "no", "off")


USE_NUMBA = _HAVE_NUMBA and numba_requested()


def njit(*args, **kwargs):
    """``numba.njit`` with caching on; a no-op decorator without numba."""
    kwargs.setdefault("cache", True)
    if not _HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    return numba.njit(*args, **kwargs)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
