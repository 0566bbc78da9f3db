"""Backend selection for the compiled kernels.

Hot loops are written twice: a vectorised numpy version and a numba
``@njit`` version. ``SUGARSPEC_NUMBA`` picks one at import time::

    SUGARSPEC_NUMBA=0  -> pure numpy everywhere
    SUGARSPEC_NUMBA=1  -> numba kernels (default when numba is importable)
"""

from __future__ import annotations

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional speedup
    numba = None
    HAVE_NUMBA = False

_FALSE = {"0", "false", "no", "off", ""}


def _flag(name: str, default: str) -> bool:
    return os.environ.get(name, default).strip().lower() not in _FALSE


USE_NUMBA = HAVE_NUMBA and _flag("SUGARSPEC_NUMBA", "1")


def njit(func=None, **kwargs):
    """``numba.njit(cache=True)`` when numba exists, identity otherwise."""
    kwargs.setdefault("cache", True)

    def wrap(f):
        if not HAVE_NUMBA:
            return f
        return numba.njit(**kwargs)(f)

    if func is None:
        return wrap
    return wrap(func)


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"


def thread_cap() -> int:
    """Worker cap from ``SPECTRAL_THREADS`` (default 1)."""
    raw = os.environ.get("SPECTRAL_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1
