"""Optional numba acceleration.

Set ``OLC_SIM_DISABLE_NUMBA=1`` to force the pure-numpy code paths even when
numba is installed.
"""

import logging
import os

_DISABLED = os.environ.get("OLC_SIM_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError
    import numba

    logging.getLogger("numba").setLevel(logging.WARNING)
    HAS_NUMBA = True
except ImportError:
    numba = None
    HAS_NUMBA = False


def njit(func):
    """Compile ``func`` with numba when available, otherwise return it unchanged."""
    if not HAS_NUMBA:
        return func
    return numba.njit(cache=True)(func)
