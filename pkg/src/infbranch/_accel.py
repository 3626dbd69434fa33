"""Backend switch for the numeric kernels.

Set ``INFBRANCH_NUMBA=0`` before import to force the pure-numpy path.
Any other value (or unset) uses numba when it is importable.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is an optional speedup
    numba = None

_flag = os.environ.get("INFBRANCH_NUMBA", "1").strip().lower()
USE_NUMBA = numba is not None and _flag not in ("0", "false", "no", "off")


def jit(fn):
    """Compile ``fn`` in nopython mode, or return None if numba is missing."""
    if numba is None:
        return None
    return numba.njit(cache=True)(fn)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
