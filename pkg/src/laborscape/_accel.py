"""Backend selection for the numeric kernels.

Set ``LABORSCAPE_NUMBA=0`` to force the pure-numpy path. Any other value
(or leaving it unset) uses numba when it imports cleanly.
"""
import os

_flag = os.environ.get("LABORSCAPE_NUMBA", "1").strip().lower()
_want_numba = _flag not in ("0", "false", "no", "off")

try:
    if not _want_numba:
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(func):
            return func

        return decorator


BACKEND = "numba" if HAVE_NUMBA else "numpy"
