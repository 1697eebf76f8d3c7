"""Backend selection for the hot kernels.

``DEEPGRAPH_NUMBA=0`` forces the pure-numpy path even when numba is
importable. ``DEEPGRAPH_THREADS`` caps BLAS and numba thread pools.
"""

import os

try:
    import numba
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn


def _env_flag(name, default):
    raw = os.environ.get(name)
    if raw is None:
        return default
    return raw.strip().lower() not in ("0", "false", "no", "off", "")


USE_NUMBA = HAVE_NUMBA and _env_flag("DEEPGRAPH_NUMBA", True)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"


def set_backend(use_numba):
    """Switch backend at runtime (benchmarks and tests)."""
    global USE_NUMBA
    if use_numba and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    USE_NUMBA = bool(use_numba)


def apply_thread_cap():
    """Honour DEEPGRAPH_THREADS for BLAS and numba; returns the cap or None."""
    raw = os.environ.get("DEEPGRAPH_THREADS")
    if not raw:
        return None
    cap = max(1, int(raw))
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(limits=cap)
    except ImportError:  # pragma: no cover
        pass
    if HAVE_NUMBA:
        numba.set_num_threads(min(cap, numba.config.NUMBA_NUM_THREADS))
    return cap
