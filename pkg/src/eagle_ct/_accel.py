"""Backend selection for the hot tomography kernels.

Set ``EAGLE_CT_PURE_NUMPY=1`` to bypass numba and run the vectorized numpy
kernels instead. ``EAGLE_THREADS`` caps numba's thread pool (0 or unset means
numba's own default).
"""
import os
import warnings

_FALSY = {"", "0", "false", "no", "off"}


def _flag(name):
    return os.environ.get(name, "").strip().lower() not in _FALSY


# numba probes for TBB on every parallel launch; an old system TBB only
# produces noise, the omp/workqueue layers are used instead
warnings.filterwarnings("ignore", message=".*TBB threading layer.*")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not _flag("EAGLE_CT_PURE_NUMPY")


def thread_cap():
    raw = os.environ.get("EAGLE_THREADS", "").strip()
    if not raw:
        return 0
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"EAGLE_THREADS must be an integer, got {raw!r}") from None
    if value < 0:
        raise ValueError(f"EAGLE_THREADS must be >= 0, got {value}")
    return value


def apply_thread_cap():
    cap = thread_cap()
    if USE_NUMBA and cap > 0:
        numba.set_num_threads(min(cap, numba.config.NUMBA_NUM_THREADS))


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator."""
    kwargs.setdefault("cache", True)
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)
    if args and callable(args[0]):
        return args[0]
    return lambda fn: fn


if HAVE_NUMBA:
    prange = numba.prange
else:  # pragma: no cover
    prange = range
