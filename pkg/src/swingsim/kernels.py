"""Backend selection for the numerical kernels.

The compiled extension ``_ckernels`` is used when it imports; otherwise the
pure-Python ``_pykernels`` is used.  Set ``SWINGSIM_PURE_PYTHON=1`` to force
the fallback.
"""
import os

from . import _pykernels


def _load():
    if os.environ.get("SWINGSIM_PURE_PYTHON", "") not in ("", "0"):
        return _pykernels, "python"
    try:
        from . import _ckernels
    except ImportError:
        return _pykernels, "python"
    return _ckernels, "cython"


impl, BACKEND = _load()


def available_backends():
    """Mapping of backend name to module, for tests and benchmarks."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
        out["cython"] = _ckernels
    except ImportError:
        pass
    return out


def rk4_linear_segment(*args):
    return impl.rk4_linear_segment(*args)


def rk4_lagged_segment(*args):
    return impl.rk4_lagged_segment(*args)


def grid_exhaustive(*args):
    return impl.grid_exhaustive(*args)
