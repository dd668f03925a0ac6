"""Hot-loop dispatch: compiled extension when importable, else pure Python.

Set ``TANDEMTOI_PURE_PYTHON=1`` to force the fallback.
"""
import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("TANDEMTOI_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        pass


def fifo_departures(arrivals, services):
    return _impl.fifo_departures(
        np.ascontiguousarray(arrivals, dtype=np.float64),
        np.ascontiguousarray(services, dtype=np.float64),
    )


def ar1_filter(rho, innov, x0):
    return _impl.ar1_filter(
        np.ascontiguousarray(rho, dtype=np.float64),
        np.ascontiguousarray(innov, dtype=np.float64),
        float(x0),
    )
