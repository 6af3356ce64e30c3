"""Hot numeric kernels with a numba backend and a pure-numpy fallback.

The backend is chosen once at import time from the ``WVASIM_BACKEND``
environment variable (``numba`` or ``numpy``). When unset, numba is used if
it imports cleanly. Random number generation never lives here, so frames are
bit-identical under either backend.
"""

import importlib
import os

from . import _numpy

__all__ = ["BACKEND", "available_backends", "get_backend",
           "dft_xcorr", "spline_loglik", "shift_bilinear", "fisher_sum"]


def available_backends():
    names = ["numpy"]
    try:
        importlib.import_module("numba")
    except ImportError:
        return names
    return ["numba"] + names


def get_backend(name):
    if name == "numpy":
        return _numpy
    if name == "numba":
        return importlib.import_module(f"{__name__}._numba")
    raise ValueError(f"unknown kernel backend {name!r}; expected 'numba' or 'numpy'")


def _select():
    requested = os.environ.get("WVASIM_BACKEND", "").strip().lower()
    if requested:
        return requested
    return available_backends()[0]


BACKEND = _select()
_impl = get_backend(BACKEND)

dft_xcorr = _impl.dft_xcorr
spline_loglik = _impl.spline_loglik
shift_bilinear = _impl.shift_bilinear
fisher_sum = _impl.fisher_sum
