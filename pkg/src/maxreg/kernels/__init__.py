"""Inner-loop kernels with a numba path and a pure-numpy fallback.

The backend is chosen once at import time from ``MAXREG_BACKEND``
(``numba`` or ``numpy``); numba is used when importable unless the flag says
otherwise.
"""

from __future__ import annotations

import os

import numpy as np

from maxreg.kernels import _numpy

_requested = os.environ.get("MAXREG_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"MAXREG_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

if _requested == "numba":
    try:
        from maxreg.kernels import _numba as _impl

        BACKEND = "numba"
    except ImportError:  # pragma: no cover - numba is a declared dependency
        _impl = _numpy
        BACKEND = "numpy"
else:
    _impl = _numpy
    BACKEND = "numpy"


def _common(*arrays):
    dt = np.result_type(*arrays)
    return [np.ascontiguousarray(a, dtype=dt) for a in arrays]


def kernel_accumulate(d, r, w, Z, impl=None):
    impl = impl or _impl
    d, Z = _common(d, Z)
    return impl.kernel_accumulate(d, np.asarray(r, float), np.asarray(w, float), Z)


def affine_accumulate(d, r, w, dth, jl, lam, P, impl=None):
    impl = impl or _impl
    d, P = _common(d, P)
    return impl.affine_accumulate(
        d,
        np.asarray(r, float),
        np.asarray(w, float),
        np.ascontiguousarray(dth, float),
        np.asarray(jl, np.int64),
        np.asarray(lam, float),
        P,
    )


def duhamel_accumulate(d, tk, tn, C, impl=None):
    impl = impl or _impl
    d, C = _common(d, C)
    return impl.duhamel_accumulate(d, float(tk), np.asarray(tn, float), C)


def linear_duhamel_accumulate(d, tk, tn, F, impl=None):
    impl = impl or _impl
    d, F = _common(d, F)
    return impl.linear_duhamel_accumulate(d, float(tk), np.asarray(tn, float), F)


def assemble_1d(x, xi, wq, coef, kind, impl=None):
    impl = impl or _impl
    return impl.assemble_1d(
        np.asarray(x, float),
        np.asarray(xi, float),
        np.asarray(wq, float),
        np.ascontiguousarray(coef, float),
        int(kind),
    )


__all__ = [
    "BACKEND",
    "affine_accumulate",
    "assemble_1d",
    "duhamel_accumulate",
    "kernel_accumulate",
    "linear_duhamel_accumulate",
]
