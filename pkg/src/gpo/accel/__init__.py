"""Backend dispatch for the hot numeric kernels.

Two interchangeable implementations exist: numba-compiled loops
(``numba_impl``) and vectorized numpy (``numpy_impl``). The environment
variable ``GPO_BACKEND`` selects one at import time (``numba`` or
``numpy``); ``GPO_NO_NUMBA=1`` is accepted as a shorthand for the numpy
path. If numba cannot be imported the numpy path is used regardless.

Callers go through the module-level functions below, which look up the
active backend on every call so ``set_backend`` takes effect immediately.
"""

import os

import numpy as np

from . import numpy_impl

# the bundled TBB is too old for numba and only produces a warning
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

try:
    from . import numba_impl
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba_impl = None

BACKENDS = ("numba", "numpy")


def _default_backend():
    if os.environ.get("GPO_NO_NUMBA", "").lower() in ("1", "true", "yes"):
        return "numpy"
    name = os.environ.get("GPO_BACKEND", "numba").strip().lower()
    if name not in BACKENDS:
        raise ValueError(f"GPO_BACKEND must be one of {BACKENDS}, got {name!r}")
    if name == "numba" and numba_impl is None:
        return "numpy"
    return name


_active = _default_backend()


def get_backend():
    return _active


def set_backend(name):
    """Switch backend at runtime; returns the previous name."""
    global _active
    if name not in BACKENDS:
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and numba_impl is None:
        raise RuntimeError("numba is not importable")
    prev, _active = _active, name
    return prev


def _impl():
    return numba_impl if _active == "numba" else numpy_impl


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def sqdist_pair(x, y):
    return _impl().sqdist_pair(_f64(x), _f64(y))


def pairwise_sqdist(X, Y):
    return _impl().pairwise_sqdist(_f64(X), _f64(Y))


def dwt_step(x, h, g):
    return _impl().dwt_step(_f64(x), h, g)


def idwt_step(a, d, h, g):
    return _impl().idwt_step(_f64(a), _f64(d), h, g)


def sdd_step(K_rows, idx, A, V, Abar, U, noise, beta, rho, r, scale, G):
    """In-place momentum/averaging update; returns the Frobenius norm of G."""
    return _impl().sdd_step(
        _f64(K_rows), np.ascontiguousarray(idx, dtype=np.int64), A, V, Abar, U,
        float(noise), float(beta), float(rho), float(r), float(scale), G,
    )


def darcy_matvec(u, Tx, Ty):
    return _impl().darcy_matvec(_f64(u), Tx, Ty)
