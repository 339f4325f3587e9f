"""Backend selection for the hot loops.

The compiled ``_ckernels`` module is used when it imports; otherwise the
pure-Python ``_pykernels`` module. Set ``ROUGHFOU_PURE_PYTHON=1`` to force
the fallback.
"""
import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if not os.environ.get("ROUGHFOU_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:  # extension not built
        pass


def get_backend(name=None):
    """Return the kernel module for ``name`` ("cython", "python" or None for the active one)."""
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


def euler_path(gamma, x0, noise, h, backend=None):
    k = get_backend(backend)
    return k.euler_path(np.ascontiguousarray(gamma, dtype=float),
                        np.ascontiguousarray(x0, dtype=float),
                        np.ascontiguousarray(noise, dtype=float), float(h))


def pvar_level1(xa, xb, q, backend=None):
    k = get_backend(backend)
    return float(k.pvar_level1(np.ascontiguousarray(xa, dtype=float),
                               np.ascontiguousarray(xb, dtype=float), float(q)))


def pvar_level2(xa, ra, xb, rb, q, backend=None):
    k = get_backend(backend)
    return float(k.pvar_level2(np.ascontiguousarray(xa, dtype=float),
                               np.ascontiguousarray(ra, dtype=float),
                               np.ascontiguousarray(xb, dtype=float),
                               np.ascontiguousarray(rb, dtype=float), float(q)))
