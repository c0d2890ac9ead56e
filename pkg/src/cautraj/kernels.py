"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the numpy
fallback is used. Setting ``CAUTRAJ_PURE_PYTHON=1`` forces the fallback.
"""
import os

import numpy as np

from . import _pykernels

_compiled = None
if os.environ.get("CAUTRAJ_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"


def get_backend(name=None):
    """Return the kernel module for ``name`` ("cython", "python") or the active one."""
    if name is None:
        name = BACKEND
    if name == "python":
        return _pykernels
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not available")
        return _compiled
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends():
    return ["python"] + (["cython"] if _compiled is not None else [])


_impl = get_backend()


def build_histogram(binned, grad, rows, n_bins):
    return _impl.build_histogram(
        np.ascontiguousarray(binned, dtype=np.uint16),
        np.ascontiguousarray(grad, dtype=np.float64),
        np.ascontiguousarray(rows, dtype=np.intp),
        int(n_bins),
    )


def apply_tree(X, feature, threshold, left, right, value):
    return _impl.apply_tree(
        np.asarray(X, dtype=np.float64),
        np.ascontiguousarray(feature, dtype=np.intp),
        np.ascontiguousarray(threshold, dtype=np.float64),
        np.ascontiguousarray(left, dtype=np.intp),
        np.ascontiguousarray(right, dtype=np.intp),
        np.ascontiguousarray(value, dtype=np.float64),
    )


def local_theta(xq, x, y_res, t_res, bandwidth):
    return _impl.local_theta(
        np.ascontiguousarray(xq, dtype=np.float64),
        np.ascontiguousarray(x, dtype=np.float64),
        np.ascontiguousarray(y_res, dtype=np.float64),
        np.ascontiguousarray(t_res, dtype=np.float64),
        float(bandwidth),
    )
