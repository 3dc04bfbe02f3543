"""Kernel dispatch: compiled extension when importable, numpy fallback otherwise.

Set ``XMMR_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
if os.environ.get("XMMR_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
else:
    _impl = _kernels_py

SQUARED = _kernels_py.SQUARED
HADSELL = _kernels_py.HADSELL

pair_loss_grad = _impl.pair_loss_grad
quad_loss_grad = _impl.quad_loss_grad
knn_indices = _impl.knn_indices
rank_rows = _impl.rank_rows
average_precision = _impl.average_precision
ap_rows = _impl.ap_rows
pick_partners = _impl.pick_partners
