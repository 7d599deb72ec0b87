"""Backend selection for the per-edge hot loop.

The compiled extension is used when it imports; set ``ASYAFF_PURE_PYTHON=1``
to force the numpy fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("ASYAFF_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._ext import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

affinity_loss_grad = _impl.affinity_loss_grad
affinity_loss = _impl.affinity_loss
