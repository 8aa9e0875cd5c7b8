"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the pure-Python
implementation.  Set ``SOLVLIN_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

if os.environ.get("SOLVLIN_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _kernels_py

BACKEND = "cython" if _impl is not _kernels_py else "python"

nf_flow = _impl.nf_flow
flow_batch = _impl.flow_batch
rk4_piecewise = _impl.rk4_piecewise
# Array evaluation at many times is numpy-vectorized in either case.
nf_flow_vec = _kernels_py.nf_flow_vec
SING_TOL = _kernels_py.SING_TOL

__all__ = ["BACKEND", "nf_flow", "nf_flow_vec", "flow_batch", "rk4_piecewise", "SING_TOL"]
