"""Solver kernel backends.

The compiled extension (``_fastpath``, built from Cython) is preferred;
the pure NumPy module is the fallback when the extension is missing or
when ``RESQUE_BACKEND=python`` is set in the environment. Both expose
the same three functions with identical semantics.
"""

import os

from . import numpy_impl

if os.environ.get("RESQUE_BACKEND", "").lower() in ("python", "numpy", "pure"):
    _impl = numpy_impl
else:
    try:
        from . import _fastpath as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = numpy_impl

BACKEND: str = _impl.BACKEND
lasso_pg = _impl.lasso_pg
qr_admm = _impl.qr_admm
cqr_fused_admm = _impl.cqr_fused_admm

__all__ = ["BACKEND", "lasso_pg", "qr_admm", "cqr_fused_admm", "numpy_impl"]
