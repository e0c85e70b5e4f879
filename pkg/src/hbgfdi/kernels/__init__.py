"""Numeric kernels with a compiled backend and a pure-Python fallback.

Set ``HBGFDI_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _tanks_py

if os.environ.get("HBGFDI_PURE_PYTHON"):
    _impl = _tanks_py
else:
    try:
        from . import _tanks_cy as _impl
    except ImportError:
        _impl = _tanks_py

BACKEND = "python" if _impl is _tanks_py else "cython"
integrate_tanks = _impl.integrate_tanks
persistence_mask = _impl.persistence_mask

__all__ = ["BACKEND", "integrate_tanks", "persistence_mask"]
