"""Kernel backend selection.

The compiled extension ``screwreg._kernels`` is used when it can be imported;
otherwise the numpy implementations in ``screwreg._fallback`` are used. Setting
``SCREWREG_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("SCREWREG_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback

bound_counts = _impl.bound_counts
merge_sorted = _impl.merge_sorted
spcr_merge = _impl.spcr_merge


def get_backend(name: str):
    """Return the kernel module for ``name`` ("cython" or "python")."""
    if name == "python":
        return _fallback
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")
