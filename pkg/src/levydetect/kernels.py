"""Kernel backend selection.

The compiled extension (Cython) is preferred when present; the numpy
implementation is the fallback and the reference semantics. Selection happens
once at import. Set LEVYDETECT_KERNELS=python (or =compiled) to force a
backend; forcing the compiled backend when it is missing raises ImportError.
"""

from __future__ import annotations

import os

from . import _scan_py

_choice = os.environ.get("LEVYDETECT_KERNELS", "auto").strip().lower()

if _choice in ("auto", "", "compiled", "c"):
    try:
        from . import _scan as _impl
        BACKEND = "compiled"
    except ImportError:
        if _choice in ("compiled", "c"):
            raise
        _impl = _scan_py
        BACKEND = "python"
elif _choice in ("python", "py", "numpy"):
    _impl = _scan_py
    BACKEND = "python"
else:
    raise ValueError(f"unknown LEVYDETECT_KERNELS value {_choice!r}")

cusum_scan = _impl.cusum_scan
sr_scan = _impl.sr_scan
lb_cusum_scan = _impl.lb_cusum_scan
lb_until_scan = _impl.lb_until_scan


def backend() -> str:
    """Name of the active kernel backend ('compiled' or 'python')."""
    return BACKEND
