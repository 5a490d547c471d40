"""Pick the compiled kernels when available, else the NumPy fallback."""

from __future__ import annotations

import os

from . import _pykernels


def _load():
    if os.environ.get("SLASSO_PURE_PYTHON", "0") not in ("", "0"):
        return _pykernels, "python"
    try:
        from . import _kernels
    except ImportError:
        return _pykernels, "python"
    return _kernels, "cython"


kernels, BACKEND = _load()


def available_backends() -> dict:
    """Map backend name to kernel module, for tests and benchmarks."""
    found = {"python": _pykernels}
    try:
        from . import _kernels

        found["cython"] = _kernels
    except ImportError:
        pass
    return found
