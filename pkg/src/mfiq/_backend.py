"""Select the compiled kernels when available, else the numpy fallback.

Set ``MFIQ_BACKEND=python`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _fallback

BACKEND = "python"
kernels = _fallback

if os.environ.get("MFIQ_BACKEND", "").lower() != "python":
    try:
        from . import _kernels
    except ImportError:  # extension not built
        pass
    else:
        kernels = _kernels
        BACKEND = "cython"


def use_backend(name: str):
    """Switch the active backend; returns the kernel module. For tests and benchmarks."""
    global kernels, BACKEND
    if name == "python":
        kernels, BACKEND = _fallback, "python"
    elif name == "cython":
        from . import _kernels

        kernels, BACKEND = _kernels, "cython"
    else:
        raise ValueError(f"unknown backend {name!r}")
    return kernels
