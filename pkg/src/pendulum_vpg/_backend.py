"""Selects the compiled rollout kernel, falling back to pure Python.

Set ``PENDULUM_VPG_BACKEND=python`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _fallback

if os.environ.get("PENDULUM_VPG_BACKEND", "").lower() == "python":
    kernels = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels
        BACKEND = "cython"
    except ImportError:
        kernels = _fallback
        BACKEND = "python"

__all__ = ["BACKEND", "kernels"]
