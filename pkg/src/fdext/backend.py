"""Kernel backend selection.

The compiled extension is preferred when importable; otherwise the pure
Python mirror is used. Set FDEXT_BACKEND=python or FDEXT_BACKEND=compiled
to force a lane (forcing the compiled lane raises if it cannot be loaded).
"""
from __future__ import annotations

import os

_requested = os.environ.get("FDEXT_BACKEND", "").strip().lower()
if _requested not in ("", "compiled", "python"):
    raise RuntimeError(
        f"FDEXT_BACKEND must be 'compiled' or 'python', got {_requested!r}"
    )

if _requested == "python":
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        if _requested == "compiled":
            raise
        from . import _kernels_py as _impl  # type: ignore[no-redef]

BACKEND = _impl.BACKEND_NAME

SYSTEM_PHASE = _impl.SYSTEM_PHASE
SYSTEM_PROFILE = _impl.SYSTEM_PROFILE
EV_LINEAR = _impl.EV_LINEAR
EV_REGION_R = _impl.EV_REGION_R
EV_REGION_R0 = _impl.EV_REGION_R0
EV_NEAR_YZ = _impl.EV_NEAR_YZ
EV_NEAR_XYZ = _impl.EV_NEAR_XYZ
STATUS_DONE = _impl.STATUS_DONE
STATUS_TERMINAL = _impl.STATUS_TERMINAL
STATUS_UNDERFLOW = _impl.STATUS_UNDERFLOW
STATUS_STEP_CAP = _impl.STATUS_STEP_CAP

integrate_system = _impl.integrate_system


def get_backend(name: str | None = None):
    """Return a specific kernel module ('compiled' or 'python'), or the
    active one when name is None. Used by the backend-agreement tests and
    the benchmark."""
    if name is None:
        return _impl
    if name == "python":
        from . import _kernels_py
        return _kernels_py
    if name == "compiled":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")
