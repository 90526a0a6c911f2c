"""Backend selection for the hot kernels.

The compiled extension ``foliation_lab._core`` is used when importable;
otherwise (or with ``FOLIATION_LAB_PURE=1``) the numpy/scipy fallback in
``foliation_lab._fallback`` is used. ``BACKEND`` names the active one.
"""
import os

from . import _fallback

if os.environ.get("FOLIATION_LAB_PURE", "") not in ("", "0"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _core as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"

mul2 = _impl.mul2
polyval2 = _impl.polyval2
integrate_leaves = _impl.integrate_leaves

STATUS_OK = _fallback.STATUS_OK
STATUS_COLLAPSE = _fallback.STATUS_COLLAPSE
STATUS_MAX_STEPS = _fallback.STATUS_MAX_STEPS


def backends():
    """Return {name: module} for every importable backend."""
    found = {"python": _fallback}
    try:
        from . import _core
        found["compiled"] = _core
    except ImportError:
        pass
    return found
