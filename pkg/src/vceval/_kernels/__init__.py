"""Hot-kernel backend selection.

Prefers the compiled Cython core and falls back to the numpy
implementation when it is not built. ``VC_EVAL_KERNELS`` overrides:
``compiled`` (fail hard if missing), ``python``, or ``auto`` (default).
"""

import os

from . import _fallback

_choice = os.environ.get("VC_EVAL_KERNELS", "auto")
if _choice not in ("auto", "compiled", "python"):
    raise ImportError(f"VC_EVAL_KERNELS must be auto|compiled|python, got {_choice!r}")

if _choice == "python":
    _impl = _fallback
else:
    try:
        from . import _core as _impl
    except ImportError:
        if _choice == "compiled":
            raise
        _impl = _fallback

BACKEND = _impl.BACKEND
iou_matrix = _impl.iou_matrix
nms_keep = _impl.nms_keep
decode_grid = _impl.decode_grid


def backend_name() -> str:
    """Active backend: ``compiled`` or ``python``."""
    return BACKEND
