"""Kernel backend selection.

The numeric kernels exist twice: ``egt._ckern`` (Cython) and ``egt._pykern``
(pure Python, same semantics). The compiled module is preferred when it
imports; set ``EGT_BACKEND=python`` or ``EGT_BACKEND=compiled`` to force a
side. Selection happens once, at import.
"""

import os
import warnings

_requested = os.environ.get("EGT_BACKEND", "").strip().lower()

if _requested in ("python", "pure", "py"):
    from . import _pykern as kern

    BACKEND = "python"
elif _requested in ("", "compiled", "c"):
    try:
        from . import _ckern as kern

        BACKEND = "compiled"
    except ImportError:
        if _requested:
            raise
        from . import _pykern as kern

        BACKEND = "python"
        warnings.warn(
            "compiled kernels are not built; falling back to the pure Python "
            "backend (install with a C compiler for full speed)",
            RuntimeWarning,
            stacklevel=2,
        )
else:
    raise ValueError(
        f"EGT_BACKEND={_requested!r} not understood; use 'compiled' or 'python'"
    )


def backend_name():
    """Name of the active kernel backend: 'compiled' or 'python'."""
    return BACKEND
