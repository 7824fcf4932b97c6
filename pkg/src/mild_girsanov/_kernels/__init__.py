"""Kernel backend selection: compiled extension when available, NumPy otherwise.

MILD_GIRSANOV_KERNELS = auto (default) | c | python forces the choice;
``c`` raises if the extension was not built.  Custom drifts always run on
the NumPy backend regardless of selection.
"""

from __future__ import annotations

import os

from . import numpy_impl

_choice = os.environ.get("MILD_GIRSANOV_KERNELS", "auto").lower()
if _choice not in ("auto", "c", "python"):
    raise ValueError(f"MILD_GIRSANOV_KERNELS must be auto|c|python, got {_choice!r}")

compiled = None
if _choice in ("auto", "c"):
    try:
        from . import _core as compiled  # type: ignore[no-redef]
    except ImportError:
        compiled = None
    if _choice == "c" and compiled is None:
        raise ImportError(
            "MILD_GIRSANOV_KERNELS=c but the compiled extension is missing; "
            "reinstall with the extension built"
        )

active = numpy_impl if (_choice == "python" or compiled is None) else compiled


def backend_name() -> str:
    return "numpy" if active is numpy_impl else "c"
