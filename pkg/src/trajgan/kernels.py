"""Kernel backend selection.

The compiled extension is used when importable; set ``TRAJGAN_PUREPY=1`` to
force the numpy fallback.
"""
from __future__ import annotations

import os

from . import _pykernels

python_backend = _pykernels
compiled_backend = None
if os.environ.get("TRAJGAN_PUREPY", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled_backend  # type: ignore[no-redef]
    except ImportError:  # extension not built
        compiled_backend = None

backend = compiled_backend or python_backend
BACKEND_NAME = "compiled" if compiled_backend is not None else "python"

points_in_polygon = backend.points_in_polygon
clip_polygon_box = backend.clip_polygon_box
line_distances = backend.line_distances
longest_run = backend.longest_run
nearest_on_polygon = backend.nearest_on_polygon


def available_backends() -> dict:
    out = {"python": python_backend}
    if compiled_backend is not None:
        out["compiled"] = compiled_backend
    return out
