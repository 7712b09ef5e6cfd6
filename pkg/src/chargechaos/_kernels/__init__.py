"""Kernel backend selection.

The compiled extension is used when it imports; set CHARGECHAOS_PURE_PYTHON=1
to force the numpy fallback.
"""
import os

from . import _pykernels as python_backend

compiled_backend = None
if not os.environ.get("CHARGECHAOS_PURE_PYTHON"):
    try:
        from . import _ckernels as compiled_backend
    except ImportError:
        compiled_backend = None

backend = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "compiled" if compiled_backend is not None else "python"

power_sums = backend.power_sums
syk_assemble = backend.syk_assemble
lis_count = backend.lis_count

__all__ = ["BACKEND", "power_sums", "syk_assemble", "lis_count",
           "python_backend", "compiled_backend"]
