"""Select the assembly kernel backend at import time.

The compiled Cython module is used when it was built; otherwise, or when the
environment variable ``RANDRB_PURE_PYTHON`` is set to a non-empty value other
than ``0``, the numpy implementation is used.
"""
import os

from . import _assembly_py

_force_python = os.environ.get("RANDRB_PURE_PYTHON", "") not in ("", "0")

if _force_python:
    _impl = _assembly_py
    BACKEND = "python"
else:
    try:
        from . import _assembly as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _assembly_py
        BACKEND = "python"

assemble_cells = _impl.assemble_cells
assemble_load = _impl.assemble_load
