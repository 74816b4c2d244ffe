"""Kernel backend selection.

The compiled extension is used when importable; ``URBANRAY_PURE=1`` forces
the pure-Python fallback.  ``BACKEND`` names the active choice.
"""

from __future__ import annotations

import os

from . import _pykernels

python_backend = _pykernels

try:
    from . import _ckernels as compiled_backend
except ImportError:  # extension not built
    compiled_backend = None

if compiled_backend is not None and os.environ.get("URBANRAY_PURE", "") not in ("1", "true", "yes"):
    active = compiled_backend
    BACKEND = "compiled"
else:
    active = python_backend
    BACKEND = "python"


def get_backend(name: str | None = None):
    """Return a kernel module by name (``"compiled"``, ``"python"`` or ``None`` for active)."""
    if name is None:
        return active
    if name == "python":
        return python_backend
    if name == "compiled":
        if compiled_backend is None:
            raise RuntimeError("compiled kernels are not built; run `pip install -e .`")
        return compiled_backend
    raise ValueError(f"unknown kernel backend {name!r}")
