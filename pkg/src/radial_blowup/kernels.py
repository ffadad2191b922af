"""Backend selection for the RK4 kernels.

The compiled extension is used when it imports; otherwise, or when
``RADIAL_BLOWUP_PURE_PYTHON=1`` is set, the NumPy implementation is used.
Both expose ``selfsim_advance`` and ``wave_rk4_step`` with in-place
semantics and an integer status (0 ok, 1 non-finite values).
"""

import os

from . import _pykernels

python_backend = _pykernels

try:
    if os.environ.get("RADIAL_BLOWUP_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-python backend requested")
    from . import _kernels as compiled_backend
except ImportError:
    compiled_backend = None

backend = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "compiled" if compiled_backend is not None else "python"


def get_backend(name: str | None = None):
    """Return a kernel module: ``"compiled"``, ``"python"`` or the active default."""
    if name is None:
        return backend
    if name == "python":
        return python_backend
    if name == "compiled":
        if compiled_backend is None:
            raise ImportError("compiled kernels are not built")
        return compiled_backend
    raise ValueError(f"unknown backend {name!r}")
